"""LTI system representation, structure validation, and the classification
machinery: controllability (Kalman rank + Hautus, mutually asserted),
stabilizability, and the ordered spectral partition into blocks whose
eigenvalue real parts are positive / zero / negative.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .linalg import fro, ordered_spectral_split, solve_sylvester, zero_tolerance

RANK_RTOL = 1e-8


def jordan_block(eig: complex, size: int) -> np.ndarray:
    dtype = float if complex(eig).imag == 0.0 else complex
    M = np.zeros((size, size), dtype=dtype)
    np.fill_diagonal(M, eig if dtype is complex else complex(eig).real)
    for i in range(size - 1):
        M[i, i + 1] = 1.0
    return M


def jordan_matrix(blocks) -> np.ndarray:
    mats = [jordan_block(eig, size) for eig, size in blocks]
    if not mats:
        return np.zeros((0, 0))
    dtype = complex if any(np.iscomplexobj(m) for m in mats) else float
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=dtype)
    k = 0
    for m in mats:
        d = m.shape[0]
        out[k : k + d, k : k + d] = m
        k += d
    return out


@dataclass
class LtiSystem:
    """The pair (A, B) with a field tag and optional declared Jordan structure.

    field: "real" or "complex".  form: "general" or "jordan"; declared-Jordan
    systems must have A exactly equal (entrywise) to the block-diagonal
    matrix built from jordan_blocks.
    """

    A: np.ndarray
    B: np.ndarray
    field: str = "real"
    form: str = "general"
    jordan_blocks: tuple | None = None

    def __post_init__(self):
        A = np.asarray(self.A)
        B = np.asarray(self.B)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"A must be square, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise InputError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if self.field not in ("real", "complex"):
            raise InputError(f"field must be 'real' or 'complex', got {self.field!r}")
        if self.form not in ("general", "jordan"):
            raise InputError(f"form must be 'general' or 'jordan', got {self.form!r}")
        if self.field == "real":
            if np.iscomplexobj(A) and np.any(A.imag):
                raise InputError("real-field system has complex entries in A")
            if np.iscomplexobj(B) and np.any(B.imag):
                raise InputError("real-field system has complex entries in B")
            A = A.real.astype(float)
            B = B.real.astype(float)
        else:
            A = A.astype(complex)
            B = B.astype(complex)
        if self.form == "jordan":
            if not self.jordan_blocks:
                raise InputError("declared-Jordan system requires jordan_blocks")
            blocks = tuple((complex(eig), int(size)) for eig, size in self.jordan_blocks)
            if any(size < 1 for _, size in blocks):
                raise InputError("Jordan block sizes must be positive")
            built = jordan_matrix(blocks)
            if built.shape != A.shape or np.any(built != A):
                raise InputError("A does not equal the matrix built from jordan_blocks")
            tau = zero_tolerance(A)
            for eig, _ in blocks:
                if eig.real != 0.0 and abs(eig.real) < tau:
                    raise InputError(
                        f"declared eigenvalue {eig} has a nonzero real part inside the "
                        f"zero-classification band (|Re| < {tau:.2e}); declaration is ambiguous"
                    )
            object.__setattr__(self, "jordan_blocks", blocks)
        elif self.jordan_blocks is not None:
            raise InputError("jordan_blocks given but form is 'general'")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def eigenvalues(self) -> np.ndarray:
        """Declared eigenvalues when available (exact), else computed."""
        if self.form == "jordan":
            return np.concatenate(
                [np.full(size, eig, dtype=complex) for eig, size in self.jordan_blocks]
            )
        return np.linalg.eigvals(self.A)


def controllability_matrix(sys: LtiSystem) -> np.ndarray:
    """[B, AB, ..., A^{n-1} B], shape n x (n m)."""
    n, m = sys.n, sys.m
    out = np.zeros((n, n * m), dtype=sys.B.dtype)
    block = sys.B
    for k in range(n):
        out[:, k * m : (k + 1) * m] = block
        if k < n - 1:
            block = sys.A @ block
    return out


def numerical_rank(M, rtol: float = RANK_RTOL):
    """(rank, margin): SVD rank with threshold rtol * sigma_max, plus the
    smallest singular value of the full-rank question (the decision margin)."""
    M = np.asarray(M)
    if M.size == 0:
        return 0, 0.0
    s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0])
    if smax == 0.0:
        return 0, 0.0
    rank = int(np.sum(s > rtol * smax))
    margin = float(s[min(M.shape) - 1])
    return rank, margin


def hautus_deficient_eigenvalues(sys: LtiSystem, eigenvalues=None, rtol: float = RANK_RTOL):
    """Eigenvalues at which rank [lambda I - A, B] < n."""
    if eigenvalues is None:
        eigenvalues = sys.eigenvalues()
    n = sys.n
    eye = np.eye(n)
    bad = []
    for lam in np.asarray(eigenvalues):
        pencil = np.hstack([lam * eye - sys.A, sys.B])
        rank, _ = numerical_rank(pencil, rtol)
        if rank < n:
            bad.append(complex(lam))
    return bad


def is_controllable(sys: LtiSystem, rank_rtol: float = RANK_RTOL) -> bool:
    """Kalman rank test, cross-asserted against the Hautus test.

    A disagreement between the two tests raises rather than silently picking
    one verdict.
    """
    rank, _ = numerical_rank(controllability_matrix(sys), rank_rtol)
    kalman = rank == sys.n
    hautus = not hautus_deficient_eigenvalues(sys, rtol=rank_rtol)
    if kalman != hautus:
        raise NumericalError(
            f"controllability tests disagree (Kalman rank {rank}/{sys.n}, "
            f"Hautus {'pass' if hautus else 'fail'}); the system is too close to "
            "the controllable/uncontrollable boundary for a reliable verdict"
        )
    return kalman


def controllability_margin(sys: LtiSystem) -> float:
    """Smallest singular value of the controllability matrix (decision margin)."""
    _, margin = numerical_rank(controllability_matrix(sys))
    return margin


def unstabilizable_eigenvalues(sys: LtiSystem, tau: float | None = None, rank_rtol: float = RANK_RTOL):
    """Eigenvalues with Re >= -tau that fail the Hautus test."""
    if tau is None:
        tau = zero_tolerance(sys.A)
    eigs = sys.eigenvalues()
    nonneg = [lam for lam in eigs if lam.real >= -tau]
    return hautus_deficient_eigenvalues(sys, nonneg, rank_rtol)


def is_stabilizable(sys: LtiSystem, tau: float | None = None) -> bool:
    return not unstabilizable_eigenvalues(sys, tau)


@dataclass
class SpectralPartition:
    """Invertible P with P^{-1} A P = diag(J_u, J_o, J_a) and C = P^{-1} B
    stacked as [C_u; C_o; C_a]; eigenvalue real parts of J_u / J_o / J_a are
    positive / zero (|Re| <= tau) / negative."""

    P: np.ndarray
    P_inv: np.ndarray
    J_u: np.ndarray
    J_o: np.ndarray
    J_a: np.ndarray
    C_u: np.ndarray
    C_o: np.ndarray
    C_a: np.ndarray
    tau: float
    jordan_blocks_u: tuple | None = None
    jordan_blocks_o: tuple | None = None
    jordan_blocks_a: tuple | None = None

    @property
    def n_u(self) -> int:
        return self.J_u.shape[0]

    @property
    def n_o(self) -> int:
        return self.J_o.shape[0]

    @property
    def n_a(self) -> int:
        return self.J_a.shape[0]

    @property
    def n(self) -> int:
        return self.n_u + self.n_o + self.n_a

    def J(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n), dtype=complex)
        k = 0
        for blk in (self.J_u, self.J_o, self.J_a):
            d = blk.shape[0]
            out[k : k + d, k : k + d] = blk
            k += d
        return out

    def C(self) -> np.ndarray:
        return np.vstack([self.C_u, self.C_o, self.C_a])

    def reconstruction_error(self, A) -> float:
        return fro(self.P @ self.J() @ self.P_inv - np.asarray(A))


def _block_decouple(split):
    """Turn an ordered Schur form into a block-diagonalizing transform.

    Returns (P, P_inv) with P^{-1} M P = diag(T_pp, T_zz, T_nn); off-diagonal
    coupling is removed by two Sylvester solves (solvable because the groups
    have disjoint spectra by construction).
    """
    T = split.T
    n_p, n_z, n_n = split.group_sizes
    n = T.shape[0]
    R = np.eye(n, dtype=complex)
    R_inv = np.eye(n, dtype=complex)
    if n_p and (n_z + n_n):
        T_pp = T[:n_p, :n_p]
        T_ps = T[:n_p, n_p:]
        T_ss = T[n_p:, n_p:]
        X = solve_sylvester(T_pp, -T_ss, -T_ps)
        R[:n_p, n_p:] = X
        R_inv[:n_p, n_p:] = -X
    if n_z and n_n:
        T_zz = T[n_p : n_p + n_z, n_p : n_p + n_z]
        T_zn = T[n_p : n_p + n_z, n_p + n_z :]
        T_nn = T[n_p + n_z :, n_p + n_z :]
        Y = solve_sylvester(T_zz, -T_nn, -T_zn)
        R2 = np.eye(n, dtype=complex)
        R2_inv = np.eye(n, dtype=complex)
        R2[n_p : n_p + n_z, n_p + n_z :] = Y
        R2_inv[n_p : n_p + n_z, n_p + n_z :] = -Y
        R = R @ R2
        R_inv = R2_inv @ R_inv
    P = split.Q @ R
    P_inv = R_inv @ split.Q.conj().T
    return P, P_inv


def block_diagonalize(M, tau: float | None = None):
    """Ordered spectral split plus decoupling: (P, P_inv, sizes) with
    P^{-1} M P block-diagonal, groups (positive, zero, negative)."""
    split = ordered_spectral_split(M, tau)
    P, P_inv = _block_decouple(split)
    return P, P_inv, split.group_sizes, split.tau


def spectral_partition(sys: LtiSystem, tau: float | None = None) -> SpectralPartition:
    """Partition (A, B) into the (u, o, a) block frame.

    Declared-Jordan systems are reordered by an exact permutation; general
    systems go through the ordered Schur split and Sylvester decoupling.
    """
    n = sys.n
    if sys.form == "jordan":
        classes = {"u": [], "o": [], "a": []}
        offsets = []
        k = 0
        for eig, size in sys.jordan_blocks:
            offsets.append((eig, size, k))
            k += size
        for eig, size, off in offsets:
            key = "o" if eig.real == 0.0 else ("u" if eig.real > 0 else "a")
            classes[key].append((eig, size, off))
        order = []
        blocks = {}
        for key in ("u", "o", "a"):
            blocks[key] = tuple((eig, size) for eig, size, _ in classes[key])
            for _, size, off in classes[key]:
                order.extend(range(off, off + size))
        perm = np.array(order, dtype=int)
        P = np.eye(n)[:, perm]
        P_inv = P.T
        J = P_inv @ sys.A @ P
        C = P_inv @ sys.B
        n_u = sum(size for _, size in blocks["u"])
        n_o = sum(size for _, size in blocks["o"])
        tau_val = zero_tolerance(sys.A) if tau is None else tau
        return SpectralPartition(
            P=P,
            P_inv=P_inv,
            J_u=J[:n_u, :n_u],
            J_o=J[n_u : n_u + n_o, n_u : n_u + n_o],
            J_a=J[n_u + n_o :, n_u + n_o :],
            C_u=C[:n_u],
            C_o=C[n_u : n_u + n_o],
            C_a=C[n_u + n_o :],
            tau=tau_val,
            jordan_blocks_u=blocks["u"],
            jordan_blocks_o=blocks["o"],
            jordan_blocks_a=blocks["a"],
        )
    P, P_inv, (n_u, n_o, n_a), tau_val = block_diagonalize(sys.A, tau)
    J = P_inv @ sys.A @ P
    C = P_inv @ sys.B
    return SpectralPartition(
        P=P,
        P_inv=P_inv,
        J_u=J[:n_u, :n_u],
        J_o=J[n_u : n_u + n_o, n_u : n_u + n_o],
        J_a=J[n_u + n_o :, n_u + n_o :],
        C_u=C[:n_u],
        C_o=C[n_u : n_u + n_o],
        C_a=C[n_u + n_o :],
        tau=tau_val,
    )


# ---------------------------------------------------------------------------
# System JSON schema (consumed by the CLI)
# ---------------------------------------------------------------------------


def _entry_to_json(x, field: str):
    if field == "real":
        return float(np.real(x))
    z = complex(x)
    return [z.real, z.imag]


def _entry_from_json(x, field: str, where: str):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        if field == "real" and x[1] != 0:
            raise InputError(f"{where}: nonzero imaginary part in a real-field system")
        return complex(x[0], x[1])
    raise InputError(f"{where}: entry must be a number or a [re, im] pair, got {x!r}")


def _matrix_from_json(rows, field: str, name: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InputError(f"{name}: expected a non-empty list of rows")
    data = [
        [_entry_from_json(x, field, f"{name}[{i}][{j}]") for j, x in enumerate(row)]
        for i, row in enumerate(rows)
    ]
    M = np.array(data, dtype=complex)
    return M.real if field == "real" else M


def system_to_dict(sys: LtiSystem) -> dict:
    doc = {
        "field": sys.field,
        "form": sys.form,
        "A": [[_entry_to_json(x, sys.field) for x in row] for row in np.asarray(sys.A)],
        "B": [[_entry_to_json(x, sys.field) for x in row] for row in np.asarray(sys.B)],
    }
    if sys.form == "jordan":
        doc["jordan_blocks"] = [
            {"eig": [eig.real, eig.imag], "size": size} for eig, size in sys.jordan_blocks
        ]
    return doc


def system_from_dict(doc: dict) -> LtiSystem:
    if not isinstance(doc, dict):
        raise InputError("system document must be a JSON object")
    field_tag = doc.get("field", "real")
    form = doc.get("form", "general")
    for key in ("A", "B"):
        if key not in doc:
            raise InputError(f"system document missing {key!r}")
    A = _matrix_from_json(doc["A"], field_tag, "A")
    B = _matrix_from_json(doc["B"], field_tag, "B")
    blocks = None
    if form == "jordan":
        raw = doc.get("jordan_blocks")
        if not isinstance(raw, list) or not raw:
            raise InputError("declared-Jordan document requires a jordan_blocks list")
        blocks = []
        for i, blk in enumerate(raw):
            if not isinstance(blk, dict) or "eig" not in blk or "size" not in blk:
                raise InputError(f"jordan_blocks[{i}]: expected {{'eig': [re, im], 'size': k}}")
            eig = _entry_from_json(blk["eig"], "complex", f"jordan_blocks[{i}].eig")
            blocks.append((eig, int(blk["size"])))
    return LtiSystem(A=A, B=B, field=field_tag, form=form, jordan_blocks=blocks)


def load_system(path: str) -> LtiSystem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return system_from_dict(doc)


def save_system(sys: LtiSystem, path: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(sys), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)
