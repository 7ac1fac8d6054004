"""Dense matrix kernels shared by all other modules.

Matrix exponential, ordered spectral decomposition, Lyapunov solves and
Hermitian inversion.  Everything here is a pure function of its inputs;
matrices are plain numpy arrays (float64 or complex128).
"""

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import EigenSolverError, NumericalError, SingularMatrixError, SpectraOverlapError

#: Relative tolerance used by residual post-checks of the solvers.
LYAPUNOV_RTOL = 1e-10

#: Condition number above which hermitian_inverse warns (never fails).
CONDITION_WARN_THRESHOLD = 1e12


def fro(M) -> float:
    return float(np.linalg.norm(M, "fro"))


def zero_tolerance(M, base: float = 1e-8) -> float:
    """Default eigenvalue-classification tolerance: base * max(1, ||M||_F)."""
    return base * max(1.0, fro(M))


def _require_square(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def _exact_nilpotency_index(M) -> int | None:
    """Smallest q with M^q == 0 exactly, or None.

    Detects structurally nilpotent inputs (e.g. declared Jordan blocks with
    zero eigenvalue), where the zero pattern makes powers exactly zero.
    """
    n = M.shape[0]
    if not M.any():
        return 1 if n else 1
    P = M
    for q in range(2, n + 1):
        P = P @ M
        if not P.any():
            return q
    return None


def expm(M, t: float = 1.0) -> np.ndarray:
    """e^{M t}.

    Exactly summed (finite series) when M is detected as nilpotent, exact
    elementwise exponential when M is exactly diagonal, scaling-and-squaring
    Pade otherwise.
    """
    M = _require_square(M)
    n = M.shape[0]
    if n == 0:
        return M.copy()
    if t == 0.0:
        return np.eye(n, dtype=M.dtype)
    if not np.any(M - np.diag(np.diag(M))):
        return np.diag(np.exp(np.diag(M) * t))
    q = _exact_nilpotency_index(M)
    if q is not None:
        out = np.eye(n, dtype=np.result_type(M.dtype, type(t)))
        term = np.eye(n, dtype=out.dtype)
        for k in range(1, q):
            term = term @ M * (t / k)
            out = out + term
        return out
    return sla.expm(M * t)


class SpectralSplit:
    """Ordered Schur-type decomposition with eigenvalues grouped by sign of
    the real part: (positive, zero, negative), zero meaning |Re| <= tau.

    Q is unitary, T upper triangular, Q T Q^H reconstructs the input.
    For each group the leading columns of Q up to that group's end span the
    invariant subspace of all groups so far.
    """

    def __init__(self, Q, T, eigenvalues, tags, tau, group_sizes):
        self.Q = Q
        self.T = T
        self.eigenvalues = eigenvalues
        self.tags = tags
        self.tau = tau
        self.n_positive, self.n_zero, self.n_negative = group_sizes

    @property
    def group_sizes(self):
        return (self.n_positive, self.n_zero, self.n_negative)

    def reconstruction_error(self, M) -> float:
        return fro(self.Q @ self.T @ self.Q.conj().T - np.asarray(M))


def ordered_spectral_split(M, tau: float | None = None) -> SpectralSplit:
    """Sorted complex Schur form with eigenvalue groups (positive, zero,
    negative real part), contiguous in that order.

    Ties at |Re| == tau are classified as zero (the conservative choice:
    borderline eigenvalues route into the imaginary-axis analysis).
    """
    M = _require_square(M)
    if tau is None:
        tau = zero_tolerance(M)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    n = M.shape[0]
    if n == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SpectralSplit(empty, empty, np.zeros(0, dtype=complex), [], tau, (0, 0, 0))
    A = M.astype(complex)
    try:
        T1, Z1, n_pos = sla.schur(A, output="complex", sort=lambda lam: lam.real > tau)
        rest = T1[n_pos:, n_pos:]
        if rest.shape[0]:
            T2, Z2, n_zero = sla.schur(rest, output="complex", sort=lambda lam: abs(lam.real) <= tau)
        else:
            T2 = rest
            Z2 = np.zeros((0, 0), dtype=complex)
            n_zero = 0
    except sla.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise EigenSolverError(f"Schur iteration failed: {exc}") from exc
    Q = Z1.copy()
    Q[:, n_pos:] = Z1[:, n_pos:] @ Z2
    T = np.zeros_like(T1)
    T[:n_pos, :n_pos] = T1[:n_pos, :n_pos]
    T[:n_pos, n_pos:] = T1[:n_pos, n_pos:] @ Z2
    T[n_pos:, n_pos:] = T2
    eigs = np.diag(T).copy()
    n_neg = n - n_pos - n_zero
    tags = ["positive"] * n_pos + ["zero"] * n_zero + ["negative"] * n_neg
    for lam, tag in zip(eigs, tags):
        expected = "zero" if abs(lam.real) <= tau else ("positive" if lam.real > tau else "negative")
        if expected != tag:
            raise EigenSolverError("Schur reordering produced inconsistent eigenvalue groups")
    return SpectralSplit(Q, T, eigs, tags, tau, (n_pos, n_zero, n_neg))


def solve_lyapunov(F, Q) -> np.ndarray:
    """Solve F X + X F^H = Q for Hermitian Q.

    Requires the spectra of F and -F^H to be disjoint (always true when the
    eigenvalues of F lie strictly in one open half-plane).  The residual is
    verified against LYAPUNOV_RTOL * (2 ||F|| ||X|| + ||Q||).
    """
    F = _require_square(F)
    Q = _require_square(np.asarray(Q))
    if F.shape != Q.shape:
        raise ValueError("F and Q must have the same shape")
    n = F.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    nq = fro(Q)
    if fro(Q - Q.conj().T) > 1e-10 * max(1.0, nq):
        raise ValueError("Q must be Hermitian")
    eigs = np.linalg.eigvals(F)
    sums = eigs[:, None] + eigs.conj()[None, :]
    sep = float(np.min(np.abs(sums)))
    scale = max(1.0, float(np.max(np.abs(eigs))))
    if sep <= 1e-12 * scale:
        raise SpectraOverlapError(
            f"Lyapunov equation ill-posed: eigenvalue sum with magnitude {sep:.3e}"
        )
    X = sla.solve_continuous_lyapunov(F, 0.5 * (Q + Q.conj().T))
    X = 0.5 * (X + X.conj().T)
    residual = fro(F @ X + X @ F.conj().T - Q)
    bound = LYAPUNOV_RTOL * (2.0 * fro(F) * fro(X) + nq)
    if residual > max(bound, 1e-300):
        raise NumericalError(
            f"Lyapunov residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return X


def solve_sylvester(A, B, Q) -> np.ndarray:
    """Solve A X + X B = Q, guarding against overlapping spectra."""
    A = _require_square(A)
    B = _require_square(np.asarray(B))
    Q = np.asarray(Q)
    if Q.shape != (A.shape[0], B.shape[0]):
        raise ValueError("Q has inconsistent shape for the Sylvester equation")
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros(Q.shape, dtype=complex)
    ea = np.linalg.eigvals(A)
    eb = np.linalg.eigvals(B)
    sums = ea[:, None] + eb[None, :]
    sep = float(np.min(np.abs(sums)))
    scale = max(1.0, float(np.max(np.abs(ea))), float(np.max(np.abs(eb))))
    if sep <= 1e-12 * scale:
        raise SpectraOverlapError(
            f"Sylvester equation ill-posed: eigenvalue sum with magnitude {sep:.3e}"
        )
    return sla.solve_sylvester(A, B, Q)


def hermitian_inverse(M, floor: float | None = None, warn_threshold: float = CONDITION_WARN_THRESHOLD):
    """Invert a Hermitian matrix through its eigendecomposition.

    Returns (inverse, condition_estimate).  Raises SingularMatrixError when
    the smallest absolute eigenvalue falls below `floor` (default: an
    eps-level cutoff relative to the largest eigenvalue).  Condition numbers
    above `warn_threshold` only warn.
    """
    M = _require_square(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex), 1.0
    nm = fro(M)
    if fro(M - M.conj().T) > 1e-10 * max(1.0, nm):
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    absw = np.abs(w)
    largest = float(np.max(absw))
    smallest = float(np.min(absw))
    if floor is None:
        floor = max(largest, 1.0) * n * np.finfo(float).eps
    if smallest < floor:
        raise SingularMatrixError(
            f"numerically singular: pivot {smallest:.3e} below floor {floor:.3e}",
            pivot=smallest,
        )
    cond = largest / smallest
    if cond > warn_threshold:
        warnings.warn(
            f"hermitian_inverse: condition estimate {cond:.3e} exceeds {warn_threshold:.1e}",
            stacklevel=2,
        )
    inv = (V / w) @ V.conj().T
    inv = 0.5 * (inv + inv.conj().T)
    if np.isrealobj(M):
        inv = inv.real
    return inv, cond
