"""Finite-horizon controllability Gramians and their structured inverses.

The Gramian convention is W(T) = int_0^T e^{-At} B B^H e^{-A^H t} dt.  Three
independent methods are provided: the augmented block exponential (default),
an ODE integration of dW/dT = BB^H - AW - WA^H, and adaptive quadrature.

For horizons where raw blocks overflow, computations move to the partitioned
(u, o, a) frame and use "buffered" factors: every stored matrix is either
bounded, polynomially growing, or exponentially decaying, and products are
grouped so that each grouped factor stays representable.  This is also how
W(T)^{-1} is evaluated at large T, where W(T) itself may exceed double range
while its inverse is perfectly tame.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .errors import GramianRangeError, NotControllableError, NumericalError, SingularMatrixError
from .linalg import expm, fro, hermitian_inverse, solve_lyapunov, solve_sylvester
from .model import LtiSystem, SpectralPartition, is_controllable, spectral_partition

#: largest |Re lambda| * T for which the single 2n x 2n exponential is used
DIRECT_EXPONENT_LIMIT = 300.0

#: natural-log magnitude above which intermediates are declared out of range
OVERFLOW_EXPONENT = 650.0

GRAMIAN_METHODS = ("augmented_expm", "ode", "quadrature")


@dataclass
class GramianSample:
    """W(T) at one horizon with method and cross-validation metadata."""

    T: float
    W: np.ndarray
    method: str
    est_error: float | None = None


@dataclass
class BlockGramians:
    """Diagonal and off-diagonal Gramian blocks of the partitioned system."""

    T: float
    V_u: np.ndarray
    V_o: np.ndarray
    V_a: np.ndarray
    V_uo: np.ndarray
    V_ua: np.ndarray
    V_oa: np.ndarray

    @property
    def V_us(self) -> np.ndarray:
        return np.hstack([self.V_uo, self.V_ua])

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.V_u, self.V_uo, self.V_ua])
        mid = np.hstack([self.V_uo.conj().T, self.V_o, self.V_oa])
        bot = np.hstack([self.V_ua.conj().T, self.V_oa.conj().T, self.V_a])
        return np.vstack([top, mid, bot])


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _max_real(M) -> float:
    if M.shape[0] == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(M).real))


def _guard_exponent(value: float, what: str, T: float) -> None:
    if value > OVERFLOW_EXPONENT:
        raise GramianRangeError(
            f"{what} at T={T:g} requires exp({value:.1f}), beyond double range"
        )


def _vanloan_offdiag(F1, F2, Q, T: float) -> np.ndarray:
    """Off-diagonal block of expm([[F1, Q], [0, F2]] T), which equals
    int_0^T e^{F1 (T-s)} Q e^{F2 s} ds."""
    n1 = F1.shape[0]
    n2 = F2.shape[0]
    if n1 == 0 or n2 == 0:
        return np.zeros((n1, n2), dtype=complex)
    _guard_exponent(max(_max_real(F1), _max_real(F2), 0.0) * T, "augmented exponential", T)
    dtype = np.result_type(F1.dtype, F2.dtype, Q.dtype, float)
    M = np.zeros((n1 + n2, n1 + n2), dtype=dtype)
    M[:n1, :n1] = F1
    M[:n1, n1:] = Q
    M[n1:, n1:] = F2
    return expm(M, T)[:n1, n1:]


def pair_gramian(F, G, T: float) -> np.ndarray:
    """W_{F,G}(T) = int_0^T e^{-Ft} G G^H e^{-F^H t} dt by the augmented
    exponential; raises GramianRangeError when out of double range."""
    F = np.asarray(F)
    G = np.asarray(G)
    n = F.shape[0]
    if n == 0 or T == 0.0:
        return np.zeros((n, n), dtype=F.dtype if n else float)
    growth = max(_max_real(-F), 0.0)  # = max(-Re lambda(F)), clipped
    _guard_exponent(2.0 * growth * T, "Gramian entries", T)
    offdiag = _vanloan_offdiag(-F, F.conj().T, G @ G.conj().T, T)
    W = offdiag @ expm(-F.conj().T, T)
    return _hermitize(W)


# ---------------------------------------------------------------------------
# Raw Gramian of a system: three mutually independent methods
# ---------------------------------------------------------------------------


def _gramian_ode(A, B, T: float, rtol: float = 1e-12) -> np.ndarray:
    n = A.shape[0]
    BBh = B @ B.conj().T
    dtype = np.result_type(A.dtype, B.dtype, float)

    def rhs(_t, w):
        W = w.reshape(n, n)
        dW = BBh - A @ W - W @ A.conj().T
        return dW.ravel()

    y0 = np.zeros(n * n, dtype=dtype)
    atol = 1e-13 * max(fro(BBh) * T, 1e-30)
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"Gramian ODE integration failed: {sol.message}")
    return _hermitize(sol.y[:, -1].reshape(n, n))


def _gramian_quadrature(A, B, T: float) -> np.ndarray:
    n = A.shape[0]

    def integrand(t):
        E = expm(-A, t) @ B
        return (E @ E.conj().T).ravel()

    val, _err = quad_vec(integrand, 0.0, T, epsabs=1e-300, epsrel=1e-12)
    return _hermitize(val.reshape(n, n))


def _gramian_blockwise(part: SpectralPartition, T: float) -> np.ndarray:
    """W(T) of the partitioned system, assembled from per-block formulas that
    avoid any intermediate growing faster than W itself."""
    bb = buffered_blocks(part, T)
    V = assemble_raw_blocks(part, bb)
    W = part.P @ V.assemble() @ part.P.conj().T
    return _hermitize(W)


def gramian(sys: LtiSystem, T: float, method: str = "augmented_expm", cross_validate: bool = False) -> GramianSample:
    """Controllability Gramian of the system at horizon T.

    The default augmented-exponential method switches to blockwise evaluation
    in the partitioned frame when the single augmented exponential would mix
    scales beyond float range.  `cross_validate=True` runs a second,
    independent method and records the relative discrepancy.
    """
    if method not in GRAMIAN_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {GRAMIAN_METHODS}")
    T = float(T)
    if T < 0:
        raise ValueError("horizon T must be nonnegative")
    n = sys.n
    if T == 0.0:
        W = np.zeros((n, n), dtype=sys.A.dtype)
        return GramianSample(T=T, W=W, method=method, est_error=0.0 if cross_validate else None)
    A = sys.A
    B = sys.B
    eigs = sys.eigenvalues()
    abs_re = float(np.max(np.abs(eigs.real))) if n else 0.0
    growth = float(max(0.0, -np.min(eigs.real)))  # stable modes make W grow
    _guard_exponent(2.0 * growth * T, "Gramian entries", T)
    if method == "augmented_expm":
        if abs_re * T <= DIRECT_EXPONENT_LIMIT:
            W = pair_gramian(A, B, T)
        else:
            W = _gramian_blockwise(spectral_partition(sys), T)
    elif method == "ode":
        W = _gramian_ode(A, B, T)
    else:
        W = _gramian_quadrature(A, B, T)
    if sys.field == "real":
        W = W.real if np.iscomplexobj(W) else W
    est = None
    if cross_validate:
        other = "quadrature" if method != "quadrature" else "ode"
        W2 = gramian(sys, T, method=other, cross_validate=False).W
        est = fro(W - W2) / max(1.0, fro(W))
    return GramianSample(T=T, W=W, method=method, est_error=est)


def gramian_inverse(sample: GramianSample):
    """(W(T)^{-1}, condition estimate) for a positive definite sample."""
    try:
        return hermitian_inverse(sample.W)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"Gramian at T={sample.T:g} is numerically singular "
            f"(pivot {exc.pivot:.3e}); check controllability of the pair",
            pivot=exc.pivot,
        ) from exc


# ---------------------------------------------------------------------------
# Partitioned-frame machinery
# ---------------------------------------------------------------------------


def infinite_gramian_unstable(part: SpectralPartition) -> np.ndarray:
    """W_u = W_{J_u, C_u}(infinity): the unique positive definite solution of
    J_u X + X J_u^H = C_u C_u^H.  Empty (0 x 0) when n_u = 0."""
    if part.n_u == 0:
        return np.zeros((0, 0), dtype=complex)
    pair = LtiSystem(
        A=np.asarray(part.J_u, dtype=complex),
        B=np.asarray(part.C_u, dtype=complex),
        field="complex",
    )
    if not is_controllable(pair):
        raise NotControllableError("the unstable pair (J_u, C_u) is not controllable")
    Wu = solve_lyapunov(part.J_u, part.C_u @ part.C_u.conj().T)
    smallest = float(np.min(np.linalg.eigvalsh(_hermitize(Wu)).real))
    if smallest <= 0:
        raise NumericalError(
            f"unstable-block Gramian is not positive definite (min eigenvalue {smallest:.3e})"
        )
    return _hermitize(Wu)


@dataclass
class BufferedBlocks:
    """Buffered Gramian factors of the partitioned system at horizon T.

    Every member is bounded or polynomially growing in T:
      E_o = e^{J_o T} (polynomial), E_a = e^{J_a T} (decaying),
      V_u -> W_u,
      tV_uo = V_uo e^{J_o^H T}, tV_ua = V_ua e^{J_a^H T} -> 0,
      tV_oo = e^{J_o T} V_o e^{J_o^H T} (polynomially growing),
      tV_oa = e^{J_o T} V_oa e^{J_a^H T} (bounded),
      tV_aa = e^{J_a T} V_a e^{J_a^H T} -> W_{-J_a, C_a}(infinity).
    """

    T: float
    E_o: np.ndarray
    E_a: np.ndarray
    V_u: np.ndarray
    tV_uo: np.ndarray
    tV_ua: np.ndarray
    tV_oo: np.ndarray
    tV_oa: np.ndarray
    tV_aa: np.ndarray
    W_u: np.ndarray
    W_inf_a: np.ndarray

    @property
    def tV_us(self) -> np.ndarray:
        return np.hstack([self.tV_uo, self.tV_ua])

    @property
    def E_s(self) -> np.ndarray:
        n_o = self.E_o.shape[0]
        n_a = self.E_a.shape[0]
        out = np.zeros((n_o + n_a, n_o + n_a), dtype=complex)
        out[:n_o, :n_o] = self.E_o
        out[n_o:, n_o:] = self.E_a
        return out


def buffered_blocks(part: SpectralPartition, T: float) -> BufferedBlocks:
    """Compute all buffered factors; every intermediate stays representable
    for any T at which e^{J_o T} is (polynomial growth only)."""
    J_u, J_o, J_a = part.J_u, part.J_o, part.J_a
    C_u, C_o, C_a = part.C_u, part.C_o, part.C_a
    n_u, n_o, n_a = part.n_u, part.n_o, part.n_a
    E_o = expm(J_o, T) if n_o else np.zeros((0, 0), dtype=complex)
    E_a = expm(J_a, T) if n_a else np.zeros((0, 0), dtype=complex)
    if n_u:
        W_u = solve_lyapunov(J_u, C_u @ C_u.conj().T)
        Eu = expm(-np.asarray(J_u), T)
        V_u = _hermitize(W_u - Eu @ W_u @ Eu.conj().T)
    else:
        W_u = np.zeros((0, 0), dtype=complex)
        V_u = W_u
    tV_uo = _vanloan_offdiag(-np.asarray(J_u), J_o.conj().T, C_u @ C_o.conj().T, T) if n_u and n_o else np.zeros((n_u, n_o), dtype=complex)
    tV_ua = _vanloan_offdiag(-np.asarray(J_u), J_a.conj().T, C_u @ C_a.conj().T, T) if n_u and n_a else np.zeros((n_u, n_a), dtype=complex)
    if n_o:
        # tV_oo = W_{-J_o, C_o}(T); both augmented factors grow at most polynomially
        offdiag = _vanloan_offdiag(np.asarray(J_o), -J_o.conj().T, C_o @ C_o.conj().T, T)
        tV_oo = _hermitize(offdiag @ expm(J_o.conj().T, T))
    else:
        tV_oo = np.zeros((0, 0), dtype=complex)
    if n_o and n_a:
        Q = C_o @ C_a.conj().T
        tV_oa = solve_sylvester(np.asarray(J_o, dtype=complex), J_a.conj().T, E_o @ Q @ E_a.conj().T - Q)
    else:
        tV_oa = np.zeros((n_o, n_a), dtype=complex)
    if n_a:
        W_inf_a = solve_lyapunov(-np.asarray(J_a), C_a @ C_a.conj().T)
        tV_aa = _hermitize(W_inf_a - E_a @ W_inf_a @ E_a.conj().T)
    else:
        W_inf_a = np.zeros((0, 0), dtype=complex)
        tV_aa = W_inf_a
    return BufferedBlocks(
        T=T, E_o=E_o, E_a=E_a, V_u=V_u, tV_uo=tV_uo, tV_ua=tV_ua,
        tV_oo=tV_oo, tV_oa=tV_oa, tV_aa=tV_aa, W_u=W_u, W_inf_a=W_inf_a,
    )


def assemble_raw_blocks(part: SpectralPartition, bb: BufferedBlocks) -> BlockGramians:
    """Undo the buffering: raw V_* blocks of the partitioned Gramian.
    Raises GramianRangeError when a raw block exceeds double range."""
    T = bb.T
    n_o, n_a = part.n_o, part.n_a
    growth_a = max(0.0, -_max_real(part.J_a)) if n_a else 0.0
    if n_a:
        _guard_exponent(2.0 * growth_a * T, "stable-block Gramian entries", T)
    Ea_inv_h = expm(-part.J_a.conj().T, T) if n_a else np.zeros((0, 0), dtype=complex)
    Eo_inv = expm(-np.asarray(part.J_o), T) if n_o else np.zeros((0, 0), dtype=complex)
    V_uo = bb.tV_uo @ expm(-part.J_o.conj().T, T) if n_o else bb.tV_uo
    V_ua = bb.tV_ua @ Ea_inv_h if n_a else bb.tV_ua
    V_o = _hermitize(Eo_inv @ bb.tV_oo @ Eo_inv.conj().T) if n_o else bb.tV_oo
    if n_o and n_a:
        Q = part.C_o @ part.C_a.conj().T
        V_oa = solve_sylvester(
            np.asarray(part.J_o, dtype=complex), part.J_a.conj().T,
            Q - Eo_inv @ Q @ Ea_inv_h,
        )
    else:
        V_oa = np.zeros((n_o, n_a), dtype=complex)
    if n_a:
        Ea_inv = expm(-np.asarray(part.J_a), T)
        V_a = _hermitize(Ea_inv @ bb.W_inf_a @ Ea_inv.conj().T - bb.W_inf_a)
    else:
        V_a = bb.tV_aa
    return BlockGramians(T=T, V_u=bb.V_u, V_o=V_o, V_a=V_a, V_uo=V_uo, V_ua=V_ua, V_oa=V_oa)


def block_gramians(part: SpectralPartition, T: float) -> BlockGramians:
    """Raw diagonal/off-diagonal Gramian blocks of the partitioned system."""
    if T < 0:
        raise ValueError("horizon T must be nonnegative")
    return assemble_raw_blocks(part, buffered_blocks(part, T))


def _scaled_hermitian_inverse(M: np.ndarray):
    """Hermitian inverse with Jacobi (diagonal) scaling: for graded positive
    definite matrices this keeps the factorized condition number small."""
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    d = np.sqrt(np.abs(np.diag(M).real))
    if np.any(d <= 0):
        inv, _ = hermitian_inverse(M, floor=1e-250, warn_threshold=np.inf)
        return inv
    Ms = M / np.outer(d, d)
    inv, _ = hermitian_inverse(Ms, floor=1e-250, warn_threshold=np.inf)
    return inv / np.outer(d, d)


@dataclass
class PartitionedInverse:
    """W(T)^{-1} together with the buffered factors it was assembled from."""

    T: float
    W_inv: np.ndarray          # inverse in original coordinates
    V_inv: np.ndarray          # inverse of the partitioned-frame Gramian
    schur_uu_inv: np.ndarray   # (V / V_s)^{-1}, converges to W_u^{-1}
    blocks: BufferedBlocks


def partitioned_inverse(part: SpectralPartition, T: float) -> PartitionedInverse:
    """W(T)^{-1} assembled from buffered factors and nested Schur complements.

    Mirrors the groupings used in the convergence analysis: the raw blocks of
    W(T) may overflow long before the inverse does, so the inverse is built
    from bounded/decaying grouped products only.  Requires a controllable
    system and T > 0.
    """
    if T <= 0:
        raise ValueError("partitioned inverse requires T > 0")
    bb = buffered_blocks(part, T)
    n_u, n_o, n_a = part.n_u, part.n_o, part.n_a
    n_s = n_o + n_a
    # inverse of the buffered s-block [[tV_oo, tV_oa], [tV_oa^H, tV_aa]]
    if n_o:
        No = _scaled_hermitian_inverse(bb.tV_oo)
    else:
        No = np.zeros((0, 0), dtype=complex)
    if n_a:
        if n_o:
            Sa = bb.tV_aa - bb.tV_oa.conj().T @ No @ bb.tV_oa
        else:
            Sa = bb.tV_aa
        Sai = _scaled_hermitian_inverse(_hermitize(Sa))
    else:
        Sai = np.zeros((0, 0), dtype=complex)
    Ns = np.zeros((n_s, n_s), dtype=complex)
    if n_o and n_a:
        NoV = No @ bb.tV_oa
        Ns[:n_o, :n_o] = No + NoV @ Sai @ NoV.conj().T
        Ns[:n_o, n_o:] = -NoV @ Sai
        Ns[n_o:, :n_o] = Ns[:n_o, n_o:].conj().T
        Ns[n_o:, n_o:] = Sai
    elif n_o:
        Ns[:, :] = No
    elif n_a:
        Ns[:, :] = Sai
    Ns = _hermitize(Ns)
    E_s = bb.E_s
    n = part.n
    V_inv = np.zeros((n, n), dtype=complex)
    if n_u:
        tV_us = bb.tV_us
        X = tV_us @ Ns
        schur_uu = _hermitize(bb.V_u - X @ tV_us.conj().T)
        G = _scaled_hermitian_inverse(schur_uu)
        Y = X @ E_s
        V_inv[:n_u, :n_u] = G
        V_inv[:n_u, n_u:] = -G @ Y
        V_inv[n_u:, :n_u] = V_inv[:n_u, n_u:].conj().T
        V_inv[n_u:, n_u:] = E_s.conj().T @ Ns @ E_s + Y.conj().T @ G @ Y
    else:
        schur_uu = np.zeros((0, 0), dtype=complex)
        G = schur_uu
        V_inv[:, :] = E_s.conj().T @ Ns @ E_s
    V_inv = _hermitize(V_inv)
    W_inv = _hermitize(part.P_inv.conj().T @ V_inv @ part.P_inv)
    return PartitionedInverse(T=T, W_inv=W_inv, V_inv=V_inv, schur_uu_inv=G, blocks=bb)
