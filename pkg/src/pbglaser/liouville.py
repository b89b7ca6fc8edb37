"""Full master-equation engine on the dressed-atom x Fock space.

Builds the time-independent generator of the dressed atom-cavity dynamics
(cavity resonant with the lasing transition, rapidly oscillating coupling
terms dropped), finds the stationary density matrix by shifted inverse
iteration, computes the stationary two-time field correlation by the
quantum regression theorem, and Fourier-transforms it into the emission
spectrum.  Serves as the brute-force oracle for the ladder solver.

Density matrices are plain complex ndarrays over the basis
|atom> x |photon>, atom-major, with atom index 0 the upper and index 1
the lower level of the lasing transition.  Superoperators act on
row-major vectorized matrices: vec(A rho B) = (A kron B^T) vec(rho).
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dressed import DressedRates
from .errors import (
    InsufficientDecayError, PropagationError, ResourceLimitError,
    SimulationError, SingularSystemError,
)

__all__ = [
    "FockAtomSpace", "EffectiveLiouvillian", "SpectrumResult",
    "build_liouvillian", "steady_state_density", "stationary_residual",
    "dressed_populations", "photon_distribution", "ladder_projections",
    "propagate_density", "correlation", "spectrum",
    "doublet_omega_grid", "narrow_omega_grid", "auto_horizon",
    "default_tau_step", "spectral_weight",
]

DEFAULT_FOCK_CAP = 400
_RK4_STABILITY = 1.5          # max |step * gershgorin bound|
_DECAY_FRACTION = 1e-3        # required |g(T)| / |g(0)| for an unbiased FT


@dataclass(frozen=True)
class FockAtomSpace:
    """Two dressed atomic levels tensored with photon numbers 0..n_max."""

    n_max: int

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")

    @property
    def n_photon(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def annihilation(self) -> sp.csr_matrix:
        """Cavity annihilation operator on the joint space."""
        a = sp.diags(np.sqrt(np.arange(1, self.n_photon)), 1, format="csr")
        return sp.kron(sp.identity(2, format="csr"), a, format="csr")

    def flip_to_upper(self) -> sp.csr_matrix:
        """|upper><lower| on the lasing transition (the pump jump)."""
        E = sp.csr_matrix(([1.0], ([0], [1])), shape=(2, 2))
        return sp.kron(E, sp.identity(self.n_photon, format="csr"), format="csr")

    def flip_to_lower(self) -> sp.csr_matrix:
        """|lower><upper| on the lasing transition (the emitting jump)."""
        E = sp.csr_matrix(([1.0], ([1], [0])), shape=(2, 2))
        return sp.kron(E, sp.identity(self.n_photon, format="csr"), format="csr")

    def inversion(self) -> sp.csr_matrix:
        """Population difference of the two dressed levels."""
        E = sp.diags([-1.0, 1.0], 0, format="csr")
        return sp.kron(E, sp.identity(self.n_photon, format="csr"), format="csr")


@dataclass
class EffectiveLiouvillian:
    """Sparse generator acting on row-major vectorized density matrices."""

    space: FockAtomSpace
    rates: DressedRates
    kappa: float
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.space.dim


def _left(X: sp.spmatrix, dim: int) -> sp.csr_matrix:
    return sp.kron(X, sp.identity(dim, format="csr"), format="csr")


def _right(X: sp.spmatrix, dim: int) -> sp.csr_matrix:
    return sp.kron(sp.identity(dim, format="csr"), X.T, format="csr")


def _dissipator(C: sp.spmatrix, rate: float, dim: int) -> sp.csr_matrix:
    """rate/2 * (2 C rho C^dag - C^dag C rho - rho C^dag C) as a superoperator."""
    CdC = (C.conj().T @ C).tocsr()
    return (rate / 2.0) * (2.0 * sp.kron(C, C.conj(), format="csr")
                           - _left(CdC, dim) - _right(CdC, dim))


def build_liouvillian(rates: DressedRates, kappa: float, n_max: int, *,
                      fock_cap: int = DEFAULT_FOCK_CAP) -> EffectiveLiouvillian:
    """Assemble the resonant-coupling generator with its four dissipators.

    The coherent part is -g1 [a^dag R_lower - R_raise a, rho]; dissipation
    acts through the population-difference operator (central-line rate),
    the two dressed flip operators (sideband rates), and the cavity mode.
    The assembled map is verified to annihilate the trace.
    """
    if n_max > fock_cap:
        raise ResourceLimitError(
            f"n_max={n_max} exceeds the superoperator cap {fock_cap}")
    space = FockAtomSpace(n_max)
    dim = space.dim
    a = space.annihilation()
    R_emit = space.flip_to_lower()
    R_pump = space.flip_to_upper()
    R3 = space.inversion()
    K = (a.conj().T @ R_emit - R_pump @ a).tocsr()
    L = -rates.g1 * (_left(K, dim) - _right(K, dim))
    L = L + _dissipator(R3, rates.gamma0, dim)
    L = L + _dissipator(R_emit, rates.gamma_minus, dim)
    L = L + _dissipator(R_pump, rates.gamma_plus, dim)
    L = L + _dissipator(a, kappa, dim)
    L = L.tocsr()
    # trace functional must be annihilated: sum of rows hitting vec(I)
    tr_vec = np.eye(dim).reshape(-1)
    defect = np.abs(L.T @ tr_vec).max()
    scale = max(np.abs(L.data).max() if L.nnz else 0.0, 1.0)
    if defect > 1e-12 * scale:
        raise SimulationError(
            f"assembled generator does not conserve trace (defect {defect:.2e})")
    return EffectiveLiouvillian(space=space, rates=rates, kappa=kappa, matrix=L)


def steady_state_density(L: EffectiveLiouvillian, *,
                         max_iter: int = 60) -> np.ndarray:
    """Stationary density matrix of the generator, by shifted inverse iteration.

    The result is trace-normalized, Hermitized, checked for positivity to
    1e-8 and for a stationarity residual at the 1e-10 level.
    """
    if not L.kappa > 0:
        raise ValueError("uniqueness of the stationary state needs kappa > 0")
    dim = L.dim
    A = L.matrix.tocsr()
    scale = max(float(np.abs(A.diagonal()).max()), 1.0)
    absA = A.copy()
    absA.data = np.abs(absA.data)
    row_max = absA.max(axis=1).toarray().ravel()
    row_max[row_max == 0.0] = 1.0
    row_scale = 1.0 / row_max
    M = (sp.diags(row_scale) @ A).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError:
        shift = 1e-12 * scale
        try:
            lu = spla.splu(
                (M - shift * sp.identity(dim * dim, format="csc")).tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(f"generator factorization failed: {exc}")
    x = np.eye(dim).reshape(-1) / dim
    # inverse iteration to a plateau, then iterative refinement
    rho, best = None, np.inf
    prev = np.inf
    for _ in range(max_iter):
        y = lu.solve(x * row_scale)
        norm = np.abs(y).max()
        if not np.isfinite(norm) or norm == 0.0:
            raise SingularSystemError("null-space iteration lost its direction")
        y /= norm
        cand = y.reshape(dim, dim)
        tr = np.trace(cand)
        if abs(tr) > 1e-14 * dim:
            cand = cand / tr
            resid = float(np.abs(A @ cand.reshape(-1)).max())
            if resid < best:
                rho, best = cand, resid
            if resid <= 1e-14 * scale or resid > 0.5 * prev:
                break
            prev = resid
        x = y
    if rho is not None:
        # refinement is non-monotone; roll forward and keep the best
        rolling = rho.reshape(-1)
        for _ in range(12):
            if best <= 1e-14 * scale:
                break
            rolling = rolling - lu.solve((A @ rolling) * row_scale)
            tr = np.trace(rolling.reshape(dim, dim))
            if abs(tr) <= 1e-14 * dim:
                break
            rolling = rolling / tr
            resid = float(np.abs(A @ rolling).max())
            if resid < best:
                rho, best = rolling.reshape(dim, dim).copy(), resid
    if rho is None or best > 1e-10 * scale:
        raise SingularSystemError(
            f"null-space iteration did not converge (best residual {best:.3e})")
    rho = rho.astype(np.complex128)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    eigmin = float(np.linalg.eigvalsh(rho).min())
    if eigmin < -1e-8:
        raise SingularSystemError(
            f"stationary matrix has eigenvalue {eigmin:.2e} below -1e-8")
    return rho


def stationary_residual(L: EffectiveLiouvillian, rho: np.ndarray) -> float:
    """Max-norm residual of the stationarity condition for ``rho``."""
    return float(np.abs(L.matrix @ rho.reshape(-1)).max())


def dressed_populations(rho: np.ndarray) -> tuple[float, float]:
    """Populations of the upper and lower dressed level (sum to one)."""
    nph = rho.shape[0] // 2
    p_upper = float(np.trace(rho[:nph, :nph]).real)
    p_lower = float(np.trace(rho[nph:, nph:]).real)
    return p_upper, p_lower


def photon_distribution(rho: np.ndarray) -> np.ndarray:
    """Photon-number distribution: the atomic partial trace's diagonal."""
    nph = rho.shape[0] // 2
    diag = np.diag(rho).real
    return diag[:nph] + diag[nph:]


def ladder_projections(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray,
                                                 np.ndarray, np.ndarray]:
    """Project a joint density matrix onto the four ladder families."""
    nph = rho.shape[0] // 2
    r_uu = rho[:nph, :nph]
    r_ll = rho[nph:, nph:]
    r_ul = rho[:nph, nph:]           # coherence <upper| rho |lower>
    p1 = np.real(np.diag(r_uu) + np.diag(r_ll))
    p2 = np.real(np.diag(r_ll) - np.diag(r_uu))
    first_upper = np.real(np.diag(r_ul, 1))     # <n-1| r_ul |n>, n = 1..
    roots = np.sqrt(np.arange(1, nph))
    p3 = np.zeros(nph)
    p3[1:] = roots * first_upper
    p4 = np.zeros(nph)
    p4[:-1] = roots * first_upper
    return p1, p2, p3, p4


def _gershgorin_bound(M: sp.csr_matrix) -> float:
    absM = M.copy()
    absM.data = np.abs(absM.data)
    return float(absM.sum(axis=1).max())


def _rk4_substeps(L: EffectiveLiouvillian, dt: float) -> tuple[int, float]:
    bound = max(_gershgorin_bound(L.matrix), 1e-30)
    n_sub = max(1, math.ceil(dt * bound / _RK4_STABILITY))
    return n_sub, dt / n_sub


def propagate_density(L: EffectiveLiouvillian, rho: np.ndarray,
                      t_final: float, samples: int = 1) -> list[np.ndarray]:
    """Evolve ``rho`` under the generator; returns ``samples`` snapshots
    at uniform times ending at ``t_final`` (the input state excluded)."""
    if t_final <= 0 or samples < 1:
        raise ValueError("t_final must be positive and samples >= 1")
    dt = t_final / samples
    n_sub, h = _rk4_substeps(L, dt)
    M = L.matrix
    x = rho.reshape(-1).astype(np.complex128)
    limit = 50.0 * max(np.abs(x).max(), 1e-300)
    out = []
    for _ in range(samples):
        for _ in range(n_sub):
            k1 = M @ x
            k2 = M @ (x + 0.5 * h * k1)
            k3 = M @ (x + 0.5 * h * k2)
            k4 = M @ (x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.abs(x).max() > limit:
            raise PropagationError("density propagation is growing; "
                                   "internal step too large")
        out.append(x.reshape(rho.shape).copy())
    return out


def correlation(L: EffectiveLiouvillian, rho_ss: np.ndarray,
                tau_grid: np.ndarray) -> np.ndarray:
    """Stationary field correlation <a^dag(t+tau) a(t)> by regression.

    ``tau_grid`` must be uniform and start at zero.  The operator-weighted
    stationary state a*rho_ss is propagated under the same generator with
    a fixed internal fourth-order step chosen from a spectral bound, and
    the trace against a^dag is sampled on the grid.  Warns when the
    correlation has not decayed to 1e-3 of its initial value at the
    horizon.
    """
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if len(tau_grid) < 2 or tau_grid[0] != 0.0:
        raise ValueError("tau_grid must start at 0 and contain >= 2 points")
    steps = np.diff(tau_grid)
    dtau = steps[0]
    if dtau <= 0 or not np.allclose(steps, dtau, rtol=1e-9, atol=0.0):
        raise ValueError("tau_grid must be uniformly spaced and increasing")

    a = L.space.annihilation()
    adag = a.conj().T.tocsr()
    # the generator and stationary state are real; propagate in float64
    imag_scale = float(np.abs(rho_ss.imag).max()) if np.iscomplexobj(rho_ss) else 0.0
    real_path = imag_scale <= 1e-12 * max(1.0, float(np.abs(rho_ss).max()))
    X0 = a @ (rho_ss.real if real_path else rho_ss)
    x = X0.reshape(-1).astype(np.float64 if real_path else np.complex128)
    M = L.matrix
    n_sub, h = _rk4_substeps(L, dtau)
    dim = L.dim

    def sample(vec):
        # Tr(a^dag X) over the sparse support of a
        return (adag.multiply(vec.reshape(dim, dim).T)).sum()

    g = np.empty(len(tau_grid), dtype=np.complex128)
    g[0] = sample(x)
    number_diag = (adag @ a).diagonal().real
    n_ss = float(number_diag @ np.diag(rho_ss).real)
    if abs(g[0] - n_ss) > 1e-9 * max(1.0, abs(n_ss)):
        raise SimulationError("correlation at tau=0 disagrees with <a^dag a>")
    limit = 50.0 * max(np.abs(x).max(), 1e-300)
    for k in range(1, len(tau_grid)):
        for _ in range(n_sub):
            k1 = M @ x
            k2 = M @ (x + 0.5 * h * k1)
            k3 = M @ (x + 0.5 * h * k2)
            k4 = M @ (x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.abs(x).max() > limit:
            raise PropagationError(
                f"regression propagation is growing at tau={tau_grid[k]:.3g}")
        g[k] = sample(x)
    if abs(g[-1]) > _DECAY_FRACTION * abs(g[0]):
        warnings.warn(
            f"correlation decayed only to {abs(g[-1]) / abs(g[0]):.2e} of "
            "its initial value at the horizon; spectrum may be biased",
            stacklevel=2)
    return g


@dataclass
class SpectrumResult:
    """Stationary emission spectrum around the lasing frequency.

    ``s`` is normalized to unit peak; ``scale`` restores the raw level.
    ``fwhm`` is the full width at half the global maximum and is None
    when several dominant peaks make it ambiguous; per-peak widths are
    then the place to look.
    """

    omega: np.ndarray
    s: np.ndarray
    scale: float
    peak_positions: np.ndarray
    peak_heights: np.ndarray
    peak_fwhms: list
    fwhm: float | None


def spectrum(g: np.ndarray, tau_grid: np.ndarray, omega_grid: np.ndarray, *,
             allow_undecayed: bool = False,
             peak_rel_height: float = 0.1) -> SpectrumResult:
    """Half-line Fourier transform of the correlation onto ``omega_grid``.

    S(w) = 2 Re sum_k w_k exp(i w tau_k) g(tau_k) dtau (trapezoid weights).
    Local maxima above ``peak_rel_height`` of the global maximum are
    located by quadratic interpolation; widths by linear interpolation at
    half height.
    """
    g = np.asarray(g, dtype=np.complex128)
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    omega_grid = np.asarray(omega_grid, dtype=np.float64)
    if g.shape != tau_grid.shape:
        raise ValueError("g and tau_grid must have matching shapes")
    if abs(g[0]) > 0 and abs(g[-1]) > _DECAY_FRACTION * abs(g[0]) \
            and not allow_undecayed:
        raise InsufficientDecayError(
            f"|g(T)|/|g(0)| = {abs(g[-1]) / abs(g[0]):.2e} > {_DECAY_FRACTION}; "
            "extend the horizon or pass allow_undecayed=True")
    dtau = tau_grid[1] - tau_grid[0]
    wts = np.full(len(g), dtau)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    gw = g * wts
    s = np.empty(len(omega_grid))
    chunk = max(1, int(4e6 // max(len(tau_grid), 1)))
    for i in range(0, len(omega_grid), chunk):
        om = omega_grid[i:i + chunk, None]
        s[i:i + chunk] = 2.0 * np.real(np.exp(1j * om * tau_grid) @ gw)
    scale = float(s.max())
    if scale <= 0:
        raise SimulationError("spectrum is nonpositive everywhere")

    positions, heights, widths = [], [], []
    thr = peak_rel_height * scale
    for i in range(1, len(s) - 1):
        if s[i] >= thr and s[i - 1] <= s[i] and s[i] > s[i + 1]:
            denom = s[i - 1] - 2.0 * s[i] + s[i + 1]
            delta = 0.5 * (s[i - 1] - s[i + 1]) / denom if denom != 0 else 0.0
            positions.append(omega_grid[i]
                             + delta * (omega_grid[i + 1] - omega_grid[i]))
            heights.append(s[i] / scale)
            widths.append(_local_fwhm(omega_grid, s, i))
    fwhm = _local_fwhm(omega_grid, s, int(np.argmax(s))) \
        if len(positions) == 1 else None
    return SpectrumResult(
        omega=omega_grid, s=s / scale, scale=scale,
        peak_positions=np.array(positions), peak_heights=np.array(heights),
        peak_fwhms=widths, fwhm=fwhm)


def _local_fwhm(omega: np.ndarray, s: np.ndarray, i_peak: int) -> float | None:
    """Width at half the height of the peak at index ``i_peak``; None when a
    half-height crossing runs off the grid."""
    half = 0.5 * s[i_peak]
    il = i_peak
    while il > 0 and s[il] > half:
        il -= 1
    ir = i_peak
    while ir < len(s) - 1 and s[ir] > half:
        ir += 1
    if s[il] > half or s[ir] > half:
        return None
    xl = omega[il] + (half - s[il]) * (omega[il + 1] - omega[il]) \
        / (s[il + 1] - s[il])
    xr = omega[ir - 1] + (half - s[ir - 1]) * (omega[ir] - omega[ir - 1]) \
        / (s[ir] - s[ir - 1])
    return float(xr - xl)


def spectral_weight(result: SpectrumResult) -> float:
    """Integral of the raw spectrum over its grid divided by 2 pi; equals
    the stationary mean photon number when the grid captures all peaks."""
    return float(np.trapezoid(result.s * result.scale, result.omega)
                 / (2.0 * math.pi))


def doublet_omega_grid(g1: float, points: int = 4001) -> np.ndarray:
    """Frequency grid wide enough for the coherent-splitting doublet."""
    span = 1.5 * max(g1, 1e-6)
    return np.linspace(-span, span, points)


def narrow_omega_grid(kappa: float, points: int = 4001) -> np.ndarray:
    """Zoomed grid for the narrow emission line at the lasing frequency."""
    return np.linspace(-20.0 * kappa, 20.0 * kappa, points)


def auto_horizon(rates: DressedRates, kappa: float) -> float:
    """Correlation horizon heuristic: a dozen lifetimes of the narrowest
    expected feature, floored for slow below-threshold relaxation."""
    nhat = max(0.0, (rates.gamma_plus - rates.gamma_minus) / (2.0 * kappa))
    return float(np.clip(12.0 * (1.0 + 2.0 * nhat) / kappa, 400.0, 20000.0))


def default_tau_step(rates: DressedRates, omega_max: float) -> float:
    """Grid step resolving the fastest retained oscillation 12-fold."""
    fastest = max(rates.g1, omega_max, 1e-6)
    return 2.0 * math.pi / (12.0 * fastest)
