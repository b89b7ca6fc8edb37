"""Photon-number-ladder solver for the dressed atom-cavity system.

The joint dynamics of the dressed atom and the cavity mode reduce, in the
photon-number representation, to four coupled real-valued ladders
P1..P4 (total population, population difference, and two Hermitian
coherence combinations).  Each photon number n couples only to n - 1 and
n + 1, so the stationary problem is a block-tridiagonal linear system
solved in O(N); time evolution uses a fixed-step fourth-order scheme on
the same sparse generator.

P3[0] is structurally zero (there is no photon state below the vacuum);
its row is pinned in the stationary system and frozen during evolution.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .dressed import DressedRates
from .errors import (
    PropagationError, ResourceLimitError, SimulationError,
    SingularSystemError, ThermalPumpLimitError, TruncationError,
)
from .specfun import DEFAULT_SERIES, SeriesControl, kummer_1f1_a1, ln_gamma

__all__ = [
    "PhotonLadder", "FieldObservables", "AsymptoticObservables",
    "steady_state", "evolve", "observables", "analytic_exponent",
    "analytic_distribution", "asymptotic_observables",
    "low_pump_observables", "choose_truncation",
    "DEFAULT_TAIL_TOL", "HARD_FOCK_CAP",
]

DEFAULT_TAIL_TOL = 1e-12
HARD_FOCK_CAP = 20000
_RESID_TOL = 1e-10     # per-row relative stationarity residual
_TRACE_EPS = 1e-9
_NEG_EPS = 1e-10


@dataclass
class PhotonLadder:
    """Truncated ladder state: four arrays over photon numbers 0..n_max.

    p1 is the photon-number distribution (unit total), p2 the
    population-difference ladder, p3/p4 the coherence ladders.  Treat
    instances as immutable values; solver outputs are safe to share
    between threads.
    """

    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL
    residual: float | None = None   # max per-row relative stationarity residual

    @property
    def n_max(self) -> int:
        return len(self.p1) - 1

    @classmethod
    def vacuum(cls, n_max: int, pop_diff: float = 1.0,
               tail_tol: float = DEFAULT_TAIL_TOL) -> "PhotonLadder":
        """Empty cavity with the atom fully in one dressed state.

        ``pop_diff`` is the population-difference entry at n = 0; the
        zero-pump stationary state has ``pop_diff = +1``.
        """
        z = np.zeros(n_max + 1)
        p1 = z.copy()
        p1[0] = 1.0
        p2 = z.copy()
        p2[0] = pop_diff
        return cls(p1, p2, z.copy(), z.copy(), tail_tol=tail_tol)

    def validate(self) -> None:
        """Raise ValueError if the stored state violates its invariants."""
        n = len(self.p1)
        if not (len(self.p2) == len(self.p3) == len(self.p4) == n and n >= 3):
            raise ValueError("ladder arrays must share a length of at least 3")
        if abs(self.p1.sum() - 1.0) > _TRACE_EPS:
            raise ValueError(f"p1 must sum to 1 within {_TRACE_EPS}")
        if self.p1.min() < -_NEG_EPS:
            raise ValueError("p1 has entries below the negativity tolerance")
        if np.any(np.abs(self.p2) > self.p1 + _NEG_EPS):
            raise ValueError("|p2| must not exceed p1 (up to solver noise)")
        if abs(self.p3[0]) > 1e-12:
            raise ValueError("p3[0] is structurally zero")
        if self.p1[-1] >= self.tail_tol:
            raise ValueError("truncation tail exceeds tail_tol")


@dataclass(frozen=True)
class FieldObservables:
    """Moments of the photon-number distribution.

    ``fano`` and ``q_mandel`` are None when the field is empty
    (mean below 1e-12) and the statistics are undefined.
    """

    mean_n: float
    mean_n2: float
    fano: float | None
    q_mandel: float | None


@dataclass(frozen=True)
class AsymptoticObservables:
    """Large-pump closed-form estimates of the field observables.

    ``mean_n`` is clamped at zero; ``mean_n_raw`` keeps the signed value,
    which goes negative below threshold where the estimate loses validity
    (``above_threshold`` is False there).
    """

    mean_n: float
    q: float
    mean_n_raw: float
    above_threshold: bool


def _generator(rates: DressedRates, kappa: float, n_max: int,
               stationary: bool) -> sp.csr_matrix:
    """Sparse ladder generator; pinned P3[0] row when stationary."""
    g0, gp, gm, g1 = rates.gamma0, rates.gamma_plus, rates.gamma_minus, rates.g1
    G = 4.0 * g0 + gp + gm
    ns = np.arange(n_max + 1, dtype=np.float64)
    r1 = 4 * np.arange(n_max + 1)
    r2, r3, r4 = r1 + 1, r1 + 2, r1 + 3
    one = np.ones(n_max + 1)
    blocks = [
        # P1 rows
        (r1, r1, -kappa * ns),
        (r1, r3, -2.0 * g1 * one),
        (r1, r4, +2.0 * g1 * one),
        (r1[:-1], r1[1:], kappa * (ns[:-1] + 1)),
        # P2 rows
        (r2, r1, -(gp - gm) * one),
        (r2, r2, -(gp + gm + kappa * ns)),
        (r2, r3, -2.0 * g1 * one),
        (r2, r4, -2.0 * g1 * one),
        (r2[:-1], r2[1:], kappa * (ns[:-1] + 1)),
        # P3 rows, n >= 1 only (P3[0] is structural zero)
        (r3[1:], r3[1:], -0.5 * (G + kappa * (2 * ns[1:] - 1))),
        (r3[1:], r1[1:], 0.5 * g1 * ns[1:]),
        (r3[1:], r1[:-1], -0.5 * g1 * ns[1:]),
        (r3[1:], r2[:-1], 0.5 * g1 * ns[1:]),
        (r3[1:], r2[1:], 0.5 * g1 * ns[1:]),
        (r3[1:], r4[1:], -kappa * one[1:]),
        (r3[1:-1], r3[2:], kappa * (ns[1:-1] + 1)),
        # P4 rows
        (r4, r4, -0.5 * (G + kappa * (2 * ns + 1))),
        (r4, r1, -0.5 * g1 * (ns + 1)),
        (r4, r2, +0.5 * g1 * (ns + 1)),
        (r4[:-1], r1[1:], 0.5 * g1 * (ns[:-1] + 1)),
        (r4[:-1], r2[1:], 0.5 * g1 * (ns[:-1] + 1)),
        (r4[:-1], r4[1:], kappa * (ns[:-1] + 1)),
    ]
    rows = np.concatenate([b[0] for b in blocks])
    cols = np.concatenate([b[1] for b in blocks])
    vals = np.concatenate([b[2] for b in blocks])
    if stationary:
        rows = np.append(rows, 2)
        cols = np.append(cols, 2)
        vals = np.append(vals, 1.0)
    dim = 4 * (n_max + 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def _pack(state: PhotonLadder) -> np.ndarray:
    x = np.empty(4 * (state.n_max + 1))
    x[0::4], x[1::4], x[2::4], x[3::4] = state.p1, state.p2, state.p3, state.p4
    return x


def _unpack(x: np.ndarray, tail_tol: float,
            residual: float | None = None) -> PhotonLadder:
    return PhotonLadder(x[0::4].copy(), x[1::4].copy(), x[2::4].copy(),
                        x[3::4].copy(), tail_tol=tail_tol, residual=residual)


def _relative_residual(A: sp.csr_matrix, absA: sp.csr_matrix,
                       x: np.ndarray) -> float:
    """Max per-row residual of A x = 0 relative to the row's own scale.

    Excluded: the pinned P3[0] row, and rows whose scale sits below the
    double-precision noise floor of the whole system (their entries are
    pure roundoff and carry no testable information).
    """
    r = np.abs(A @ x)
    scale = absA @ np.abs(x)
    mask = scale > scale.max() * 1e-14
    mask[2] = False
    if not mask.any():
        return np.inf
    return float((r[mask] / scale[mask]).max())


def steady_state(rates: DressedRates, kappa: float, n_max: int, *,
                 tail_tol: float = DEFAULT_TAIL_TOL,
                 max_iter: int = 60) -> PhotonLadder:
    """Unique normalized stationary state of the truncated ladder system.

    The homogeneous stationary system is solved by shifted inverse
    iteration on its sparse LU factorization, then normalized to unit
    total population.  Per-row relative residuals are driven below 1e-10.

    Raises
    ------
    SingularSystemError
        If the iteration fails to converge or the normalized solution is
        unphysical (degenerate parameters such as all rates zero).
    TruncationError
        If the tail entry p1[n_max] is not below ``tail_tol``; the
        exception carries a suggested larger truncation.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    A = _generator(rates, kappa, n_max, stationary=True).tocsr()
    dim = A.shape[0]
    absA = A.copy()
    absA.data = np.abs(absA.data)
    # row equilibration keeps the LU accurate despite rate scales spanning
    # many orders (kappa vs g1*n); the null vector is unchanged
    row_max = absA.max(axis=1).toarray().ravel()
    row_max[row_max == 0.0] = 1.0
    row_scale = 1.0 / row_max
    M = (sp.diags(row_scale) @ A).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError:
        shift = 1e-12 * max(float(np.abs(A.diagonal()).max()), 1.0)
        try:
            lu = spla.splu((M - shift * sp.identity(dim, format="csc")).tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(
                f"stationary system factorization failed: {exc}")

    # start from a normal bump around the expected mean photon number
    nhat = max(0.0, (rates.gamma_plus - rates.gamma_minus) / (2.0 * kappa))
    ns = np.arange(n_max + 1)
    x = np.zeros(dim)
    bump = np.exp(-0.5 * (ns - min(nhat, n_max)) ** 2 / (nhat + 1.0))
    x[0::4] = bump / bump.sum()

    # inverse iteration to a plateau, then iterative refinement
    solution, residual = None, np.inf
    prev = np.inf
    for _ in range(max_iter):
        y = lu.solve(x * row_scale)
        norm = np.abs(y).max()
        if not np.isfinite(norm) or norm == 0.0:
            raise SingularSystemError("inverse iteration produced no direction")
        y /= norm
        total = y[0::4].sum()
        if abs(total) > 1e-14 * (n_max + 1):
            cand = y / total
            rel = _relative_residual(A, absA, cand)
            if rel < residual and abs(cand[2]) <= 1e-9:
                solution, residual = cand, rel
            if rel <= 1e-13 or rel > 0.5 * prev:
                break
            prev = rel
        x = y
    if solution is not None:
        # refinement is non-monotone; roll forward and keep the best
        rolling = solution
        for _ in range(12):
            if residual <= 1e-13:
                break
            corr = lu.solve((A @ rolling) * row_scale)
            rolling = rolling - corr
            total = rolling[0::4].sum()
            if abs(total) <= 1e-14 * (n_max + 1):
                break
            rolling = rolling / total
            rel = _relative_residual(A, absA, rolling)
            if rel < residual and abs(rolling[2]) <= 1e-9:
                solution, residual = rolling, rel
    if solution is None or residual > _RESID_TOL:
        raise SingularSystemError(
            f"no stationary solution with per-row residual <= {_RESID_TOL} "
            f"within {max_iter} iterations (best {residual:.3e})")

    ladder = _unpack(solution, tail_tol, residual)
    if ladder.p1.min() < -_NEG_EPS or np.any(
            np.abs(ladder.p2) > ladder.p1 + _NEG_EPS):
        raise SingularSystemError(
            "converged to an unphysical stationary vector; the parameters "
            "leave the stationary state underdetermined")
    if ladder.p1[-1] >= tail_tol:
        raise TruncationError(
            f"tail p1[{n_max}] = {ladder.p1[-1]:.3e} >= tail_tol {tail_tol:.1e}",
            suggested_n=2 * n_max)
    return ladder


def choose_truncation(rates: DressedRates, kappa: float, *,
                      tail_tol: float = DEFAULT_TAIL_TOL,
                      hard_cap: int = HARD_FOCK_CAP) -> int:
    """Smallest tried truncation whose solved tail is below ``tail_tol``.

    Starts from the expected mean photon number plus a twelve-sigma
    margin and doubles until the stationary tail condition holds.
    """
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    ladder, n_max = _adaptive_steady_state(rates, kappa, tail_tol=tail_tol,
                                           hard_cap=hard_cap)
    return n_max


def _adaptive_steady_state(rates: DressedRates, kappa: float, *,
                           tail_tol: float = DEFAULT_TAIL_TOL,
                           hard_cap: int = HARD_FOCK_CAP,
                           n_override: int | None = None,
                           ) -> tuple[PhotonLadder, int]:
    """Solve at adaptive truncation; returns (ladder, n_max used)."""
    if n_override is not None:
        return steady_state(rates, kappa, n_override, tail_tol=tail_tol), n_override
    nhat = max(0.0, (rates.gamma_plus - rates.gamma_minus) / (2.0 * kappa))
    n_max = max(30, math.ceil(nhat + 12.0 * math.sqrt(nhat + 1.0)))
    while True:
        if n_max > hard_cap:
            raise ResourceLimitError(
                f"required truncation {n_max} exceeds the cap {hard_cap}")
        try:
            return steady_state(rates, kappa, n_max, tail_tol=tail_tol), n_max
        except TruncationError:
            n_max *= 2


def evolve(state: PhotonLadder, rates: DressedRates, kappa: float,
           dt: float, t_final: float, *,
           trace_tol: float = _TRACE_EPS) -> PhotonLadder:
    """Propagate the ladder state with fixed-step classical RK4.

    ``dt`` must resolve the fastest rate:
    dt * max(kappa*N, 4*gamma0+gamma_plus+gamma_minus+2*kappa*N,
    g1*sqrt(N)) <= 0.1.  Total population is monitored every step and a
    drift beyond ``trace_tol`` per unit time aborts the run; probability
    reaching the top ladder rung beyond the state's tail tolerance aborts
    with a truncation error.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_max = state.n_max
    G = 4.0 * rates.gamma0 + rates.gamma_plus + rates.gamma_minus
    fastest = max(kappa * n_max, G + 2.0 * kappa * n_max,
                  rates.g1 * math.sqrt(n_max))
    if dt * fastest > 0.1 * (1.0 + 1e-12):
        raise PropagationError(
            f"dt={dt:.3e} too large: dt*fastest_rate={dt * fastest:.3f} > 0.1")
    A = _generator(rates, kappa, n_max, stationary=False)
    x = _pack(state)
    trace0 = x[0::4].sum()
    steps = int(round(t_final / dt))
    sixth = dt / 6.0
    for k in range(steps):
        k1 = A @ x
        k2 = A @ (x + 0.5 * dt * k1)
        k3 = A @ (x + 0.5 * dt * k2)
        k4 = A @ (x + dt * k3)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if x[-4] > state.tail_tol:
            raise TruncationError(
                f"probability {x[-4]:.3e} reached rung {n_max} at "
                f"t={(k + 1) * dt:.3g}", suggested_n=2 * n_max)
        drift = abs(x[0::4].sum() - trace0)
        if drift > trace_tol * ((k + 1) * dt + 1.0):
            raise PropagationError(
                f"trace drift {drift:.3e} at t={(k + 1) * dt:.3g}; "
                "reduce the time step")
    return _unpack(x, state.tail_tol)


def observables(state: PhotonLadder) -> FieldObservables:
    """Mean photon number, second moment, Fano factor, and Mandel Q."""
    ns = np.arange(state.n_max + 1, dtype=np.float64)
    mean_n = float(ns @ state.p1)
    mean_n2 = float((ns * ns) @ state.p1)
    if mean_n < 1e-12:
        return FieldObservables(mean_n, mean_n2, None, None)
    fano = (mean_n2 - mean_n * mean_n) / mean_n
    return FieldObservables(mean_n, mean_n2, fano, fano - 1.0)


def analytic_exponent(rates: DressedRates, kappa: float) -> tuple[float, float]:
    """Shape exponent m and pump parameter alpha of the closed-form
    stationary distribution.

    Valid for positive pump; the closed form degenerates when the
    effective coupling vanishes (ThermalPumpLimitError).
    """
    if rates.gamma_plus <= 0:
        raise ValueError("the closed-form distribution requires gamma_plus > 0")
    if rates.g1 == 0:
        raise ThermalPumpLimitError(
            "effective coupling g1 is zero: the distribution exponent diverges")
    alpha = rates.gamma_plus / (2.0 * kappa)
    gsum = rates.gamma_plus + rates.gamma_minus
    m = 0.5 * (1.0 + rates.gamma_minus / kappa
               + (4.0 * rates.gamma0 + gsum) * gsum / (4.0 * rates.g1 ** 2))
    return m, alpha


def analytic_distribution(rates: DressedRates, kappa: float, n_max: int,
                          ctl: SeriesControl = DEFAULT_SERIES) -> np.ndarray:
    """Closed-form stationary photon-number distribution on 0..n_max.

    Entries are exp(n ln(alpha) + lnGamma(m+1) - lnGamma(n+m+1)) divided
    by the confluent hypergeometric normalizer 1F1(1, m+1; alpha).  The
    normalizer is computed both by Kummer-series summation and by
    log-domain summation of the terms themselves; the two routes must
    agree, and the log-domain route takes over where the series value
    would overflow.
    """
    m, alpha = analytic_exponent(rates, kappa)
    ns = np.arange(n_max + 1)
    lg = np.array([ln_gamma(n + m + 1.0) for n in ns])
    logw = ns * math.log(alpha) + ln_gamma(m + 1.0) - lg
    # normalizer over enough terms to exhaust the distribution's own tail
    n_norm = max(n_max, math.ceil(alpha + 12.0 * math.sqrt(alpha + 1.0)), 30)
    ns_full = np.arange(n_norm + 1)
    logw_full = (ns_full * math.log(alpha) + ln_gamma(m + 1.0)
                 - np.array([ln_gamma(n + m + 1.0) for n in ns_full]))
    log_norm_direct = float(logsumexp(logw_full))
    if alpha <= 690.0:
        log_norm = math.log(kummer_1f1_a1(m + 1.0, alpha, ctl))
        if abs(log_norm - log_norm_direct) > 1e-9:
            raise SimulationError(
                "normalizer cross-check failed: series "
                f"{log_norm:.15g} vs direct {log_norm_direct:.15g}")
    else:
        log_norm = log_norm_direct
    return np.exp(logw - log_norm)


def asymptotic_observables(rates: DressedRates,
                           kappa: float) -> AsymptoticObservables:
    """Large-pump estimates: mean (gamma_plus - gamma_minus)/(2 kappa) and
    Q = (gamma_minus + kappa)/gamma_plus."""
    if rates.gamma_plus <= 0:
        raise ValueError("asymptotic observables require gamma_plus > 0")
    raw = (rates.gamma_plus - rates.gamma_minus) / (2.0 * kappa)
    q = (rates.gamma_minus + kappa) / rates.gamma_plus
    return AsymptoticObservables(mean_n=max(0.0, raw), q=q, mean_n_raw=raw,
                                 above_threshold=raw > 0.0)


def low_pump_observables(alpha: float) -> tuple[float, float]:
    """Low-pump closed forms (mean, Q) = (2a(1-2a), -2a/3).

    Stated validity: kappa below the atomic rate, pump fraction below
    threshold, no spontaneous emission on the lasing transition.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return 2.0 * alpha * (1.0 - 2.0 * alpha), -2.0 * alpha / 3.0
