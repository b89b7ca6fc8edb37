"""Dressed-state parameterization of the driven atom in a structured reservoir.

Converts bare physical parameters (decay rates, atom-cavity coupling, drive)
into the dressed picture: the mixing angle, the generalized Rabi splitting,
the three band-gap-filtered decay rates, and the effective coupling of the
cavity to the lasing transition.  All functions are pure; every returned
object is an immutable value.
"""

from dataclasses import dataclass, field
from typing import NamedTuple
import math

import numpy as np

from .errors import DegenerateDriveError

__all__ = [
    "GapFlags", "NO_GAP", "FULL_GAP", "SystemParams", "DressedRates",
    "MixAngle", "mix_angle", "dressed_rates", "pump_sweep_grid",
]


@dataclass(frozen=True)
class GapFlags:
    """Unit-step mode-density occupancies at the three dressed emission lines.

    A flag of 0 means the line falls inside the photonic band gap and its
    spontaneous-emission channel is switched off; 1 means free-space-like
    emission.  The band edge is modeled as an ideal step.
    """

    u_l: int = 1       # central line (at the drive frequency)
    u_minus: int = 1   # lower sideband: the lasing transition
    u_plus: int = 1    # upper sideband: the incoherent pump transition

    def __post_init__(self):
        for name in ("u_l", "u_minus", "u_plus"):
            v = getattr(self, name)
            if v not in (0, 1):
                raise ValueError(f"gap flag {name} must be 0 or 1, got {v!r}")


NO_GAP = GapFlags(1, 1, 1)
FULL_GAP = GapFlags(1, 0, 1)   # emission on the lasing transition suppressed


@dataclass(frozen=True)
class SystemParams:
    """Bare physical inputs, all rates in units of the atomic decay rate.

    The drive is given either directly as the dimensionless pump parameter
    ``cos4phi`` or as the pair ``(epsilon, delta_a)`` of resonant Rabi
    frequency and atom-drive detuning; exactly one form must be supplied.
    """

    kappa: float                      # cavity damping rate
    g: float                          # bare atom-cavity coupling
    gamma: float = 1.0                # atomic spontaneous emission rate
    cos4phi: float | None = None      # direct pump parameter in [0, 1]
    epsilon: float | None = None      # resonant Rabi frequency of the drive
    delta_a: float | None = None      # atom-drive detuning
    gap: GapFlags = field(default_factory=GapFlags)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")
        direct = self.cos4phi is not None
        coherent = self.epsilon is not None or self.delta_a is not None
        if direct == coherent:
            raise ValueError(
                "specify the drive either as cos4phi or as (epsilon, delta_a)")
        if coherent and (self.epsilon is None or self.delta_a is None):
            raise ValueError("coherent drive needs both epsilon and delta_a")
        if direct and not 0.0 <= self.cos4phi <= 1.0:
            raise ValueError("cos4phi must lie in [0, 1]")


class MixAngle(NamedTuple):
    cos2phi: float   # squared cosine of the mixing angle
    rabi: float      # generalized Rabi frequency (dressed-doublet splitting)


@dataclass(frozen=True)
class DressedRates:
    """Decay rates between dressed states, filtered by the gap flags.

    ``gamma0`` acts at the central line, ``gamma_plus`` is the incoherent
    pump of the lasing transition, ``gamma_minus`` the spontaneous emission
    on it.  ``g1`` is the effective coupling of the cavity mode to the
    lasing transition.  ``rabi`` is None when the drive was given directly
    as a pump fraction.
    """

    cos2phi: float
    gamma0: float
    gamma_plus: float
    gamma_minus: float
    g1: float
    rabi: float | None = None


def mix_angle(epsilon: float, delta_a: float) -> MixAngle:
    """Mixing angle and Rabi splitting of the driven two-level atom.

    Parameters
    ----------
    epsilon : float
        Resonant Rabi frequency of the coherent drive; must be positive.
    delta_a : float
        Detuning of the atomic transition from the drive.

    Returns
    -------
    MixAngle
        ``cos2phi = (1 + delta_a/rabi)/2`` and
        ``rabi = sqrt(4 epsilon^2 + delta_a^2)``.
    """
    if epsilon <= 0:
        raise DegenerateDriveError(
            f"drive amplitude must be positive (epsilon={epsilon})")
    rabi = math.hypot(2.0 * epsilon, delta_a)
    cos2phi = 0.5 * (1.0 + delta_a / rabi)
    # guard roundoff at extreme detunings
    cos2phi = min(1.0, max(0.0, cos2phi))
    return MixAngle(cos2phi, rabi)


def dressed_rates(params: SystemParams) -> DressedRates:
    """Dressed-state decay rates and effective coupling for given inputs."""
    if params.cos4phi is not None:
        c2 = math.sqrt(params.cos4phi)
        rabi = None
    else:
        c2, rabi = mix_angle(params.epsilon, params.delta_a)
    s2 = 1.0 - c2
    sin2_2phi = 4.0 * c2 * s2
    u = params.gap
    return DressedRates(
        cos2phi=c2,
        gamma0=params.gamma * sin2_2phi * u.u_l,
        gamma_plus=params.gamma * c2 * c2 * u.u_plus,
        gamma_minus=params.gamma * s2 * s2 * u.u_minus,
        g1=params.g * s2,
        rabi=rabi,
    )


def pump_sweep_grid(n_points: int, rng: tuple[float, float], *,
                    kappa: float, g: float,
                    gamma: float = 1.0) -> list[SystemParams]:
    """Uniform pump-parameter grid, each point paired with both gap settings.

    Returns ``2 * n_points`` parameter sets ordered by grid index; for each
    grid value the configuration with emission on the lasing transition
    (``NO_GAP``) comes first, the one without (``FULL_GAP``) second.
    """
    lo, hi = rng
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"pump range must satisfy 0 <= lo < hi <= 1, got {rng}")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    out = []
    for c4 in np.linspace(lo, hi, n_points):
        for gap in (NO_GAP, FULL_GAP):
            out.append(SystemParams(kappa=kappa, g=g, gamma=gamma,
                                    cos4phi=float(c4), gap=gap))
    return out
