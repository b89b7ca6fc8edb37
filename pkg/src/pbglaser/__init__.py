"""Numerical simulator for a dressed two-level atom lasing into a microcavity
embedded in a photonic band-gap material.

The library computes stationary photon statistics (mean photon number,
Fano factor, Mandel Q), threshold versus thresholdless behavior as the
band gap switches spontaneous emission channels on and off, closed-form
and asymptotic benchmarks, and the stationary output spectrum via the
quantum regression theorem.
"""

from .dressed import (
    FULL_GAP, NO_GAP, DressedRates, GapFlags, MixAngle, SystemParams,
    dressed_rates, mix_angle, pump_sweep_grid,
)
from .errors import (
    DegenerateDriveError, InsufficientDecayError, IterationLimitError,
    PropagationError, ResourceLimitError, SimulationError,
    SingularSystemError, ThermalPumpLimitError, TruncationError,
)
from .ladder import (
    DEFAULT_TAIL_TOL, HARD_FOCK_CAP, AsymptoticObservables, FieldObservables,
    PhotonLadder, analytic_distribution, analytic_exponent,
    asymptotic_observables, choose_truncation, evolve, low_pump_observables,
    observables, steady_state,
)
from .liouville import (
    EffectiveLiouvillian, FockAtomSpace, SpectrumResult, auto_horizon,
    build_liouvillian, correlation, default_tau_step, doublet_omega_grid,
    dressed_populations, ladder_projections, narrow_omega_grid,
    photon_distribution, propagate_density, spectral_weight, spectrum,
    stationary_residual, steady_state_density,
)
from .specfun import SeriesControl, kummer_1f1_a1, ln_gamma

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # dressed-state parameterization
    "GapFlags", "NO_GAP", "FULL_GAP", "SystemParams", "DressedRates",
    "MixAngle", "mix_angle", "dressed_rates", "pump_sweep_grid",
    # special functions
    "SeriesControl", "ln_gamma", "kummer_1f1_a1",
    # ladder solver
    "PhotonLadder", "FieldObservables", "AsymptoticObservables",
    "steady_state", "evolve", "observables", "analytic_exponent",
    "analytic_distribution", "asymptotic_observables",
    "low_pump_observables", "choose_truncation", "DEFAULT_TAIL_TOL",
    "HARD_FOCK_CAP",
    # master-equation engine
    "FockAtomSpace", "EffectiveLiouvillian", "SpectrumResult",
    "build_liouvillian", "steady_state_density", "stationary_residual",
    "dressed_populations", "photon_distribution", "ladder_projections",
    "propagate_density", "correlation", "spectrum", "doublet_omega_grid",
    "narrow_omega_grid", "auto_horizon", "default_tau_step",
    "spectral_weight",
    # errors
    "SimulationError", "DegenerateDriveError", "IterationLimitError",
    "TruncationError", "SingularSystemError", "ResourceLimitError",
    "PropagationError", "InsufficientDecayError", "ThermalPumpLimitError",
]
