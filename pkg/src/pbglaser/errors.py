"""Exception types shared across the solver modules."""


class SimulationError(Exception):
    """Base class for all solver-level failures."""


class DegenerateDriveError(SimulationError):
    """Raised when the coherent drive amplitude is zero and the mixing angle
    is undefined."""


class IterationLimitError(SimulationError):
    """A series or iteration failed to converge within its term budget.

    Carries the partial result computed so far in ``partial``.
    """

    def __init__(self, message, partial=None, terms=None):
        super().__init__(message)
        self.partial = partial
        self.terms = terms


class TruncationError(SimulationError):
    """The Fock-space truncation is too small for the requested state.

    ``suggested_n`` holds a larger truncation likely to be adequate.
    """

    def __init__(self, message, suggested_n=None):
        super().__init__(message)
        self.suggested_n = suggested_n


class SingularSystemError(SimulationError):
    """The stationary linear system has no unique normalized solution
    (degenerate parameters) or the null-space iteration failed."""


class ResourceLimitError(SimulationError):
    """A requested problem size exceeds the configured hard cap."""


class PropagationError(SimulationError):
    """Fixed-step time integration became inaccurate or unstable
    (trace drift or norm growth detected)."""


class InsufficientDecayError(SimulationError):
    """The two-time correlation has not decayed at the end of the horizon,
    so its Fourier transform would be biased."""


class ThermalPumpLimitError(SimulationError):
    """The closed-form photon distribution is degenerate because the
    effective cavity coupling vanishes (thermal-pump limit)."""
