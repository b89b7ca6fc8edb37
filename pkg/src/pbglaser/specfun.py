"""Special functions for the closed-form photon distribution.

Only the slices actually needed are provided: the log-Gamma function for
positive real arguments and the Kummer confluent hypergeometric function
with unit numerator parameter, 1F1(1, b; z), for b > 0 and z >= 0.
"""

from dataclasses import dataclass
import math

from .errors import IterationLimitError

__all__ = ["SeriesControl", "ln_gamma", "kummer_1f1_a1"]


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for series summation."""

    rel_tol: float = 1e-14   # next-term / partial-sum cutoff
    max_terms: int = 20000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_SERIES = SeriesControl()


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if x <= 0:
        raise ValueError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def kummer_1f1_a1(b: float, z: float,
                  ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """Confluent hypergeometric function 1F1(1, b; z) for b > 0, z >= 0.

    Sums the Taylor series sum_k z^k / (b)_k, where (b)_k is the rising
    factorial.  Terms are positive and eventually decay with ratio
    z / (b + k); summation stops when the next term falls below
    ``ctl.rel_tol`` of the running sum.  The final sum is re-accumulated
    with exact (fsum) summation.

    Raises
    ------
    IterationLimitError
        If the stopping rule is not met within ``ctl.max_terms`` terms;
        the partial sum is attached to the exception.
    """
    if b <= 0:
        raise ValueError(f"kummer_1f1_a1 requires b > 0, got b={b}")
    if z < 0:
        raise ValueError(f"kummer_1f1_a1 requires z >= 0, got z={z}")
    if z == 0.0:
        return 1.0
    terms = [1.0]
    term = 1.0
    partial = 1.0
    for k in range(ctl.max_terms):
        term *= z / (b + k)
        if not math.isfinite(term):
            raise IterationLimitError(
                f"series term overflowed at k={k + 1} (b={b}, z={z})",
                partial=partial, terms=k + 1)
        terms.append(term)
        partial += term
        if term < ctl.rel_tol * partial:
            return math.fsum(terms)
    raise IterationLimitError(
        f"no convergence within {ctl.max_terms} terms (b={b}, z={z})",
        partial=math.fsum(terms), terms=ctl.max_terms)
