"""Exception hierarchy shared by the library and the CLI."""
from __future__ import annotations


class PottsError(Exception):
    """Base class for every error raised by potts_ees."""


class ModelError(PottsError, ValueError):
    """Invalid model parameters or states (N, q, beta, counts, colors)."""


class LatticeSizeError(PottsError, ValueError):
    pass


class EnergyRangeError(PottsError, ValueError):
    pass


class MaximaSearchError(PottsError, RuntimeError):
    """Root finding for stationary points of f did not converge."""


class NonReversibleKernelError(PottsError, ValueError):
    pass


class EigenSolverError(PottsError, RuntimeError):
    pass


class BallTooSmallError(PottsError, ValueError):
    """The inner ball holds no lattice class for this N and radius."""


class PremiseError(PottsError, RuntimeError):
    """The jump-move-jump path check failed; N is too small for (d, epsilon, delta)."""


class FitError(PottsError, ValueError):
    pass


class ConfigError(PottsError, ValueError):
    pass


class InvariantError(PottsError, AssertionError):
    """A named invariant was violated."""

    def __init__(self, invariant: str, message: str) -> None:
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
        self.message = message
