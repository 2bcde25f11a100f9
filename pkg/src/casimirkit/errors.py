"""Exception types shared across the toolkit."""


class CasimirKitError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(CasimirKitError):
    """An observable or operator returned non-finite values."""


class DivergenceError(CasimirKitError):
    """Time integration produced a non-finite state."""

    def __init__(self, message, last_time):
        super().__init__(f"{message} (last valid t={last_time:.6g})")
        self.last_time = last_time


class NonConvergenceError(CasimirKitError):
    """An iterative solver hit its iteration cap."""


class DegenerateEquilibrium(CasimirKitError):
    """Newton reached a point whose Hessian is singular.

    The point and Hessian spectrum are kept so callers can inspect the
    bifurcation instead of having it smoothed over.
    """

    def __init__(self, message, point, hessian_eigenvalues):
        super().__init__(message)
        self.point = point
        self.hessian_eigenvalues = hessian_eigenvalues


class DomainError(CasimirKitError):
    """Input parameters are outside the admissible domain."""


class ResonantMultiplierError(DomainError):
    """The Beltrami multiplier sits on the point spectrum of curl."""

    def __init__(self, mu, nearest):
        super().__init__(
            f"multiplier mu={mu:.12g} is resonant: sin(mu*a)~0, "
            f"nearest curl eigenvalue {nearest:.12g}"
        )
        self.mu = mu
        self.nearest = nearest


class NoResonance(CasimirKitError):
    """k.B has no sign change inside the slab."""


class PlacementError(CasimirKitError):
    """A resonant surface coincides with a grid node."""


class NoBranchError(CasimirKitError):
    """The inhomogeneous Beltrami problem is inconsistent at the eigenvalue."""


class ConditioningError(CasimirKitError):
    """A linear solve was too ill-conditioned to trust."""


class ConfigError(CasimirKitError):
    """Scenario configuration failed validation."""
