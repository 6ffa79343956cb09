"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the interval on which a quantity is defined."""


class ProfileError(ValueError):
    """A medium profile violates 0 < a < pi, alpha > 0 or a(1 + alpha) > pi*alpha."""


class EigenvalueSearchError(RuntimeError):
    """Root bracketing of the characteristic function failed."""


class SingularSystemError(RuntimeError):
    """A discretized main-equation slice is singular to working precision."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class NormingConstantWarning(RuntimeWarning):
    """Norming constant requested at a point that is not an eigenvalue."""
