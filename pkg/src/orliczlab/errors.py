"""Exception types shared across the package."""


class NormInfiniteError(ArithmeticError):
    """A Luxembourg or Orlicz norm has no finite value on the given data."""


class BracketExhaustedError(RuntimeError):
    """A bisection bracket could not be established on the search range."""


class SandwichViolationError(RuntimeError):
    """Computed dual norm fell outside [luxembourg, 2*luxembourg]."""


class NotPSDError(ValueError):
    """A matrix field has an eigenvalue below the PSD tolerance."""


class StencilError(RuntimeError):
    """Masked region is too thin for the difference stencil."""


class NonCoerciveError(RuntimeError):
    """Discrete system is numerically singular on the unknowns.

    Carries the smallest Ritz value observed, when available.
    """

    def __init__(self, message, smallest_ritz=None):
        super().__init__(message)
        self.smallest_ritz = smallest_ritz


class DegenerateInequalityError(RuntimeError):
    """The discrete 2-2 inequality failed (smallest eigenvalue at tolerance)."""


class InequalityFailsError(RuntimeError):
    """The gradient side of an inequality vanished while the norm side did not."""


class InconsistencyError(RuntimeError):
    """Two discretizations of the same quantity disagree beyond tolerance."""


class SingularPointError(ValueError):
    """Evaluation requested at a singular point of a closed-form field."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
