"""Exception hierarchy shared across the package."""


class ScalarQVEError(Exception):
    """Base class for all package errors."""


class ConfigError(ScalarQVEError, ValueError):
    """Invalid field, grid, solver or run configuration."""


class EnvelopeOverflowError(ScalarQVEError, OverflowError):
    """The continued Gaussian envelope overflows at the requested complex time."""


class ToleranceError(ScalarQVEError):
    """An adaptive scheme could not reach its tolerance within its budget."""


class IntegrationError(ScalarQVEError):
    """Failure of a per-mode time integration.

    Carries the momentum and the time at which the solver gave up.
    """

    def __init__(self, message, k=None, t=None, formulation=None):
        super().__init__(message)
        self.k = k
        self.t = t
        self.formulation = formulation

    def __str__(self):
        base = super().__str__()
        extra = []
        if self.formulation is not None:
            extra.append(f"formulation={self.formulation}")
        if self.k is not None:
            extra.append("k=(" + ", ".join(f"{v:.6g}" for v in self.k) + ")")
        if self.t is not None:
            extra.append(f"t={self.t:.6g}")
        return f"{base} [{', '.join(extra)}]" if extra else base


class StepBudgetExceeded(IntegrationError):
    pass


class StepSizeUnderflow(IntegrationError):
    pass


class SweepError(ScalarQVEError):
    """Aggregate failure of a grid sweep in strict mode."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures


class GridError(ScalarQVEError, ValueError):
    """Grid is unsuitable for the requested analysis."""


class QuadratureError(ScalarQVEError):
    """Adaptive quadrature did not converge."""


class FlatProfileError(ScalarQVEError):
    """No azimuthal Fourier mode rises above the noise floor."""


class NoRootsFound(ScalarQVEError):
    pass


class SeedBudgetExhausted(ScalarQVEError):
    pass
