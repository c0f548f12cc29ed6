"""Exception taxonomy. Every error carries a short machine-readable
``category`` used by the CLI for exit reporting."""


class HomsyncError(Exception):
    category = "error"


class DomainError(HomsyncError):
    """Input outside the validated physical domain (names the parameter)."""

    category = "domain"


class ValidationError(HomsyncError):
    """Invalid configuration or data structure.

    ``problems`` collects every violation found, not just the first.
    """

    category = "validation"

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConfigurationError(HomsyncError):
    category = "configuration"


class ResolutionError(HomsyncError):
    """Grid too coarse for the requested transform (Nyquist check)."""

    category = "resolution"


class NumericError(HomsyncError):
    category = "numeric"


class FitError(HomsyncError):
    """Nonlinear fit did not converge; carries the residual norm."""

    category = "fit"

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class FitRejectedError(HomsyncError):
    """Fit preconditions not met (peak missing, too weak, or at the edge)."""

    category = "fit-rejected"


class ResourceError(HomsyncError):
    category = "resource"
