"""Exception types shared across the toolkit."""


class RoutefixError(ValueError):
    """Base class for all toolkit errors."""


class SolomonFormatError(RoutefixError):
    """Raised when a Solomon-format file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InstanceError(RoutefixError):
    """Raised for structurally invalid instances, variants or parameters."""


class EvaluationError(RoutefixError):
    """Raised when a route plan cannot be evaluated against an instance."""


class DiagnosisError(RoutefixError):
    """Base class for diagnosis failures."""


class UnsupportedConstraintError(DiagnosisError):
    """Raised when a diagnosis strategy meets a constraint family it cannot handle."""


class InfeasibleDiagnosisError(DiagnosisError):
    """Raised when the parameter whitelist rules out every fix for a violated family."""

    def __init__(self, family):
        super().__init__(
            f"whitelist excludes every adjustable parameter of violated family {family}"
        )
        self.family = family
