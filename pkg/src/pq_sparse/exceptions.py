"""
Error hierarchy for the PQ sparse pipeline.

Everything raised on purpose by the package derives from PQSparseError so the
command-line front end can report it and exit non-zero.
"""

from typing import Optional


class PQSparseError(Exception):
    """Base class for all pipeline errors"""


class ConfigurationError(PQSparseError, ValueError):
    """Invalid configuration document, grid or command-line value"""


class ValidationError(PQSparseError, ValueError):
    """A value is outside its allowed range or inputs do not line up"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(PQSparseError, ArithmeticError):
    """Non-finite iterate, failed step-size estimate or zero-power input"""

    def __init__(self, message: str, sweep: Optional[int] = None):
        self.sweep = sweep
        if sweep is not None:
            message = f"{message} (sweep {sweep})"
        super().__init__(message)


class DegenerateInputError(PQSparseError, ValueError):
    """Input with no spread where a spread is required (constant vector or feature)"""


class TrainingError(PQSparseError):
    """A classifier could not be trained"""

    def __init__(self, message: str, context: Optional[dict] = None):
        self.context = context or {}
        if self.context:
            details = ", ".join(f"{k}={v}" for k, v in self.context.items())
            message = f"{message} [{details}]"
        super().__init__(message)


class ExperimentError(PQSparseError):
    """Component failure inside an experiment, tagged with where it happened"""

    def __init__(self, message: str, repetition: Optional[int] = None, classifier: Optional[str] = None):
        self.repetition = repetition
        self.classifier = classifier
        super().__init__(f"repetition={repetition} classifier={classifier}: {message}")


class DatasetError(PQSparseError):
    """Unreadable or inconsistent dataset / coefficient files"""
