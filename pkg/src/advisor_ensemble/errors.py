"""Exception hierarchy shared across the package."""


class AdvisorEnsembleError(Exception):
    """Base class for all package errors."""


class SchemaError(AdvisorEnsembleError):
    """Column names, shapes or date alignment do not match."""


class AlignmentError(AdvisorEnsembleError):
    """Calendars could not be aligned (e.g. empty intersection)."""


class DataError(AdvisorEnsembleError):
    """Input values are invalid (non-finite, non-positive prices, ...)."""


class InsufficientDataError(AdvisorEnsembleError):
    """Too few rows for the requested operation."""


class DegenerateTargetError(AdvisorEnsembleError):
    """Target vector has a single class / zero variance."""


class ClassBalanceError(DegenerateTargetError):
    """One of the two classes is missing."""


class SpecError(AdvisorEnsembleError):
    """Invalid parameters, ranges or search specifications."""


class ParameterError(SpecError):
    """Online-update parameters outside their domain."""


class ConvergenceError(AdvisorEnsembleError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class TrainingError(AdvisorEnsembleError):
    """Training diverged (e.g. loss became NaN)."""


class PipelineError(AdvisorEnsembleError):
    """A pipeline stage failed; carries the stage / unit that failed."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class EvaluationError(AdvisorEnsembleError):
    """Nothing left to evaluate (e.g. all days fall in the burn-in)."""


class IntegrityError(AdvisorEnsembleError):
    """A result bundle is missing files or fails its checksums."""


class LeakageError(AdvisorEnsembleError):
    """A meta-feature was produced by a model that had seen its row."""
