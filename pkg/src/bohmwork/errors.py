"""Exception hierarchy.

Validation problems (bad input, bad configuration) derive from
:class:`ValidationError`; failures that only show up while integrating
derive from :class:`NumericalError`.  The CLI maps these to exit codes 2
and 3 respectively.
"""


class BohmworkError(Exception):
    pass


class ValidationError(BohmworkError, ValueError):
    pass


class NumericalError(BohmworkError, RuntimeError):
    pass


class GridError(ValidationError):
    pass


class NormalizationError(ValidationError):
    pass


class DegenerateStateError(ValidationError):
    pass


class StepSizeError(ValidationError):
    pass


class PlanError(ValidationError):
    pass


class DomainCoverageError(ValidationError):
    pass


class AllocationError(ValidationError):
    pass


class TruncationError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class OutOfDomainError(NumericalError):
    pass


class NodeCollisionError(NumericalError):
    pass


class EnsembleError(NumericalError):
    """Raised when more trajectories fail than the failure budget allows."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or {}
