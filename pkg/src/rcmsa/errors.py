"""Exception types raised across the package."""


class RCMError(ValueError):
    """Base class for all domain errors."""


class InvalidParameterError(RCMError):
    """A constructor or operation received parameters outside its domain."""


class UndefinedQuantityError(RCMError):
    """A requested quantity does not exist for the given inputs (division by zero, empty support...)."""


class DefectiveIndicesError(RCMError):
    """Sensitivity indices of a non-orthogonal measure were used as a probability vector."""


class KernelSamplingError(RCMError):
    """A kernel carrying only moments was asked to produce draws."""
