"""Exception types shared across the package."""


class UwieError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(UwieError):
    """Array shapes or channel counts do not satisfy an operation's contract."""


class ParameterError(UwieError):
    """A scalar parameter or configuration value is out of its valid range."""


class InputError(UwieError):
    """A batch input set is unusable (empty, unpairable, unreadable)."""


class WeightAuditError(UwieError):
    """A weight container fails validation against the architecture graph."""
