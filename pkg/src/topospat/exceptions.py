"""Exception hierarchy. Every error raised by this package derives from TopospatError."""


class TopospatError(Exception):
    """Base class for all errors raised by topospat."""


class ParameterError(TopospatError, ValueError):
    """An argument value is outside its allowed range or combination."""


class ValidationError(TopospatError, ValueError):
    """Data violates an invariant (NaN values, negative counts, duplicate names, ...)."""


class DimensionError(ValidationError):
    """Array lengths or shapes do not match."""


class DomainMismatchError(ParameterError):
    """Functional summaries defined on different domains cannot be combined."""


class StateError(TopospatError):
    """Operation applied to data in the wrong state (e.g. transforming twice)."""


class LoadError(TopospatError):
    """A file could not be loaded into a consistent dataset."""


class ParseError(LoadError):
    """A cell or row of a delimited file could not be parsed; the message carries its location."""


class GeometryError(TopospatError):
    """Coordinates are degenerate or do not match the requested graph geometry."""


class GeometryWarning(UserWarning):
    """Coordinates look inconsistent with the requested grid geometry but a graph was still built."""


class DegenerateDataError(TopospatError):
    """Data admits no meaningful answer (constant feature, single-class labels, empty result)."""
