"""Exception hierarchy shared by every module."""


class TpaceError(Exception):
    """Base class for all errors raised by this package."""


class DataError(TpaceError, ValueError):
    """Input data violates a schema or record invariant."""


class DegenerateDataError(DataError):
    """Data are structurally valid but carry no usable information (e.g. zero events)."""


class ParameterError(TpaceError, ValueError):
    """An argument lies outside its admissible range."""


class ModelError(TpaceError):
    """A fitted imputation model is unusable or could not be fitted."""


class NumericalError(TpaceError, RuntimeError):
    """Iteration failed to converge, sampling exhausted its cap, or a search found no crossing."""
