"""Exception hierarchy shared by the library and the CLI."""


class BanditError(Exception):
    """Base class for every error raised by this package."""


class InputError(BanditError, ValueError):
    """An argument or data set is outside its documented range."""


class CapacityError(BanditError):
    """Exact enumeration would exceed the configured size cap."""


class SamplingError(BanditError, RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


class NumericError(BanditError, ArithmeticError):
    """A quadrature or root search failed to converge."""
