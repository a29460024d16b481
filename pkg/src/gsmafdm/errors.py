"""Exception types raised by the library."""


class GsmAfdmError(Exception):
    """Base class for all library errors."""


class ConfigurationError(GsmAfdmError, ValueError):
    """Invalid system / waveform / run configuration."""


class InputError(GsmAfdmError, ValueError):
    """Malformed operation input (wrong length, bad values)."""


class DemapError(GsmAfdmError, ValueError):
    """A vector cannot be inverted to bits (illegal support or symbols)."""


class CapabilityError(GsmAfdmError, RuntimeError):
    """Requested computation is too large for the exact code path."""


class NumericError(GsmAfdmError, ArithmeticError):
    """A numerical routine received or produced non-finite values."""
