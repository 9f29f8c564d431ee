class HueMefError(Exception):
    """Base class for all errors raised by this package."""


class StackError(HueMefError, ValueError):
    """Invalid exposure stack or mismatched image dimensions."""


class CalibrationError(HueMefError):
    """The camera response could not be estimated from the stack."""


class ImageFormatError(HueMefError):
    """Unreadable, unsupported or malformed image file."""
