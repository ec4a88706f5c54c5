"""Exception types shared across the package.

I/O failures are reported with the built-in OSError; everything below covers
bad arguments, malformed files, and structurally inconsistent objects.
"""


class HcrfError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(HcrfError, ValueError):
    """An argument violates an operation's precondition."""


class FormatError(HcrfError, ValueError):
    """A file or byte stream is not in a supported format."""


class StructureError(HcrfError, ValueError):
    """A composite object (pyramid, model file) is internally inconsistent."""
