"""Exception hierarchy shared by all partfuse modules."""


class PartfuseError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PartfuseError):
    """Domain-level violation: bad taxonomy, inconsistent dimensions,
    out-of-range parameters, unknown ids or strategy names."""


class FormatError(PartfuseError):
    """A file exists but its bytes do not form a valid container
    (bad magic, truncated payload, unsupported header fields)."""
