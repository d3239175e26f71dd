"""Exception types shared across the package."""


class SemnavError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SemnavError, ValueError):
    """A scalar argument is outside its documented domain."""


class ShapeError(SemnavError, ValueError):
    """Array dimensions or grid geometries do not line up."""


class ConfigError(SemnavError, ValueError):
    """An unsupported option or inconsistent configuration value."""


class DegenerateDataError(SemnavError, ValueError):
    """A dataset cannot support the requested fit (e.g. one class only)."""


class LoadError(SemnavError, ValueError):
    """A file failed to parse or violates a format invariant."""


class ProtocolError(SemnavError, ValueError):
    """A wire message is malformed or arrived in an illegal session state."""
