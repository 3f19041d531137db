"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration is internally inconsistent or out of range."""


class FieldFormatError(ValueError):
    """A field file violates the CSV lattice format."""


class MemoryCapError(MemoryError):
    """Constructing a dense structure would exceed the configured memory cap."""
