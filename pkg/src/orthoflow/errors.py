"""Exception types shared across the solver modules."""


class DegenerateDeterminantError(ValueError):
    """A projection that needs a determinant sign got a singular matrix."""


class UnderResolvedError(ValueError):
    """A winding measurement hit an angle step >= pi/2 between samples."""


class ConfigurationError(ValueError):
    """A run/band/scenario configuration is inconsistent or out of range."""


class SnapshotFormatError(ValueError):
    """A snapshot file is malformed or fails its integrity checks."""
