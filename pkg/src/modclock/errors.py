class ModclockError(Exception):
    """Base class for all library errors."""


class DimensionError(ModclockError, ValueError):
    """Dimension mismatch or allocation above the configured maximum."""


class LayoutError(ModclockError, ValueError):
    """Unknown factor label or inconsistent tensor layout."""


class NotHermitianError(ModclockError, ValueError):
    pass


class PreconditionError(ModclockError, ValueError):
    """Inputs violate a documented precondition (commensurability, support, ...)."""


class ConfigError(ModclockError, ValueError):
    pass
