"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a grid, operator or solver configuration is inconsistent."""


class UsageError(ValueError):
    """Raised when a function is called outside its documented domain."""


class InfeasibleError(ValueError):
    """Raised when a requested object does not exist (e.g. an empty sub-level set)."""
