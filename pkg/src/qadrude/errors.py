class ConfigurationError(ValueError):
    """Raised when a box, grid, or run configuration is inconsistent."""


class SpectrumError(ValueError):
    """Raised when a spectrum cannot support the requested analysis."""
