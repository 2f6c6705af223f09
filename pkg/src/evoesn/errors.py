"""Exception types shared across the package."""


class EvoEsnError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(EvoEsnError):
    """Invalid parameter combination or split layout."""


class NumericError(EvoEsnError):
    """Non-finite values produced during integration or simulation."""


class ParseError(EvoEsnError):
    """Malformed input data file."""


class LayoutError(EvoEsnError):
    """Weight matrix violates the fixed sparsity layout."""


class InitializationError(EvoEsnError):
    """Reservoir cannot be initialized as requested."""


class CheckpointError(EvoEsnError):
    """Checkpoint or model container cannot be loaded."""
