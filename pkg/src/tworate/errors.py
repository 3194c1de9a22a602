"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions, invalid specs, or malformed config input."""


class DegenerateKernelError(ValueError):
    """Kernel second moment is numerically zero; no bandwidth constant exists."""


class BandwidthTooSmallError(ValueError):
    """Local fit is singular at the requested bandwidth; enlarge it."""


class IncompleteWindowError(ValueError):
    """A filter update received fewer (or non-finite) samples than a window holds."""


class DivergenceError(RuntimeError):
    """State integration produced a non-finite value."""


class DataError(ValueError):
    """Experiment input data violates a precondition (e.g. nonpositive errors)."""


class ExperimentInfeasibleError(RuntimeError):
    """No configuration in the requested schedule is runnable."""
