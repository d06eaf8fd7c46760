"""Exception types raised by the simulator."""


class ConfigError(ValueError):
    """Invalid simulation or topology parameters."""


class InfeasibleError(ConfigError):
    """The (K, N, d) triple violates the IA feasibility condition."""


class AlignmentError(RuntimeError):
    """A zero-forcing combiner cannot be built from the given estimates."""


class NumericalError(RuntimeError):
    """An internal numerical consistency check failed."""
