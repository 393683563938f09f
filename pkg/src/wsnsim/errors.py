"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid network, distribution or experiment parameters."""


class IntegrityError(RuntimeError):
    """A storage or decoding invariant was violated.

    This always indicates a bug in the dissemination or coding logic, never a
    normal outcome of a random trial.
    """


class ScalingError(ValueError):
    """A scaling sweep does not have enough distinct points to regress on."""
