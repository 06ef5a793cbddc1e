"""Exception types raised across the package."""


class ShapeMismatchError(ValueError):
    """Vector or matrix dimensions do not agree."""


class CapabilityError(ValueError):
    """The regularizer does not support the requested operation."""


class MomentAssumptionError(ValueError):
    """A noise law would violate the assumed L_q moment."""


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""
