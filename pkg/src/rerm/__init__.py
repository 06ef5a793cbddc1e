"""Regularized least squares over a catalog of penalties, with mean-width
calibration of the regularization parameter and closed-form error rates."""

from .errors import CapabilityError, ConfigError, MomentAssumptionError, ShapeMismatchError
from .model import (
    DesignSpec,
    NoiseSpec,
    ProblemInstance,
    Shape,
    TargetSpec,
    generate_dataset,
    population_error,
)
from .regularizers import RegularizerDescriptor, dual_norm, lmo, prox, psi_value

__version__ = "0.1.0"
