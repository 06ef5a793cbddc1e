"""Penalty catalog: values, dual norms, proximal maps, LMOs and mean-widths."""

from .catalog import (
    GROTHENDIECK_KG,
    Capabilities,
    RegularizerDescriptor,
    load_atoms_csv,
    load_vector_csv,
)
from .norms import batch_support, cut_norm, dual_norm, lmo, psi_value, support
from .prox import pav_nonincreasing, project_ball, project_lq_ball, prox, soft_threshold
from .widths import WidthEstimate, estimate_mean_width_mc, mean_width_formula, slope_weights_bhq

__all__ = [
    "GROTHENDIECK_KG",
    "Capabilities",
    "RegularizerDescriptor",
    "WidthEstimate",
    "batch_support",
    "cut_norm",
    "dual_norm",
    "estimate_mean_width_mc",
    "lmo",
    "load_atoms_csv",
    "load_vector_csv",
    "mean_width_formula",
    "pav_nonincreasing",
    "project_ball",
    "project_lq_ball",
    "prox",
    "psi_value",
    "slope_weights_bhq",
    "soft_threshold",
    "support",
]
