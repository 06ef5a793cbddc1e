"""Gaussian mean-width of penalty unit balls: closed forms and Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from ..errors import ConfigError, ShapeMismatchError
from ..model import Shape
from .catalog import RegularizerDescriptor
from .norms import batch_support

CONVENTION = "constants normalized to 1"
MC_CHUNK = 2048


@dataclass(frozen=True)
class WidthEstimate:
    """Mean-width value with its provenance.

    ``method`` is ``"closed-form"`` or ``"monte-carlo"``; Monte Carlo values
    carry ``samples`` and ``stderr``.
    """

    value: float
    method: str
    formula: str = ""
    samples: Optional[int] = None
    stderr: Optional[float] = None
    convention: str = CONVENTION

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _D(reg: RegularizerDescriptor, shape: Shape) -> int:
    D = shape.D
    reg.check_dim(D)
    return D


def mean_width_formula(reg: RegularizerDescriptor, shape: Shape, mc_samples: int = 4000, seed: int = 0) -> WidthEstimate:
    """Closed-form width of {Psi <= 1} with absolute constants set to 1.

    Atomic gauges have no formula and fall back to Monte Carlo.

    Examples
    --------
    >>> from rerm.regularizers import RegularizerDescriptor
    >>> round(mean_width_formula(RegularizerDescriptor.max_norm(4, 4), Shape.matrix(4, 4)).value, 2)
    11.31
    """
    D = _D(reg, shape)
    k, p = reg.kind, reg.params
    if k == "atomic":
        return estimate_mean_width_mc(reg, shape, mc_samples, seed)
    if k == "schatten":
        m, T, pp = p["shape"].m, p["shape"].T, p["p"]
        return WidthEstimate(min(m, T) ** (1 - 1 / pp) * np.sqrt(m + T), "closed-form", "min(m,T)^(1-1/p)*sqrt(m+T)")
    if k == "max-norm":
        m, T = p["shape"].m, p["shape"].T
        return WidthEstimate(float(np.sqrt(m * T * (m + T))), "closed-form", "sqrt(mT(m+T))")
    if k == "mmp-cone":
        if p["cone"] == "nonneg-orthant":
            M, n_ext = 1.0, D
        else:
            M = max(1.0 / np.sqrt(len(g)) for g in p["groups"])
            n_ext = len(p["groups"])
        return WidthEstimate(1.0 + M * np.sqrt(2 * np.log(n_ext)), "closed-form", "1+M*sqrt(2log|Ex|)")
    if D < 2:
        raise ConfigError("width formulas with log d need d >= 2")
    logd = np.log(D)
    if k == "l1" or (k == "lp" and p["p"] <= 1 + 1 / logd):
        return WidthEstimate(float(np.sqrt(np.log(np.e * D))), "closed-form", "sqrt(log(ed))")
    if k == "lp":
        pp = p["p"]
        if np.isinf(pp):
            return WidthEstimate(float(D), "closed-form", "d")
        val = np.sqrt(pp / (pp - 1)) * D ** ((pp - 1) / pp)
        return WidthEstimate(float(val), "closed-form", "sqrt(p/(p-1))*d^((p-1)/p)")
    if k == "weak-lp":
        pp = p["p"]
        if pp == 1:
            return WidthEstimate(float(logd**1.5), "closed-form", "(log d)^(3/2)")
        return WidthEstimate(float(np.sqrt(logd) / abs(pp - 1)), "closed-form", "sqrt(log d)/|p-1|")
    if k == "slope":
        j = np.arange(1.0, D + 1)
        val = np.max(np.sqrt(np.log(np.e * D / j)) / p["weights"])
        return WidthEstimate(float(val), "closed-form", "max_j sqrt(log(ed/j))/lambda_j")
    raise ConfigError(f"no width formula for {k}")


def estimate_mean_width_mc(
    reg: RegularizerDescriptor,
    shape: Shape,
    samples: int,
    seed: int,
    covariance: Optional[np.ndarray] = None,
) -> WidthEstimate:
    """Monte Carlo estimate of E sup_{Psi(t)<=1} <G, t> for standard Gaussian G.

    Draws come in fixed-size chunks, each with its own spawned stream, so
    the value depends only on ``seed`` and ``samples``. With ``covariance``
    the width is taken with respect to Sigma: G is replaced by Sigma^(1/2) G.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples for a standard error")
    D = _D(reg, shape)
    root = None
    if covariance is not None:
        cov = np.asarray(covariance, dtype=float)
        if cov.shape != (D, D):
            raise ShapeMismatchError(f"covariance must be {D}x{D}")
        w, V = np.linalg.eigh(cov)
        root = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
    n_chunks = -(-samples // MC_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    left = samples
    for ss in streams:
        n = min(MC_CHUNK, left)
        left -= n
        G = np.random.default_rng(ss).standard_normal((n, D))
        if root is not None:
            G = G @ root
        vals = batch_support(reg, G)
        total += vals.sum()
        total_sq += (vals**2).sum()
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0) * samples / (samples - 1)
    return WidthEstimate(float(mean), "monte-carlo", "E sup <G,t>", samples, float(np.sqrt(var / samples)))


def slope_weights_bhq(d: int, q: float) -> np.ndarray:
    """Weights lambda_i = Phi^{-1}(1 - i q / (2d)), i = 1..d.

    Examples
    --------
    >>> slope_weights_bhq(2, 0.1).round(3)
    array([1.96 , 1.645])
    """
    if d < 1:
        raise ConfigError("d must be positive")
    if not 0 < q < 1:
        raise ConfigError("q must lie in (0, 1)")
    i = np.arange(1.0, d + 1)
    w = norm.ppf(1.0 - i * q / (2.0 * d))
    if np.any(w <= 0):
        raise ConfigError("nonpositive SLOPE weights")
    return w
