"""Choosing lambda and predicting error radii from Gaussian mean-widths.

Absolute constants that are only known up to order are exposed as ``c``
(structural) and ``c_user`` (global multiplier), both defaulting to 1.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .model import DesignSpec, ProblemInstance, Shape
from .regularizers import RegularizerDescriptor, WidthEstimate, mean_width_formula

# Slope threshold for the block-moment growth test; finite moments give ~0.
MOMENT_GROWTH_THRESHOLD = 0.2
MOMENT_GRID_POINTS = 20


@dataclass(frozen=True)
class CalibrationConstants:
    """Constants feeding lambda and the fixed point.

    ``kappa`` and ``eps`` are the small-ball parameters; ``eta`` is the
    quasi-triangle constant of the penalty.
    """

    kappa: float = 0.5
    eps: float = 0.617
    sigma_q: float = 1.0
    eta: float = 1.0
    c: float = 1.0
    c_user: float = 1.0

    def __post_init__(self):
        if not 0 < self.kappa <= 1:
            raise ConfigError("kappa must lie in (0, 1]")
        if not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if self.sigma_q < 0 or self.eta < 1 or self.c <= 0 or self.c_user <= 0:
            raise ConfigError("need sigma_q >= 0, eta >= 1, c > 0, c_user > 0")

    @property
    def alpha(self) -> float:
        return self.kappa * self.eps / self.c

    @property
    def beta(self) -> Optional[float]:
        """None in the noise-free case, where it is undefined."""
        if self.sigma_q == 0:
            return None
        return self.kappa**2 * self.eps / (self.c * self.sigma_q)

    @property
    def gamma(self) -> float:
        return self.c * self.eta**3 * self.sigma_q

    @property
    def theta(self) -> float:
        return self.kappa**2 * self.eps / 16.0

    @property
    def tau(self) -> float:
        return 3.0 / (80.0 * self.eta**3)

    def with_sigma(self, sigma_q: float) -> "CalibrationConstants":
        return CalibrationConstants(self.kappa, self.eps, sigma_q, self.eta, self.c, self.c_user)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "eps": self.eps,
            "sigma_q": self.sigma_q,
            "eta": self.eta,
            "c": self.c,
            "c_user": self.c_user,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "theta": self.theta,
            "tau": self.tau,
        }


class LambdaValue(float):
    """A regularization parameter that remembers how it was chosen."""

    noise_free: bool
    formula: str

    def __new__(cls, value: float, formula: str, noise_free: bool = False):
        obj = super().__new__(cls, value)
        obj.formula = formula
        obj.noise_free = noise_free
        return obj


@dataclass(frozen=True)
class FixedPoint:
    r_squared: float
    regime: str
    noise_free: bool = False

    @property
    def r(self) -> float:
        return float(np.sqrt(self.r_squared))


def ellipsoid_width(shape: Shape) -> WidthEstimate:
    """Width of the L2 unit ball under isotropy, sqrt(D) with constant 1."""
    return WidthEstimate(float(np.sqrt(shape.D)), "closed-form", "sqrt(D)")


def _width(w) -> float:
    return float(w.value if isinstance(w, WidthEstimate) else w)


def fixed_point_r(
    reg: RegularizerDescriptor,
    shape: Shape,
    rho: float,
    N: int,
    constants: CalibrationConstants,
    widths=None,
) -> FixedPoint:
    """Fixed point r(rho) from the mean-width bounds.

    With L = rho * w_K / sqrt(N): r^2 = L / beta when N >= (w_E / alpha)^2,
    else max(L / beta, L^2 / alpha^2). Without noise beta is undefined and
    only the quadratic term is returned.

    Examples
    --------
    >>> from rerm.regularizers import RegularizerDescriptor
    >>> k = CalibrationConstants(kappa=1.0, eps=1.0, sigma_q=2.0)
    >>> fixed_point_r(RegularizerDescriptor.l1(), Shape.vector(4), 2.0, 100, k, (1.0, 0.1))
    FixedPoint(r_squared=0.4, regime='large-N', noise_free=False)
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if N < 1:
        raise ValueError("N must be >= 1")
    if widths is None:
        widths = (mean_width_formula(reg, shape), ellipsoid_width(shape))
    wK, wE = _width(widths[0]), _width(widths[1])
    lam = rho * wK / np.sqrt(N)
    alpha, beta = constants.alpha, constants.beta
    quad = lam**2 / alpha**2
    if beta is None:
        return FixedPoint(float(quad), "noise-free-quadratic", True)
    lin = lam / beta
    if N >= (wE / alpha) ** 2:
        return FixedPoint(float(lin), "large-N")
    if quad > lin:
        return FixedPoint(float(quad), "quadratic-dominated")
    return FixedPoint(float(lin), "linear-dominated")


def lambda_rerm(
    reg: RegularizerDescriptor,
    shape: Shape,
    N: int,
    sigma_q: float,
    constants: CalibrationConstants = CalibrationConstants(),
    width=None,
    track: Optional[str] = None,
    M: float = 1.0,
) -> LambdaValue:
    """Regularization parameter.

    ``track="general"`` gives c_user * gamma * w_K / sqrt(N) with
    gamma = c * eta^3 * sigma_q. ``track="limited-moment"`` (default for l1)
    gives c_user * sigma_q * M * sqrt(log d / N).

    Examples
    --------
    >>> from rerm.regularizers import RegularizerDescriptor
    >>> round(lambda_rerm(RegularizerDescriptor.l1(), Shape.vector(100), 25, 1.0), 3)
    0.429
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if sigma_q < 0:
        raise ValueError("sigma_q must be nonnegative")
    if track is None:
        track = "limited-moment" if reg.kind == "l1" else "general"
    if sigma_q == 0:
        return LambdaValue(0.0, "noise-free: any lambda > 0 works", noise_free=True)
    if track == "limited-moment":
        if reg.kind != "l1":
            raise ConfigError("the limited-moment track is defined for l1 only")
        D = shape.D
        if D < 2:
            raise ConfigError("need d >= 2 for log d")
        val = constants.c_user * sigma_q * M * np.sqrt(np.log(D) / N)
        return LambdaValue(val, "c_user*sigma_q*M*sqrt(log d/N)")
    if track != "general":
        raise ConfigError(f"unknown lambda track {track!r}")
    wK = _width(width if width is not None else mean_width_formula(reg, shape))
    gamma = constants.with_sigma(sigma_q).gamma
    return LambdaValue(constants.c_user * gamma * wK / np.sqrt(N), "c_user*gamma*w_K/sqrt(N)")


@dataclass
class CalibrationResult:
    width_K: WidthEstimate
    width_E: WidthEstimate
    lam: LambdaValue
    constants: CalibrationConstants
    N: int
    reg: RegularizerDescriptor
    shape: Shape
    note: str = "lambda0 replaced by its mean-width upper bound; constants normalized to 1"

    @property
    def noise_free(self) -> bool:
        return self.lam.noise_free

    def r_of_rho(self, rho: float) -> FixedPoint:
        return fixed_point_r(self.reg, self.shape, rho, self.N, self.constants, (self.width_K, self.width_E))

    def to_dict(self, rhos: Sequence[float] = ()) -> dict:
        return {
            "regularizer": self.reg.to_dict(),
            "shape": self.shape.to_dict(),
            "N": self.N,
            "width_K": self.width_K.to_dict(),
            "width_E": self.width_E.to_dict(),
            "lambda": float(self.lam),
            "lambda_formula": self.lam.formula,
            "noise_free": self.noise_free,
            "constants": self.constants.to_dict(),
            "r_of_rho": [
                {"rho": r, "r_squared": fp.r_squared, "regime": fp.regime}
                for r, fp in ((r, self.r_of_rho(r)) for r in rhos)
            ],
            "note": self.note,
        }


def calibrate(
    reg: RegularizerDescriptor,
    shape: Shape,
    N: int,
    constants: CalibrationConstants,
    width_K: Optional[WidthEstimate] = None,
    track: Optional[str] = None,
    M: float = 1.0,
) -> CalibrationResult:
    """Widths, lambda and the fixed-point map for one problem size."""
    wK = width_K if width_K is not None else mean_width_formula(reg, shape)
    wE = ellipsoid_width(shape)
    lam = lambda_rerm(reg, shape, N, constants.sigma_q, constants, wK, track, M)
    return CalibrationResult(wK, wE, lam, constants, N, reg, shape)


# ---------------------------------------------------------------- small ball


@dataclass
class SmallBallReport:
    kappa: float
    eps_hat: float
    directions_tested: int
    min_direction: np.ndarray
    frequencies: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "eps_hat": self.eps_hat,
            "directions_tested": self.directions_tested,
            "min_direction": self.min_direction.tolist(),
        }


def estimate_small_ball(
    design: Union[DesignSpec, np.ndarray],
    kappa: float,
    directions: Union[int, np.ndarray],
    seed: int,
    samples: int = 100_000,
    covariance: Optional[np.ndarray] = None,
) -> SmallBallReport:
    """Minimum over directions of the frequency of |<X,t>| >= kappa ||<X,t>||_L2.

    ``design`` is a DesignSpec (``samples`` rows are drawn) or a sample
    matrix. ``directions`` is a count of uniform random unit directions or
    an explicit array of them. The L2 norm uses the known covariance when
    available, else the sample.
    """
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    if isinstance(design, DesignSpec):
        X = design.sample(samples, rng)
        cov = design.covariance_matrix()
    else:
        X = np.asarray(design, dtype=float)
        cov = None if covariance is None else np.asarray(covariance, dtype=float)
    N, D = X.shape
    if N < 1000:
        warnings.warn("fewer than 1000 samples per direction; the estimate is noisy", stacklevel=2)
    if isinstance(directions, (int, np.integer)):
        T = rng.standard_normal((int(directions), D))
        T /= np.linalg.norm(T, axis=1, keepdims=True)
    else:
        T = np.atleast_2d(np.asarray(directions, dtype=float))
        if T.shape[1] != D:
            raise ShapeMismatchError(f"directions must have {D} columns")
    Z = X @ T.T
    if cov is not None:
        l2 = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", T, cov, T), 0.0))
    else:
        l2 = np.sqrt(np.mean(Z**2, axis=0))
    ok = l2 > 0
    if not np.all(ok):
        warnings.warn(f"{int((~ok).sum())} degenerate directions excluded", stacklevel=2)
    if not np.any(ok):
        raise ValueError("every tested direction is degenerate")
    freq = np.mean(np.abs(Z[:, ok]) >= kappa * l2[ok], axis=0)
    j = int(np.argmin(freq))
    return SmallBallReport(float(kappa), float(freq[j]), int(ok.sum()), T[ok][j].copy(), freq)


# ---------------------------------------------------------------- moment growth


@dataclass
class MomentGrowthReport:
    p0: float
    per_coordinate_ratio: np.ndarray
    kappa0_hat: float
    M: float
    growth_exponent: np.ndarray
    violated: bool
    reliable: bool
    p_grid: np.ndarray = field(repr=False, default=None)

    @property
    def status(self) -> str:
        if self.violated:
            return "moment assumption violated"
        return "ok" if self.reliable else "unreliable"

    def to_dict(self) -> dict:
        return {
            "p0": self.p0,
            "per_coordinate_ratio": self.per_coordinate_ratio.tolist(),
            "kappa0_hat": self.kappa0_hat,
            "M": self.M,
            "growth_exponent": self.growth_exponent.tolist(),
            "violated": self.violated,
            "reliable": self.reliable,
            "status": self.status,
        }


def _block_growth(x: np.ndarray, p0: float, min_block: int = 200) -> float:
    """Log-log slope of the median normalized p0-th block moment vs block size.

    Finite p0-th moments give a slope near 0; an infinite one makes the
    block moments grow polynomially with the block size.
    """
    N = x.size
    sizes, meds = [], []
    b = 1
    while N // b >= min_block:
        n = N // b
        blocks = x[: n * b].reshape(b, n)
        second = np.mean(blocks**2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.mean(np.abs(blocks) ** p0, axis=1) / second ** (p0 / 2)
        m = m[np.isfinite(m)]
        if m.size:
            sizes.append(n)
            meds.append(np.median(m))
        b *= 2
    if len(sizes) < 2:
        return 0.0
    return float(np.polyfit(np.log(sizes), np.log(meds), 1)[0])


def moment_growth_diagnostic(samples: np.ndarray, p0: Optional[float] = None, a: float = 1.0) -> MomentGrowthReport:
    """Per-coordinate sup_{2<=p<=p0} ||x_j||_p / (sqrt(p) ||x_j||_2).

    ``p0`` defaults to a * log d. Violations are detected from the growth of
    block moments of order p0 with block size.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N, D = X.shape
    if p0 is None:
        p0 = max(2.0, a * np.log(max(D, 2)))
    if p0 < 2:
        raise ValueError("p0 must be >= 2")
    grid = np.geomspace(2.0, p0, MOMENT_GRID_POINTS) if p0 > 2 else np.array([2.0])
    A = np.abs(X)
    l2 = np.sqrt(np.mean(A**2, axis=0))
    ratios = np.zeros(D)
    growth = np.zeros(D)
    for j in range(D):
        if l2[j] == 0:
            continue
        a_j = A[:, j] / l2[j]
        norms = np.array([np.mean(a_j**p) ** (1.0 / p) for p in grid])
        ratios[j] = np.max(norms / np.sqrt(grid))
        growth[j] = _block_growth(X[:, j], p0)
    reliable = N >= 10 * np.exp(p0)
    violated = bool(np.any(growth > MOMENT_GROWTH_THRESHOLD))
    return MomentGrowthReport(float(p0), ratios, float(ratios.max()), float(l2.max()), growth, violated, bool(reliable), grid)


# ---------------------------------------------------------------- decomposition


@dataclass(frozen=True)
class ExcessLoss:
    PN_Q: float
    PN_M: float
    PN_L: float


def excess_loss_decomposition(instance: ProblemInstance, t, t_star) -> ExcessLoss:
    """Quadratic and multiplier parts of the empirical excess loss.

    With xi_i = Y_i - <X_i,t*> and u = t - t*, PN_Q = mean <X_i,u>^2,
    PN_M = mean xi_i <X_i,u>, and PN_L = PN_Q - 2 PN_M.
    """
    t = np.asarray(t, dtype=float).ravel()
    t_star = np.asarray(t_star, dtype=float).ravel()
    D = instance.X.shape[1]
    if t.size != D or t_star.size != D:
        raise ShapeMismatchError(f"expected dimension {D}")
    xi = instance.Y - instance.X @ t_star
    Xu = instance.X @ (t - t_star)
    q = float(np.mean(Xu**2))
    m = float(np.mean(xi * Xu))
    return ExcessLoss(q, m, q - 2.0 * m)


# ---------------------------------------------------------------- width tables


WIDTH_TABLE_COLUMNS = ["kind", "dimension", "formula", "mc_estimate", "stderr"]


def write_width_table(rows: Sequence[dict], path) -> None:
    """CSV with columns kind, dimension, formula, mc_estimate, stderr."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=WIDTH_TABLE_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in WIDTH_TABLE_COLUMNS})


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=float)
