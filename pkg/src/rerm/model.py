"""Synthetic regression problems: designs, targets, noise and population error.

Matrix-valued problems are flattened row-major; the :class:`Shape` travels
with every instance so spectral penalties can reshape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.special import gammaln

from .errors import MomentAssumptionError, ShapeMismatchError

DESIGN_LAWS = ("gaussian-isotropic", "rademacher", "student-t", "explicit-covariance")
NOISE_LAWS = ("gaussian", "student-t", "none")
TARGET_KINDS = ("sparse", "dense-spread", "dense-decay", "low-rank", "misspecified-quadratic")


@dataclass(frozen=True)
class Shape:
    """Ambient shape: a d-vector, or an m x T matrix."""

    d: Optional[int] = None
    m: Optional[int] = None
    T: Optional[int] = None

    def __post_init__(self):
        if self.d is not None:
            if self.m is not None or self.T is not None:
                raise ValueError("a shape is either a vector (d) or a matrix (m, T)")
            if int(self.d) < 1:
                raise ValueError("d must be >= 1")
        else:
            if self.m is None or self.T is None or int(self.m) < 1 or int(self.T) < 1:
                raise ValueError("matrix shape needs positive m and T")

    @classmethod
    def vector(cls, d: int) -> "Shape":
        return cls(d=int(d))

    @classmethod
    def matrix(cls, m: int, T: int) -> "Shape":
        return cls(m=int(m), T=int(T))

    @property
    def is_matrix(self) -> bool:
        return self.d is None

    @property
    def D(self) -> int:
        return int(self.d) if self.d is not None else int(self.m) * int(self.T)

    def to_dict(self) -> dict:
        if self.is_matrix:
            return {"kind": "matrix", "m": self.m, "T": self.T}
        return {"kind": "vector", "d": self.d}

    @classmethod
    def from_dict(cls, obj: dict) -> "Shape":
        if obj.get("kind", "vector") == "matrix" or "m" in obj:
            return cls.matrix(obj["m"], obj["T"])
        return cls.vector(obj["d"])


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """Law of the design vector X.

    Student-t coordinates are rescaled to unit variance, so every law except
    ``explicit-covariance`` is isotropic.
    """

    law: str
    shape: Shape
    dof: Optional[float] = None
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.law not in DESIGN_LAWS:
            raise ValueError(f"unknown design law {self.law!r}")
        if self.law == "student-t":
            if self.dof is None or self.dof <= 2:
                raise ValueError("student-t design needs dof > 2 (finite variance)")
        if self.law == "explicit-covariance":
            if self.covariance is None:
                raise ValueError("explicit-covariance design needs a covariance matrix")
            cov = np.array(self.covariance, dtype=float)
            D = self.shape.D
            if cov.shape != (D, D):
                raise ShapeMismatchError(f"covariance must be {D}x{D}, got {cov.shape}")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-10 * max(1.0, np.abs(cov).max()):
                raise ValueError("covariance must be positive semidefinite")
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)

    @property
    def isotropic(self) -> bool:
        return self.law != "explicit-covariance"

    def covariance_matrix(self) -> np.ndarray:
        if self.isotropic:
            return np.eye(self.shape.D)
        return np.array(self.covariance)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        D = self.shape.D
        if self.law == "gaussian-isotropic":
            return rng.standard_normal((n, D))
        if self.law == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=(n, D))
        if self.law == "student-t":
            return rng.standard_t(self.dof, size=(n, D)) * np.sqrt((self.dof - 2.0) / self.dof)
        w, V = np.linalg.eigh(self.covariance)
        root = V * np.sqrt(np.clip(w, 0.0, None))
        return rng.standard_normal((n, D)) @ root.T

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"law": self.law, "shape": self.shape.to_dict()}
        if self.dof is not None:
            out["dof"] = self.dof
        if self.covariance is not None:
            out["covariance"] = np.asarray(self.covariance).tolist()
        return out

    @classmethod
    def from_dict(cls, obj: dict, shape: Optional[Shape] = None) -> "DesignSpec":
        shp = Shape.from_dict(obj["shape"]) if "shape" in obj else shape
        if shp is None:
            raise ValueError("design spec needs a shape")
        cov = obj.get("covariance")
        return cls(
            law=obj["law"],
            shape=shp,
            dof=obj.get("dof"),
            covariance=None if cov is None else np.asarray(cov, dtype=float),
        )


def gaussian_abs_moment(q: float) -> float:
    """E|g|^q for a standard normal g."""
    return float(np.exp(0.5 * q * np.log(2.0) + gammaln((q + 1) / 2) - 0.5 * np.log(np.pi)))


def student_t_abs_moment(q: float, dof: float) -> float:
    """E|T|^q for a Student-t variable with ``dof`` > q degrees of freedom."""
    if dof <= q:
        return float("inf")
    logm = (
        0.5 * q * np.log(dof)
        + gammaln((q + 1) / 2)
        + gammaln((dof - q) / 2)
        - 0.5 * np.log(np.pi)
        - gammaln(dof / 2)
    )
    return float(np.exp(logm))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise xi. ``scale`` is the standard deviation of xi.

    ``sigma_q`` is the L_q norm of xi, computed from the law; it is what the
    calibration uses as noise level.
    """

    law: str = "gaussian"
    scale: float = 1.0
    q: float = 4.0
    dof: Optional[float] = None
    sigma_q: float = field(init=False)

    def __post_init__(self):
        if self.law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.law!r}")
        if self.q <= 2:
            raise ValueError("moment order q must exceed 2")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")
        if self.law == "none":
            if self.scale != 0:
                object.__setattr__(self, "scale", 0.0)
            sq = 0.0
        elif self.law == "gaussian":
            sq = self.scale * gaussian_abs_moment(self.q) ** (1.0 / self.q)
        else:
            if self.dof is None or self.dof <= self.q:
                raise MomentAssumptionError(
                    f"student-t noise with dof={self.dof} has no finite L_{self.q} norm; "
                    f"need dof > q"
                )
            unit = np.sqrt((self.dof - 2.0) / self.dof)
            sq = self.scale * unit * student_t_abs_moment(self.q, self.dof) ** (1.0 / self.q)
        object.__setattr__(self, "sigma_q", float(sq))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.law == "none":
            return np.zeros(n)
        if self.law == "gaussian":
            return self.scale * rng.standard_normal(n)
        unit = np.sqrt((self.dof - 2.0) / self.dof)
        return self.scale * unit * rng.standard_t(self.dof, size=n)

    def to_dict(self) -> dict:
        out = {"law": self.law, "scale": self.scale, "q": self.q, "sigma_q": self.sigma_q}
        if self.dof is not None:
            out["dof"] = self.dof
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "NoiseSpec":
        law = obj.get("law", "gaussian")
        scale = obj.get("scale", 0.0 if law == "none" else 1.0)
        return cls(law=law, scale=float(scale), q=float(obj.get("q", 4.0)), dof=obj.get("dof"))


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Regression target. ``t_star`` is the best linear predictor, materialized.

    Linear kinds satisfy Y = <X, t_star> + xi. For ``misspecified-quadratic``
    Y = <X,t0> + curvature * (<X,t0>^2 - E<X,t0>^2) + xi; for the symmetric
    design laws shipped here the best linear predictor is still t0, and the
    effective noise Y - <X,t0> depends on X.
    """

    kind: str
    t_star: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}")
        t = np.array(self.t_star, dtype=float).ravel()
        t.setflags(write=False)
        object.__setattr__(self, "t_star", t)

    @property
    def D(self) -> int:
        return self.t_star.size

    @property
    def linear(self) -> bool:
        return self.kind != "misspecified-quadratic"

    @classmethod
    def sparse(cls, D: int, s: int, magnitude: float) -> "TargetSpec":
        if not 1 <= s <= D:
            raise ValueError("support size must be in [1, D]")
        t = np.zeros(D)
        t[:s] = magnitude
        return cls("sparse", t, {"s": int(s), "magnitude": float(magnitude)})

    @classmethod
    def dense_spread(cls, D: int, rho: float) -> "TargetSpec":
        """Equal entries rho/D, so that ||t||_1 = rho."""
        return cls("dense-spread", np.full(D, rho / D), {"rho": float(rho)})

    @classmethod
    def dense_decay(cls, D: int, rho: float, exponent: float = 1.0) -> "TargetSpec":
        """All entries nonzero, t_j proportional to j^-exponent, ||t||_1 = rho."""
        u = np.arange(1.0, D + 1) ** (-exponent)
        return cls("dense-decay", rho * u / u.sum(), {"rho": float(rho), "exponent": float(exponent)})

    @classmethod
    def low_rank(cls, m: int, T: int, rank: int, scale: float = 1.0, seed: int = 0) -> "TargetSpec":
        rng = np.random.default_rng(seed)
        U = rng.standard_normal((m, rank))
        V = rng.standard_normal((T, rank))
        A = scale * (U @ V.T) / np.sqrt(rank * m * T)
        return cls(
            "low-rank", A.ravel(), {"m": m, "T": T, "rank": int(rank), "scale": float(scale), "seed": int(seed)}
        )

    @classmethod
    def misspecified_quadratic(cls, t0, curvature: float = 1.0) -> "TargetSpec":
        return cls("misspecified-quadratic", np.asarray(t0, dtype=float), {"curvature": float(curvature)})

    def scaled(self, factor: float) -> "TargetSpec":
        params = dict(self.params)
        return TargetSpec(self.kind, factor * self.t_star, params)

    def response(self, X: np.ndarray, design: DesignSpec) -> np.ndarray:
        lin = X @ self.t_star
        if self.linear:
            return lin
        t0 = self.t_star
        mean_sq = float(t0 @ design.covariance_matrix() @ t0)
        return lin + self.params.get("curvature", 1.0) * (lin**2 - mean_sq)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "t_star": self.t_star.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "TargetSpec":
        return cls(obj["kind"], np.asarray(obj["t_star"], dtype=float), dict(obj.get("params", {})))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """An i.i.d. sample (X_i, Y_i), i <= N, with the settings that generated it."""

    X: np.ndarray
    Y: np.ndarray
    design: DesignSpec
    target: TargetSpec
    noise: NoiseSpec
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(self.X))
        object.__setattr__(self, "Y", _frozen(self.Y))
        if self.X.ndim != 2 or self.Y.shape != (self.X.shape[0],):
            raise ShapeMismatchError("X must be N x D and Y an N-vector")
        if self.X.shape[0] < 1:
            raise ValueError("N must be >= 1")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def shape(self) -> Shape:
        return self.design.shape

    @property
    def t_star(self) -> np.ndarray:
        return self.target.t_star

    @property
    def sigma_q(self) -> float:
        return self.noise.sigma_q

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.to_dict(),
            "design": self.design.to_dict(),
            "target": self.target.to_dict(),
            "noise": self.noise.to_dict(),
            "N": self.N,
            "seed": self.seed,
            "X": self.X.ravel().tolist(),
            "Y": self.Y.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "ProblemInstance":
        shape = Shape.from_dict(obj["shape"])
        N = int(obj["N"])
        X = np.asarray(obj["X"], dtype=float).reshape(N, shape.D)
        return cls(
            X=X,
            Y=np.asarray(obj["Y"], dtype=float),
            design=DesignSpec.from_dict(obj["design"], shape),
            target=TargetSpec.from_dict(obj["target"]),
            noise=NoiseSpec.from_dict(obj["noise"]),
            seed=int(obj["seed"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


def generate_dataset(
    design: DesignSpec, target: TargetSpec, noise: NoiseSpec, N: int, seed: int
) -> ProblemInstance:
    """Draw N i.i.d. pairs (X_i, Y_i). Deterministic given ``seed``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if target.D != design.shape.D:
        raise ShapeMismatchError(f"target has dimension {target.D}, design has {design.shape.D}")
    if noise.law == "student-t" and (noise.dof is None or noise.dof <= noise.q):
        raise MomentAssumptionError("student-t noise needs dof > q")
    rng = np.random.default_rng(seed)
    X = design.sample(N, rng)
    xi = noise.sample(N, rng)
    Y = target.response(X, design) + xi
    return ProblemInstance(X=X, Y=Y, design=design, target=target, noise=noise, seed=int(seed))


def population_error(
    t_hat: np.ndarray, t_star: np.ndarray, design: DesignSpec, covariance: Optional[np.ndarray] = None
) -> float:
    """E<X, t_hat - t_star>^2 = (t_hat - t_star)' Sigma (t_hat - t_star)."""
    a = np.asarray(t_hat, dtype=float).ravel()
    b = np.asarray(t_star, dtype=float).ravel()
    if a.size != design.shape.D or b.size != design.shape.D:
        raise ShapeMismatchError(f"expected dimension {design.shape.D}, got {a.size} and {b.size}")
    u = a - b
    if covariance is not None:
        cov = np.asarray(covariance, dtype=float)
    elif design.isotropic:
        return float(u @ u)
    else:
        cov = design.covariance_matrix()
    return max(float(u @ cov @ u), 0.0)
