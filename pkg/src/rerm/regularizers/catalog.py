"""Regularizer descriptors: kind, parameters, quasi-triangle constant and capabilities."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..model import Shape

KINDS = ("l1", "lp", "weak-lp", "slope", "mmp-cone", "schatten", "max-norm", "atomic")

# Grothendieck constant upper bound used when reporting the max-norm sandwich.
GROTHENDIECK_KG = 1.782
DEFAULT_BRUTE_FORCE_CAP = 24


@dataclass(frozen=True)
class Capabilities:
    has_prox: bool
    has_lmo: bool
    has_width_formula: bool
    is_norm: bool


@dataclass(frozen=True, eq=False)
class RegularizerDescriptor:
    """A penalty Psi with its parameters.

    Use the classmethod constructors rather than building this directly.
    Array parameters (SLOPE weights, atoms) are stored read-only.
    """

    kind: str
    params: dict = field(default_factory=dict)
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown regularizer kind {self.kind!r}")
        if self.eta < 1:
            raise ConfigError("quasi-triangle constant eta must be >= 1")
        if self.kind != "weak-lp" and self.eta != 1.0:
            raise ConfigError(f"{self.kind} is a norm; eta must be 1")

    # constructors

    @classmethod
    def l1(cls) -> "RegularizerDescriptor":
        return cls("l1")

    @classmethod
    def lp(cls, p: float) -> "RegularizerDescriptor":
        p = float(p)
        if not p >= 1:
            raise ConfigError("lp needs p >= 1")
        return cls("lp", {"p": p})

    @classmethod
    def weak_lp(cls, p: float, eta: float) -> "RegularizerDescriptor":
        """Weak-lp quasi-norm max_j j^(1/p) t*_j. ``eta`` has no default on purpose."""
        p = float(p)
        if not 0 < p <= 1:
            raise ConfigError("weak-lp needs p in (0, 1]")
        if eta is None:
            raise ConfigError("weak-lp requires an explicit quasi-triangle constant eta")
        return cls("weak-lp", {"p": p}, float(eta))

    @classmethod
    def slope(cls, weights) -> "RegularizerDescriptor":
        w = np.array(weights, dtype=float).ravel()
        if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ConfigError("SLOPE weights must be finite and strictly positive")
        if np.any(np.diff(w) > 0):
            raise ConfigError("SLOPE weights must be nonincreasing")
        w.setflags(write=False)
        return cls("slope", {"weights": w})

    @classmethod
    def mmp_orthant(cls) -> "RegularizerDescriptor":
        return cls("mmp-cone", {"cone": "nonneg-orthant"})

    @classmethod
    def mmp_groups(cls, groups, D: Optional[int] = None) -> "RegularizerDescriptor":
        gs = tuple(tuple(int(i) for i in g) for g in groups)
        flat = [i for g in gs for i in g]
        if any(len(g) == 0 for g in gs):
            raise ConfigError("groups must be nonempty")
        n = D if D is not None else len(flat)
        if sorted(flat) != list(range(n)):
            raise ConfigError("groups must be a disjoint cover of {0, ..., D-1}")
        return cls("mmp-cone", {"cone": "group-partition", "groups": gs})

    @classmethod
    def schatten(cls, p: float, m: int, T: int) -> "RegularizerDescriptor":
        p = float(p)
        if not p >= 1:
            raise ConfigError("schatten needs p >= 1")
        return cls("schatten", {"p": p, "shape": Shape.matrix(m, T)})

    @classmethod
    def max_norm(cls, m: int, T: int, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> "RegularizerDescriptor":
        return cls("max-norm", {"shape": Shape.matrix(m, T), "cap": int(cap)})

    @classmethod
    def atomic(cls, atoms) -> "RegularizerDescriptor":
        A = np.array(atoms, dtype=float)
        if A.ndim != 2 or A.shape[0] == 0:
            raise ConfigError("atoms must be a nonempty list of equal-length vectors")
        if not _closed_under_negation(A):
            raise ConfigError("atom set must be closed under negation")
        A.setflags(write=False)
        return cls("atomic", {"atoms": A})

    # properties

    @property
    def capabilities(self) -> Capabilities:
        prox = self.kind in ("l1", "lp", "slope", "mmp-cone", "schatten")
        return Capabilities(
            has_prox=prox,
            has_lmo=True,
            has_width_formula=self.kind != "atomic",
            is_norm=self.kind != "weak-lp",
        )

    @property
    def is_norm(self) -> bool:
        return self.kind != "weak-lp"

    @property
    def matrix_shape(self) -> Optional[Shape]:
        return self.params.get("shape")

    def dimension(self) -> Optional[int]:
        """Ambient dimension fixed by the parameters, or None if any works."""
        if self.kind == "slope":
            return self.params["weights"].size
        if self.kind == "atomic":
            return self.params["atoms"].shape[1]
        if self.kind in ("schatten", "max-norm"):
            return self.params["shape"].D
        if self.kind == "mmp-cone" and self.params["cone"] == "group-partition":
            return sum(len(g) for g in self.params["groups"])
        return None

    def check_dim(self, D: int) -> None:
        want = self.dimension()
        if want is not None and want != D:
            from ..errors import ShapeMismatchError

            raise ShapeMismatchError(f"{self.kind} expects dimension {want}, got {D}")

    def label(self) -> str:
        p = self.params
        if self.kind in ("lp", "weak-lp", "schatten"):
            return f"{self.kind}(p={p['p']:g})"
        if self.kind == "mmp-cone":
            return f"mmp-cone({p['cone']})"
        return self.kind

    # serialization

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.params.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
            elif isinstance(v, Shape):
                out[k] = v.to_dict()
            elif k == "groups":
                out[k] = [list(g) for g in v]
            else:
                out[k] = v
        d = {"kind": self.kind, "params": out}
        if self.kind == "weak-lp":
            d["eta"] = self.eta
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "RegularizerDescriptor":
        kind = obj.get("kind")
        p = dict(obj.get("params", {}))
        try:
            if kind == "l1":
                return cls.l1()
            if kind == "lp":
                return cls.lp(p["p"])
            if kind == "weak-lp":
                eta = obj.get("eta", p.get("eta"))
                if eta is None:
                    raise ConfigError("weak-lp requires an explicit quasi-triangle constant eta")
                return cls.weak_lp(p["p"], eta)
            if kind == "slope":
                if "weights_csv" in p:
                    return cls.slope(load_vector_csv(p["weights_csv"]))
                return cls.slope(p["weights"])
            if kind == "mmp-cone":
                if p.get("cone", "nonneg-orthant") == "nonneg-orthant":
                    return cls.mmp_orthant()
                return cls.mmp_groups(p["groups"])
            if kind in ("schatten", "max-norm"):
                shp = p.get("shape", {})
                m, T = shp.get("m", p.get("m")), shp.get("T", p.get("T"))
                if kind == "schatten":
                    return cls.schatten(p.get("p", 1.0), m, T)
                return cls.max_norm(m, T, p.get("cap", DEFAULT_BRUTE_FORCE_CAP))
            if kind == "atomic":
                if "atoms_csv" in p:
                    return cls.atomic(load_atoms_csv(p["atoms_csv"]))
                return cls.atomic(p["atoms"])
        except KeyError as exc:
            raise ConfigError(f"missing parameter {exc} for regularizer {kind!r}") from exc
        raise ConfigError(f"unknown regularizer kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "RegularizerDescriptor":
        return cls.from_dict(json.loads(text))


def _closed_under_negation(A: np.ndarray, tol: float = 1e-12) -> bool:
    for a in A:
        if not np.any(np.all(np.abs(A + a) <= tol, axis=1)):
            return False
    return True


def load_vector_csv(path) -> np.ndarray:
    """One value per row (extra columns ignored)."""
    vals = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and row[0].strip():
                vals.append(float(row[0]))
    return np.asarray(vals)


def load_atoms_csv(path) -> np.ndarray:
    """One atom per row, comma separated."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and any(c.strip() for c in row):
                rows.append([float(c) for c in row])
    return np.asarray(rows)
