"""Parameter sweeps over (dimension, N, rho, lambda) and scaling-exponent fits."""

from __future__ import annotations

import csv
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .calibration import CalibrationConstants, lambda_rerm
from .errors import ConfigError
from .model import DesignSpec, NoiseSpec, Shape, TargetSpec, generate_dataset, population_error
from .regularizers import RegularizerDescriptor, psi_value
from .solver import SolverConfig, empirical_objective, solve_constrained, solve_rerm

RECORD_COLUMNS = [
    "cell",
    "trial",
    "d",
    "N",
    "rho",
    "lam",
    "seed",
    "error",
    "psi_t_star",
    "objective_hat",
    "objective_star",
    "status",
    "wall_time",
]


@dataclass(frozen=True)
class LambdaPolicy:
    """``calibrated``, ``fixed`` (one value) or ``grid`` (several values)."""

    kind: str = "calibrated"
    values: tuple = ()
    track: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("calibrated", "fixed", "grid"):
            raise ConfigError(f"unknown lambda policy {self.kind!r}")
        if self.kind == "fixed" and len(self.values) != 1:
            raise ConfigError("fixed lambda policy needs exactly one value")
        if self.kind == "grid" and not self.values:
            raise ConfigError("grid lambda policy needs values")
        if any(v < 0 for v in self.values):
            raise ConfigError("lambda values must be nonnegative")

    @classmethod
    def from_dict(cls, obj) -> "LambdaPolicy":
        if isinstance(obj, str):
            return cls(obj)
        kind = obj.get("kind", "calibrated")
        if kind == "fixed":
            return cls("fixed", (float(obj["value"]),))
        if kind == "grid":
            return cls("grid", tuple(float(v) for v in obj["values"]))
        return cls("calibrated", (), obj.get("track"))

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.values[0]}
        if self.kind == "grid":
            return {"kind": "grid", "values": list(self.values)}
        return {"kind": "calibrated", "track": self.track}


@dataclass(frozen=True)
class SweepConfig:
    """A grid of cells, each run ``trials_per_cell`` times.

    ``dims`` entries are ints (vectors) or (m, T) pairs (matrices). The
    target template's Psi-budget is set from the rho grid: dense targets get
    ||t*||_1 = rho, sparse ones magnitude rho / s, low-rank ones scale rho.
    """

    N_values: tuple
    dims: tuple
    rho_values: tuple
    trials_per_cell: int
    regularizer: RegularizerDescriptor
    design: dict = field(default_factory=lambda: {"law": "gaussian-isotropic"})
    target: dict = field(default_factory=lambda: {"kind": "dense-decay"})
    noise: dict = field(default_factory=lambda: {"law": "gaussian", "scale": 1.0})
    lambda_policy: LambdaPolicy = LambdaPolicy()
    constants: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    mode: str = "penalized"
    master_seed: int = 0
    records_csv: Optional[str] = None

    def __post_init__(self):
        if not self.N_values or not self.dims or not self.rho_values:
            raise ConfigError("grid must be nonempty")
        if self.trials_per_cell < 1:
            raise ConfigError("trials_per_cell must be >= 1")
        if self.mode not in ("penalized", "constrained"):
            raise ConfigError("mode must be penalized or constrained")
        if any(int(n) < 1 for n in self.N_values):
            raise ConfigError("N values must be positive")

    @classmethod
    def from_dict(cls, obj: dict) -> "SweepConfig":
        try:
            grid = obj["grid"]
            dims = tuple(tuple(x) if isinstance(x, list) else int(x) for x in grid["dims"])
            return cls(
                N_values=tuple(int(n) for n in grid["N"]),
                dims=dims,
                rho_values=tuple(float(r) for r in grid["rho"]),
                trials_per_cell=int(obj.get("trials_per_cell", 1)),
                regularizer=RegularizerDescriptor.from_dict(obj["regularizer"]),
                design=dict(obj.get("design", {"law": "gaussian-isotropic"})),
                target=dict(obj.get("target", {"kind": "dense-decay"})),
                noise=dict(obj.get("noise", {"law": "gaussian", "scale": 1.0})),
                lambda_policy=LambdaPolicy.from_dict(obj.get("lambda_policy", "calibrated")),
                constants=dict(obj.get("constants", {})),
                solver=dict(obj.get("solver", {})),
                mode=obj.get("mode", "penalized"),
                master_seed=int(obj.get("master_seed", 0)),
                records_csv=obj.get("records_csv"),
            )
        except KeyError as exc:
            raise ConfigError(f"sweep config is missing {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "grid": {"N": list(self.N_values), "dims": [list(x) if isinstance(x, tuple) else x for x in self.dims], "rho": list(self.rho_values)},
            "trials_per_cell": self.trials_per_cell,
            "regularizer": self.regularizer.to_dict(),
            "design": self.design,
            "target": self.target,
            "noise": self.noise,
            "lambda_policy": self.lambda_policy.to_dict(),
            "constants": self.constants,
            "solver": self.solver,
            "mode": self.mode,
            "master_seed": self.master_seed,
            "records_csv": self.records_csv,
        }

    def cells(self) -> list:
        """Canonical cell list of (dim, N, rho, lam-or-None)."""
        lams = self.lambda_policy.values if self.lambda_policy.kind != "calibrated" else (None,)
        return list(itertools.product(self.dims, self.N_values, self.rho_values, lams))


@dataclass
class SweepRecord:
    cell: int
    trial: int
    d: int
    N: int
    rho: float
    lam: float
    seed: int
    error: float
    psi_t_star: float
    objective_hat: float
    objective_star: float
    status: str
    wall_time: float = 0.0

    def row(self) -> list:
        return [repr(v) if isinstance(v, float) else v for v in (getattr(self, c) for c in RECORD_COLUMNS)]

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        conv = {"cell": int, "trial": int, "d": int, "N": int, "seed": int, "status": str}
        return cls(**{c: conv.get(c, float)(row[c]) for c in RECORD_COLUMNS})


def shape_of(dim) -> Shape:
    if isinstance(dim, (tuple, list)):
        return Shape.matrix(*dim)
    return Shape.vector(int(dim))


def build_design(template: dict, shape: Shape) -> DesignSpec:
    return DesignSpec.from_dict(template, shape)


def build_target(template: dict, shape: Shape, rho: float) -> TargetSpec:
    """Materialize the target template at Psi-budget rho."""
    kind = template.get("kind", "dense-decay")
    D = shape.D
    if kind == "sparse":
        s = int(template.get("s", 1))
        return TargetSpec.sparse(D, s, rho / s)
    if kind == "dense-spread":
        return TargetSpec.dense_spread(D, rho)
    if kind == "dense-decay":
        return TargetSpec.dense_decay(D, rho, float(template.get("exponent", 1.0)))
    if kind == "low-rank":
        if not shape.is_matrix:
            raise ConfigError("low-rank targets need a matrix shape")
        return TargetSpec.low_rank(shape.m, shape.T, int(template.get("rank", 1)), rho, int(template.get("seed", 0)))
    if kind == "misspecified-quadratic":
        t0 = TargetSpec.dense_decay(D, rho, float(template.get("exponent", 1.0))).t_star
        return TargetSpec.misspecified_quadratic(t0, float(template.get("curvature", 1.0)))
    raise ConfigError(f"unknown target kind {kind!r}")


def trial_seed(master_seed: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, cell, trial]).generate_state(1, np.uint64)[0] >> 1)


def _run_one(config: SweepConfig, cell: int, trial: int, spec) -> SweepRecord:
    dim, N, rho, lam_fixed = spec
    shape = shape_of(dim)
    seed = trial_seed(config.master_seed, cell, trial)
    reg = config.regularizer
    start = time.perf_counter()
    lam = float("nan")
    try:
        noise = NoiseSpec.from_dict(config.noise)
        design = build_design(config.design, shape)
        target = build_target(config.target, shape, rho)
        inst = generate_dataset(design, target, noise, int(N), seed)
        if lam_fixed is None:
            consts = CalibrationConstants(**{"eta": reg.eta, **config.constants, "sigma_q": noise.sigma_q})
            lam = float(lambda_rerm(reg, shape, int(N), noise.sigma_q, consts, track=config.lambda_policy.track))
        else:
            lam = float(lam_fixed)
        scfg = SolverConfig.from_dict(config.solver)
        psi_star = psi_value(reg, target.t_star)
        if config.mode == "constrained":
            sol = solve_constrained(inst, reg, psi_star, scfg)
            obj_hat = empirical_objective(inst, reg, 0.0, sol.t_hat)
            obj_star = empirical_objective(inst, reg, 0.0, target.t_star)
        else:
            sol = solve_rerm(inst, reg, lam, scfg)
            obj_hat = empirical_objective(inst, reg, lam, sol.t_hat)
            obj_star = empirical_objective(inst, reg, lam, target.t_star)
        err = population_error(sol.t_hat, target.t_star, design)
        status = sol.status
    except Exception as exc:  # recorded, never aborts the sweep
        err = psi_star = obj_hat = obj_star = float("nan")
        status = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return SweepRecord(
        cell, trial, shape.D, int(N), float(rho), lam, seed, float(err), float(psi_star), float(obj_hat), float(obj_star), status,
        time.perf_counter() - start,
    )


def run_sweep(config: SweepConfig, threads: int = 1, on_record: Optional[Callable[[SweepRecord], None]] = None) -> list:
    """Run every (cell, trial); records come back in canonical order.

    When ``config.records_csv`` is set, rows are streamed to it as they
    become available in canonical order.
    """
    jobs = [(c, t, spec) for c, spec in enumerate(config.cells()) for t in range(config.trials_per_cell)]
    records = []
    fh = writer = None
    if config.records_csv:
        fh = open(config.records_csv, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = ex.map(lambda j: _run_one(config, *j), jobs)
                for rec in results:
                    _emit(rec, records, writer, fh, on_record)
        else:
            for j in jobs:
                _emit(_run_one(config, *j), records, writer, fh, on_record)
    finally:
        if fh is not None:
            fh.close()
    return records


def _emit(rec, records, writer, fh, on_record):
    records.append(rec)
    if writer is not None:
        writer.writerow(rec.row())
        fh.flush()
    if on_record is not None:
        on_record(rec)


def read_records_csv(path) -> list:
    with open(path, newline="") as fh:
        return [SweepRecord.from_row(r) for r in csv.DictReader(fh)]


def write_records_csv(records: Sequence[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(r.row())


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    n_points: int
    intercept: float = 0.0
    dropped: int = 0


def _get(rec, key):
    return rec[key] if isinstance(rec, dict) else getattr(rec, key)


def fit_scaling_exponent(
    records: Iterable, x_axis: str = "N", filter: Optional[Callable] = None, y_key: str = "error"
) -> ExponentFit:
    """OLS slope of log(median y) against log(x), one point per x value.

    Records with zero or non-finite y are dropped and counted.

    Examples
    --------
    >>> round(fit_scaling_exponent([{"N": 100, "error": 1.0}, {"N": 400, "error": 0.5}]).slope, 12)
    -0.5
    """
    if x_axis not in ("N", "rho", "d"):
        raise ValueError("x_axis must be N, rho or d")
    groups = {}
    dropped = 0
    for r in records:
        if filter is not None and not filter(r):
            continue
        y = float(_get(r, y_key))
        if not np.isfinite(y) or y <= 0:
            dropped += 1
            continue
        groups.setdefault(float(_get(r, x_axis)), []).append(y)
    xs = sorted(x for x in groups if x > 0)
    if len(xs) < 2:
        raise ValueError(f"need at least 2 distinct {x_axis} values, got {len(xs)} ({dropped} records dropped)")
    lx = np.log(xs)
    ly = np.log([np.median(groups[x]) for x in xs])
    if len(xs) == 2:
        slope = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        return ExponentFit(slope, 0.0, 2, float(ly[0] - slope * lx[0]), dropped)
    fit = linregress(lx, ly)
    return ExponentFit(float(fit.slope), float(fit.stderr), len(xs), float(fit.intercept), dropped)


def record_dicts(records: Sequence[SweepRecord]) -> list:
    return [asdict(r) for r in records]
