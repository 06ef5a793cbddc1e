"""Command-line entry point.

Subcommands: solve, calibrate, rates, diagnose, sweep, report. Each reads a
JSON config (``--config``) and writes results under ``--out-dir``.

Exit codes: 0 success, 2 configuration error, 3 partial solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .calibration import (
    CalibrationConstants,
    calibrate,
    dump_json,
    estimate_small_ball,
    moment_growth_diagnostic,
    write_width_table,
)
from .errors import ConfigError
from .model import DesignSpec, NoiseSpec, Shape, TargetSpec, generate_dataset, population_error
from .rates import RateQuery, combined_rate, complexity_rate, minimax_rate_l1, write_rate_table
from .regularizers import RegularizerDescriptor, estimate_mean_width_mc, mean_width_formula
from .report import emit_report, theory_rates
from .solver import CONVERGED, SolverConfig, solve_constrained, solve_rerm
from .sweep import SweepConfig, build_target, read_records_csv, run_sweep, shape_of

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3

log = logging.getLogger("rerm")


def _shape(cfg: dict) -> Shape:
    if "shape" in cfg:
        return Shape.from_dict(cfg["shape"])
    return shape_of(cfg["d"])


def _constants(cfg: dict, reg: RegularizerDescriptor, sigma_q: float) -> CalibrationConstants:
    return CalibrationConstants(**{"eta": reg.eta, **cfg.get("constants", {}), "sigma_q": sigma_q})


def cmd_solve(cfg: dict, args) -> int:
    shape = _shape(cfg)
    reg = RegularizerDescriptor.from_dict(cfg["regularizer"])
    design = DesignSpec.from_dict(cfg.get("design", {"law": "gaussian-isotropic"}), shape)
    noise = NoiseSpec.from_dict(cfg.get("noise", {"law": "gaussian", "scale": 1.0}))
    target = build_target(cfg.get("target", {"kind": "sparse", "s": 1}), shape, float(cfg.get("rho", 1.0)))
    inst = generate_dataset(design, target, noise, int(cfg["N"]), args.seed)
    scfg = SolverConfig.from_dict(cfg.get("solver", {}))
    if "radius" in cfg:
        sol = solve_constrained(inst, reg, float(cfg["radius"]), scfg)
    else:
        lam = cfg.get("lambda", "calibrated")
        if lam == "calibrated":
            lam = float(calibrate(reg, shape, inst.N, _constants(cfg, reg, noise.sigma_q)).lam)
        sol = solve_rerm(inst, reg, float(lam), scfg)
    out = {
        "status": sol.status,
        "method": sol.method,
        "approximate": sol.approximate,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "certificate": sol.certificate,
        "tolerance": sol.tolerance,
        "lambda": sol.lam,
        "radius": sol.radius,
        "error": population_error(sol.t_hat, target.t_star, design),
        "t_hat": sol.t_hat.tolist(),
    }
    dump_json(out, os.path.join(args.out_dir, "solution.json"))
    sol.write_trace_csv(os.path.join(args.out_dir, "trace.csv"))
    print(f"{sol.status} after {sol.iterations} iterations, error {out['error']:.4g}")
    return EXIT_OK if sol.status == CONVERGED else EXIT_PARTIAL


def cmd_calibrate(cfg: dict, args) -> int:
    shape = _shape(cfg)
    reg = RegularizerDescriptor.from_dict(cfg["regularizer"])
    noise = NoiseSpec.from_dict(cfg.get("noise", {"law": "gaussian", "scale": 1.0}))
    res = calibrate(reg, shape, int(cfg["N"]), _constants(cfg, reg, noise.sigma_q), track=cfg.get("track"), M=cfg.get("M", 1.0))
    dump_json(res.to_dict(cfg.get("rho", [])), os.path.join(args.out_dir, "calibration.json"))
    mc = cfg.get("mc_samples")
    if mc:
        est = estimate_mean_width_mc(reg, shape, int(mc), args.seed)
        form = mean_width_formula(reg, shape)
        write_width_table(
            [{"kind": reg.label(), "dimension": shape.D, "formula": form.value, "mc_estimate": est.value, "stderr": est.stderr}],
            os.path.join(args.out_dir, "widths.csv"),
        )
    print(f"lambda = {float(res.lam):.6g} ({res.lam.formula})")
    return EXIT_OK


def cmd_rates(cfg: dict, args) -> int:
    rows, extra = [], []
    for q in cfg.get("queries", []):
        kind = q.get("rate", "complexity")
        if kind == "complexity":
            reg = RegularizerDescriptor.from_dict(q["regularizer"])
            query = RateQuery(reg, _shape(q), int(q["N"]), float(q["sigma_q"]), float(q["rho"]), q.get("s"), q.get("M"), q.get("width"))
            rows.append((query, complexity_rate(query)))
        elif kind == "minimax-l1":
            extra.append({**q, **minimax_rate_l1(q["rho"], q["sigma"], q["N"], q["d"]).to_dict()})
        elif kind == "combined":
            extra.append({**q, **combined_rate(q["s"], q["rho"], q["sigma"], q["N"], q["d"]).to_dict()})
        else:
            raise ConfigError(f"unknown rate {kind!r}")
    write_rate_table(rows, os.path.join(args.out_dir, "rates.csv"))
    dump_json(extra, os.path.join(args.out_dir, "rates_other.json"))
    print(f"{len(rows) + len(extra)} rates written")
    return EXIT_OK


def cmd_diagnose(cfg: dict, args) -> int:
    shape = _shape(cfg)
    design = DesignSpec.from_dict(cfg.get("design", {"law": "gaussian-isotropic"}), shape)
    n = int(cfg.get("samples", 100_000))
    rng = np.random.default_rng(args.seed)
    X = design.sample(n, rng)
    sb = estimate_small_ball(X, float(cfg.get("kappa", 0.5)), int(cfg.get("directions", 50)), args.seed, covariance=design.covariance_matrix())
    mg = moment_growth_diagnostic(X, cfg.get("p0"), float(cfg.get("a", 1.0)))
    dump_json({"small_ball": sb.to_dict(), "moment_growth": mg.to_dict()}, os.path.join(args.out_dir, "diagnose.json"))
    print(f"eps_hat = {sb.eps_hat:.4f}; moment growth: {mg.status}")
    return EXIT_OK


def cmd_sweep(cfg: dict, args) -> int:
    cfg = dict(cfg)
    cfg["master_seed"] = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    cfg["records_csv"] = os.path.join(args.out_dir, "records.csv")
    sc = SweepConfig.from_dict(cfg)
    recs = run_sweep(sc, threads=args.threads)
    failed = sum(r.status != CONVERGED for r in recs)
    if cfg.get("report", True):
        emit_report(recs, theory_rates(sc, cfg.get("rate_kind", "bound")), os.path.join(args.out_dir, "report"))
    print(f"{len(recs)} records, {failed} not converged")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(cfg: dict, args) -> int:
    sc = SweepConfig.from_dict(cfg)
    path = cfg.get("records_csv") or os.path.join(args.out_dir, "records.csv")
    recs = read_records_csv(path)
    summary = emit_report(recs, theory_rates(sc, cfg.get("rate_kind", "bound")), os.path.join(args.out_dir, "report"))
    print(f"report for {summary['n_cells']} cells")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "calibrate": cmd_calibrate,
    "rates": cmd_rates,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


HELP = {
    "solve": "fit one synthetic instance and write solution.json",
    "calibrate": "compute lambda and fixed points, optionally Monte Carlo widths",
    "rates": "evaluate theoretical rate formulas",
    "diagnose": "small-ball and moment-growth diagnostics for a design",
    "sweep": "run a grid of trials and write records.csv plus a report",
    "report": "summarize an existing records.csv",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rerm", description="Regularized least squares experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="random seed (default: from config, else 0)")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if args.seed is None and args.command != "sweep":
            args.seed = int(cfg.get("seed", 0))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(args.out_dir, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, KeyError, TypeError, ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
