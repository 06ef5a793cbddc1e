"""Per-cell summaries of sweep records against theoretical rates."""

from __future__ import annotations

import csv
import json
import os
import shutil
import tempfile
from typing import Mapping, Sequence

import numpy as np

from .calibration import CalibrationConstants, fixed_point_r, lambda_rerm
from .model import NoiseSpec
from .rates import RateEstimate, RateQuery, complexity_rate
from .sweep import SweepConfig, SweepRecord, fit_scaling_exponent, shape_of

CELL_COLUMNS = ["cell", "d", "N", "rho", "lam", "n_trials", "n_ok", "median", "q25", "q75", "rate", "regime", "ratio"]


def theory_rates(config: SweepConfig, kind: str = "bound") -> dict:
    """Theoretical value per cell index.

    ``bound`` is max(r^2(10 eta rho), lam rho) with the calibrated lambda;
    ``complexity`` is the complexity-dependent rate.
    """
    reg = config.regularizer
    sigma_q = NoiseSpec.from_dict(config.noise).sigma_q
    consts = CalibrationConstants(**{"eta": reg.eta, **config.constants, "sigma_q": sigma_q})
    out = {}
    for c, (dim, N, rho, lam_fixed) in enumerate(config.cells()):
        shape = shape_of(dim)
        if kind == "complexity":
            out[c] = complexity_rate(RateQuery(reg, shape, int(N), sigma_q, float(rho)))
            continue
        lam = lam_fixed
        if lam is None:
            lam = float(lambda_rerm(reg, shape, int(N), sigma_q, consts, track=config.lambda_policy.track))
        fp = fixed_point_r(reg, shape, 10 * reg.eta * rho, int(N), consts)
        val = max(fp.r_squared, lam * rho)
        regime = fp.regime if fp.r_squared >= lam * rho else "lambda*rho"
        out[c] = RateEstimate(float(val), regime, "bound:max(r^2(10*eta*rho),lam*rho)")
    return out


def cell_summary(records: Sequence[SweepRecord], rates: Mapping[int, RateEstimate]) -> list:
    cells = {}
    for r in records:
        cells.setdefault(r.cell, []).append(r)
    rows = []
    for c in sorted(cells):
        recs = cells[c]
        errs = np.array([r.error for r in recs if np.isfinite(r.error)])
        first = recs[0]
        rate = rates.get(c)
        row = {
            "cell": c,
            "d": first.d,
            "N": first.N,
            "rho": first.rho,
            "lam": first.lam,
            "n_trials": len(recs),
            "n_ok": int(errs.size),
            "median": float(np.median(errs)) if errs.size else float("nan"),
            "q25": float(np.quantile(errs, 0.25)) if errs.size else float("nan"),
            "q75": float(np.quantile(errs, 0.75)) if errs.size else float("nan"),
            "rate": float("nan") if rate is None else _value(rate),
            "regime": "" if rate is None or not hasattr(rate, "regime") else rate.regime,
        }
        row["ratio"] = row["median"] / row["rate"] if row["rate"] and np.isfinite(row["rate"]) else float("nan")
        rows.append(row)
    return rows


def _value(rate) -> float:
    return float(rate.value if hasattr(rate, "value") else rate)


def _slopes(records, axis, other_keys):
    """Fit one slope per group of records sharing the other grid values."""
    groups = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in other_keys), []).append(r)
    out = []
    for key, recs in sorted(groups.items()):
        try:
            fit = fit_scaling_exponent(recs, axis)
        except ValueError:
            continue
        out.append({**dict(zip(other_keys, key)), "axis": axis, "slope": fit.slope, "stderr": fit.stderr, "n_points": fit.n_points})
    return out


def emit_report(records: Sequence[SweepRecord], rates: Mapping[int, RateEstimate], path) -> dict:
    """Write cells.csv, summary.json and two-column curve files under ``path``.

    Files are assembled in a temporary directory and moved into place, so a
    failure leaves no partial report behind. Returns the summary.
    """
    rows = cell_summary(records, rates)
    ratios = np.array([r["ratio"] for r in rows if np.isfinite(r["ratio"]) and r["ratio"] > 0])
    summary = {
        "n_records": len(records),
        "n_cells": len(rows),
        "slopes_vs_N": _slopes(records, "N", ("d", "rho")),
        "slopes_vs_rho": _slopes(records, "rho", ("d", "N")),
        "ratio_max_over_min": float(ratios.max() / ratios.min()) if ratios.size else None,
        "convention": "theoretical rates up to constants",
    }
    os.makedirs(path, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".report-", dir=path)
    try:
        with open(os.path.join(tmp, "cells.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CELL_COLUMNS)
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        with open(os.path.join(tmp, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        cdir = os.path.join(tmp, "curves")
        os.makedirs(cdir)
        curves = {}
        for r in rows:
            curves.setdefault((r["d"], r["rho"]), []).append(r)
        for (d, rho), rs in sorted(curves.items()):
            rs = sorted(rs, key=lambda r: r["N"])
            stem = f"d{d}_rho{rho:g}"
            for col in ("median", "rate"):
                with open(os.path.join(cdir, f"{stem}_{col}_vs_N.dat"), "w") as fh:
                    for r in rs:
                        fh.write(f"{r['N']} {r[col]!r}\n")
        for name in os.listdir(tmp):
            dest = os.path.join(path, name)
            if os.path.isdir(dest):
                shutil.rmtree(dest)
            os.replace(os.path.join(tmp, name), dest)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return summary
