"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (a pass/fail line per criterion
is printed in the terminal summary) or directly as a script.
"""

import functools
import math
import time

import numpy as np
import pytest
from scipy.stats import norm

import oracles
from rerm.calibration import estimate_small_ball, excess_loss_decomposition, lambda_rerm, moment_growth_diagnostic
from rerm.model import DesignSpec, NoiseSpec, ProblemInstance, Shape, TargetSpec, generate_dataset, population_error
from rerm.regularizers import RegularizerDescriptor as R
from rerm.regularizers import dual_norm, estimate_mean_width_mc, prox, psi_value
from rerm.report import cell_summary, theory_rates
from rerm.solver import solve_rerm
from rerm.sweep import SweepConfig, fit_scaling_exponent, run_sweep

PROX_CASES = [
    ("l1", R.l1(), 6, {}),
    ("lp1.5", R.lp(1.5), 5, {"p": 1.5}),
    ("lp3", R.lp(3), 5, {"p": 3.0}),
    ("lp-inf", R.lp(np.inf), 5, {"p": np.inf}),
    ("slope", R.slope([2.5, 2.0, 1.2, 1.2, 0.5, 0.1]), 6, {"weights": [2.5, 2.0, 1.2, 1.2, 0.5, 0.1]}),
    ("mmp-orthant", R.mmp_orthant(), 6, {}),
    ("mmp-groups", R.mmp_groups([[0, 1], [2, 3, 4], [5]]), 6, {"groups": [[0, 1], [2, 3, 4], [5]]}),
    ("schatten1", R.schatten(1, 2, 3), 6, {"p": 1.0, "m": 2, "T": 3}),
    ("schatten2", R.schatten(2, 2, 3), 6, {"p": 2.0, "m": 2, "T": 3}),
    ("schatten3", R.schatten(3, 2, 3), 6, {"p": 3.0, "m": 2, "T": 3}),
]


def test_criterion_1_prox_certificates(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    tol = 1e-8
    worst = {"subgradient": 0.0, "moreau": 0.0}
    for name, reg, d, params in PROX_CASES:
        for _ in range(1000):
            v = rng.standard_normal(d) * rng.choice([0.1, 1.0, 5.0])
            tau = float(rng.uniform(0.05, 3.0))
            x = prox(reg, v, tau)
            g = (v - x) / tau
            scale = max(1.0, float(np.linalg.norm(v)))
            # g in the subdifferential at x: dual norm <= 1 and <g, x> = Psi(x)
            worst["subgradient"] = max(
                worst["subgradient"],
                max(dual_norm(reg, g) - 1.0, 0.0),
                abs(g @ x - psi_value(reg, x)) / scale,
            )
            z = rng.standard_normal(d) * 3
            worst["subgradient"] = max(worst["subgradient"], (psi_value(reg, x) + g @ (z - x) - psi_value(reg, z)) / scale)
            kind = reg.kind if reg.kind != "mmp-cone" else ("mmp-groups" if "groups" in reg.params else "mmp-orthant")
            proj = oracles.project_dual_ball(kind, v / tau, **params)
            worst["moreau"] = max(worst["moreau"], float(np.linalg.norm(v - x - tau * proj)) / scale)
    slope_err = 0.0
    for d in range(1, 6):
        for _ in range(20):
            w = np.sort(rng.uniform(0.1, 2.0, d))[::-1]
            v = rng.standard_normal(d) * 2
            tau = float(rng.uniform(0.1, 1.5))
            slope_err = max(slope_err, float(np.max(np.abs(prox(R.slope(w), v, tau) - oracles.slope_prox_bruteforce(v, w, tau)))))
    elapsed = time.perf_counter() - start
    ok = worst["subgradient"] <= tol and worst["moreau"] <= tol and slope_err <= 1e-6 and elapsed < 60
    acceptance(
        1, "prox certificates", ok,
        f"max subgradient violation {worst['subgradient']:.2e}, max Moreau residual {worst['moreau']:.2e}, "
        f"SLOPE vs brute force {slope_err:.2e}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_2_width_growth(acceptance):
    start = time.perf_counter()
    l1 = []
    for d in (100, 1000, 10000):
        est = estimate_mean_width_mc(R.l1(), Shape.vector(d), 100_000, d)
        l1.append(est.value / math.sqrt(2 * math.log(d)))
    sch = []
    for m in (10, 20, 40):
        est = estimate_mean_width_mc(R.schatten(1, m, m), Shape.matrix(m, m), 2000, m)
        sch.append(est.value / math.sqrt(2 * m))
    elapsed = time.perf_counter() - start
    ok = all(0.7 <= r <= 1.3 for r in l1) and max(sch) / min(sch) < 2 and elapsed < 120
    acceptance(
        2, "width growth rates", ok,
        f"l1 ratios {np.round(l1, 3).tolist()}, S1 ratios {np.round(sch, 3).tolist()} "
        f"(spread {max(sch) / min(sch):.3f}), {elapsed:.1f}s",
    )
    assert ok


LASSO_N = tuple(range(50, 301, 25))


@functools.lru_cache(maxsize=None)
def lasso_sweeps():
    """Criterion-3 sweeps, shared with criteria 8 and 9."""
    start = time.perf_counter()
    by_n = SweepConfig(
        N_values=LASSO_N, dims=(400,), rho_values=(5.0,), trials_per_cell=20, regularizer=R.l1(),
        target={"kind": "dense-decay"}, noise={"law": "gaussian", "scale": 1.0}, master_seed=2024,
    )
    by_rho = SweepConfig(
        N_values=(200,), dims=(400,), rho_values=(1.0, 2.0, 4.0, 8.0), trials_per_cell=20, regularizer=R.l1(),
        target={"kind": "dense-decay"}, noise={"law": "gaussian", "scale": 1.0}, master_seed=2025,
    )
    recs_n, recs_rho = run_sweep(by_n), run_sweep(by_rho)
    return by_n, recs_n, by_rho, recs_rho, time.perf_counter() - start


def literal_lambda_slopes():
    """Exponents when lambda uses the noise standard deviation instead of its L4 norm."""
    c_user = 1.0 / NoiseSpec("gaussian", 1.0).sigma_q
    slopes = []
    for axis, grid, seed in (("N", {"N_values": LASSO_N, "rho_values": (5.0,)}, 2024), ("rho", {"N_values": (200,), "rho_values": (1.0, 2.0, 4.0, 8.0)}, 2025)):
        cfg = SweepConfig(dims=(400,), trials_per_cell=20, regularizer=R.l1(), master_seed=seed, constants={"c_user": c_user}, **grid)
        slopes.append(fit_scaling_exponent(run_sweep(cfg), axis).slope)
    return slopes


def test_criterion_3_lasso_exponents(acceptance):
    _, recs_n, _, recs_rho, elapsed = lasso_sweeps()
    fit_n = fit_scaling_exponent(recs_n, "N")
    fit_rho = fit_scaling_exponent(recs_rho, "rho")
    ok = -0.65 <= fit_n.slope <= -0.35 and 0.7 <= fit_rho.slope <= 1.3 and elapsed < 300
    lit_n, lit_rho = literal_lambda_slopes()
    acceptance(
        3, "LASSO complexity-rate exponents", ok,
        f"slope vs N {fit_n.slope:.3f} (stderr {fit_n.stderr:.3f}), slope vs rho {fit_rho.slope:.3f}, "
        f"lambda at N=200 {recs_rho[0].lam:.4f}, {elapsed:.1f}s; "
        f"not gated, with lambda = sigma*sqrt(log d/N): slope vs N {lit_n:.3f}, slope vs rho {lit_rho:.3f}",
    )
    assert ok


def test_criterion_4_sparse_vs_spread(acceptance):
    d, N, rho = 400, 200, 5.0
    design = DesignSpec("gaussian-isotropic", Shape.vector(d))
    noise = NoiseSpec("gaussian", 1.0)
    spread, sparse = TargetSpec.dense_spread(d, rho), TargetSpec.sparse(d, 1, rho)
    lam = float(lambda_rerm(R.l1(), design.shape, N, noise.sigma_q))
    wins = 0
    for trial in range(20):
        seed = 1000 + trial
        errs = []
        for tgt in (spread, sparse):
            inst = generate_dataset(design, tgt, noise, N, seed)
            errs.append(population_error(solve_rerm(inst, R.l1(), lam).t_hat, tgt.t_star, design))
        wins += errs[0] > errs[1]
    ok = wins >= 16
    acceptance(4, "sparsity/complexity ordering", ok, f"spread error exceeds sparse error in {wins}/20 paired trials")
    assert ok


def test_criterion_5_small_ball(acceptance):
    start = time.perf_counter()
    rep = estimate_small_ball(DesignSpec("gaussian-isotropic", Shape.vector(10)), 0.5, 50, seed=5, samples=100_000)
    exact = 2 * norm.cdf(-0.5)
    elapsed = time.perf_counter() - start
    ok = abs(rep.eps_hat - exact) <= 0.02 and elapsed < 30
    acceptance(5, "small-ball oracle", ok, f"eps_hat {rep.eps_hat:.4f} vs {exact:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_6_moment_diagnostic(acceptance):
    start = time.perf_counter()
    outcomes = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        heavy = moment_growth_diagnostic(rng.standard_t(4, size=(100_000, 1)), p0=6)
        gauss = moment_growth_diagnostic(rng.standard_normal((100_000, 1)), p0=8)
        rad = moment_growth_diagnostic(rng.choice([-1.0, 1.0], size=(100_000, 1)), p0=8)
        outcomes.append((heavy.violated, not gauss.violated, not rad.violated))
    elapsed = time.perf_counter() - start
    ok = all(all(o) for o in outcomes) and elapsed < 60
    acceptance(
        6, "moment diagnostic discrimination", ok,
        f"t(4) flagged {sum(o[0] for o in outcomes)}/5, Gaussian passed {sum(o[1] for o in outcomes)}/5, "
        f"Rademacher passed {sum(o[2] for o in outcomes)}/5, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_7_decomposition_identity(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    base = generate_dataset(DesignSpec("gaussian-isotropic", Shape.vector(2)), TargetSpec.sparse(2, 1, 1.0), NoiseSpec(), 2, 0)
    worst = 0.0
    for i in range(1000):
        N, D = int(rng.integers(1, 60)), int(rng.integers(1, 12))
        design = DesignSpec("gaussian-isotropic", Shape.vector(D))
        inst = ProblemInstance(rng.standard_normal((N, D)), rng.standard_normal(N) * 5, design, base.target, base.noise, i)
        t, ts = rng.standard_normal(D) * 3, rng.standard_normal(D) * 3
        z = excess_loss_decomposition(inst, t, ts)
        direct = np.mean((inst.Y - inst.X @ t) ** 2 - (inst.Y - inst.X @ ts) ** 2)
        worst = max(worst, abs(z.PN_L - (z.PN_Q - 2 * z.PN_M)), abs(z.PN_L - direct) / max(1.0, abs(direct)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    acceptance(7, "decomposition identity", ok, f"max residual {worst:.2e} over 1000 instances, {elapsed:.1f}s")
    assert ok


def test_criterion_8_objective_nonpositivity(acceptance):
    _, recs_n, _, recs_rho, _ = lasso_sweeps()
    recs = recs_n + recs_rho
    # the solver's relative objective tolerance bounds how far above the optimum it may stop
    violations = sum(r.objective_hat > r.objective_star + 1e-9 * max(1.0, abs(r.objective_star)) for r in recs)
    ok = violations == 0 and all(r.status == "converged" for r in recs)
    acceptance(8, "objective at estimate below objective at target", ok, f"{violations} violations over {len(recs)} trials")
    assert ok


def test_criterion_9_bound_shape(acceptance):
    cfg, recs_n, _, _, _ = lasso_sweeps()
    rows = cell_summary(recs_n, theory_rates(cfg, "bound"))
    ratios = np.array([r["ratio"] for r in rows])
    spread = float(ratios.max() / ratios.min())
    ok = spread < 3
    acceptance(9, "constant stability of the error bound", ok, f"measured/bound ratio max/min {spread:.3f} across N")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
