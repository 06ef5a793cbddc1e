import csv
import dataclasses

import numpy as np
import pytest

import oracles
from rerm.model import DesignSpec, NoiseSpec, ProblemInstance, Shape, TargetSpec, generate_dataset
from rerm.regularizers import RegularizerDescriptor as R
from rerm.regularizers import dual_norm, psi_value
from rerm.solver import CONVERGED, SolverConfig, empirical_objective, solve_constrained, solve_rerm


def instance(d=8, N=60, seed=0, scale=0.5, matrix=None):
    shape = Shape.matrix(*matrix) if matrix else Shape.vector(d)
    D = shape.D
    t = np.zeros(D)
    t[:2] = [1.5, -1.0]
    return generate_dataset(DesignSpec("gaussian-isotropic", shape), TargetSpec("sparse", t), NoiseSpec("gaussian", scale), N, seed)


CASES = [
    ("l1", R.l1(), None),
    ("lp1.5", R.lp(1.5), None),
    ("lp-inf", R.lp(np.inf), None),
    ("slope", R.slope(np.linspace(2, 0.5, 8)), None),
    ("mmp-groups", R.mmp_groups([[0, 1, 2], [3, 4], [5, 6, 7]]), None),
    ("schatten1", R.schatten(1, 2, 4), (2, 4)),
    ("schatten3", R.schatten(3, 2, 4), (2, 4)),
]
LMO_ONLY = [
    ("max-norm", R.max_norm(2, 4), (2, 4)),
    ("atomic", R.atomic(np.vstack([np.eye(8), -np.eye(8), np.full((1, 8), 0.4), np.full((1, 8), -0.4)])), None),
    ("weak-lp", R.weak_lp(0.5, 4.0), None),
]
IDS = [c[0] for c in CASES]


@pytest.mark.parametrize("name,reg,mat", CASES, ids=IDS)
def test_large_lambda_gives_zero(name, reg, mat):
    inst = instance(matrix=mat)
    lam_max = dual_norm(reg, 2 / inst.N * inst.X.T @ inst.Y)
    sol = solve_rerm(inst, reg, 1.01 * lam_max)
    assert sol.status == CONVERGED
    np.testing.assert_allclose(sol.t_hat, 0, atol=1e-8)


def test_lambda_zero_is_least_squares():
    inst = instance(d=10, N=80)
    sol = solve_rerm(inst, R.l1(), 0.0)
    assert sol.status == CONVERGED
    np.testing.assert_allclose(sol.t_hat, oracles.least_squares(inst.X, inst.Y), atol=1e-6)


@pytest.mark.parametrize("name,reg,mat", CASES + LMO_ONLY, ids=IDS + [c[0] for c in LMO_ONLY])
def test_objective_not_above_truth(name, reg, mat):
    inst = instance(matrix=mat)
    lam = 0.1
    sol = solve_rerm(inst, reg, lam)
    assert sol.objective <= empirical_objective(inst, reg, lam, inst.t_star) + 1e-7
    assert sol.objective == pytest.approx(empirical_objective(inst, reg, lam, sol.t_hat), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("name,reg,mat", CASES, ids=IDS)
def test_converged_certificate_within_tolerance(name, reg, mat):
    sol = solve_rerm(instance(matrix=mat), reg, 0.05)
    assert sol.status == CONVERGED
    assert sol.certificate <= sol.tolerance
    assert sol.certificate_trace[-1] == sol.certificate


@pytest.mark.parametrize("name,reg,mat", CASES, ids=IDS)
def test_trace_is_monotone(name, reg, mat):
    sol = solve_rerm(instance(matrix=mat), reg, 0.05)
    tr = np.array(sol.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12 * np.maximum(1, np.abs(tr[:-1])))


@pytest.mark.parametrize("name,reg,mat", CASES, ids=IDS)
def test_scale_equivariance(name, reg, mat):
    inst = instance(matrix=mat)
    base = solve_rerm(inst, reg, 0.05)
    for c in (0.5, 2.0):
        scaled = ProblemInstance(inst.X, c * inst.Y, inst.design, inst.target.scaled(c), inst.noise, inst.seed)
        sol = solve_rerm(scaled, reg, c * 0.05)
        np.testing.assert_allclose(sol.t_hat, c * base.t_hat, atol=1e-5 * c)


@pytest.mark.parametrize("name,reg,mat", CASES, ids=IDS)
def test_penalized_and_constrained_agree(name, reg, mat):
    # the penalized solution solves the constrained problem at its own radius
    inst = instance(matrix=mat)
    lam = 0.1
    pen = solve_rerm(inst, reg, lam, SolverConfig(cert_tol=1e-10))
    radius = psi_value(reg, pen.t_hat)
    con = solve_constrained(inst, reg, radius, SolverConfig(cert_tol=1e-10))
    assert con.status == CONVERGED
    f_pen = empirical_objective(inst, reg, 0.0, pen.t_hat)
    assert con.objective == pytest.approx(f_pen, abs=1e-5)
    np.testing.assert_allclose(con.t_hat, pen.t_hat, atol=1e-3)


@pytest.mark.parametrize("name,reg,mat", CASES + LMO_ONLY, ids=IDS + [c[0] for c in LMO_ONLY])
def test_constrained_feasibility_and_edge_radii(name, reg, mat):
    inst = instance(matrix=mat)
    zero = solve_constrained(inst, reg, 0.0)
    np.testing.assert_array_equal(zero.t_hat, 0)
    sol = solve_constrained(inst, reg, 1.2)
    assert sol.status == CONVERGED
    assert psi_value(reg, sol.t_hat) <= 1.2 * (1 + 1e-9)
    assert sol.certificate <= sol.tolerance


@pytest.mark.parametrize("name,reg,mat", CASES + LMO_ONLY, ids=IDS + [c[0] for c in LMO_ONLY])
def test_large_radius_is_least_squares(name, reg, mat):
    inst = instance(matrix=mat, N=80)
    ls = oracles.least_squares(inst.X, inst.Y)
    sol = solve_constrained(inst, reg, 10 * psi_value(reg, ls), SolverConfig(cert_tol=1e-12, max_iter=20000))
    f_ls = empirical_objective(inst, reg, 0.0, ls)
    assert sol.objective - f_ls <= 1e-4 * max(1, f_ls)


def test_weak_lp_constrained():
    inst = instance()
    reg = R.weak_lp(0.5, 4.0)
    sol = solve_constrained(inst, reg, 1.5)
    assert sol.status == CONVERGED
    assert psi_value(reg, sol.t_hat) <= 1.5 * (1 + 1e-9)
    assert sol.objective <= empirical_objective(inst, reg, 0.0, np.zeros(8))


@pytest.mark.parametrize("name,reg,mat", LMO_ONLY, ids=[c[0] for c in LMO_ONLY])
def test_lmo_only_penalized_is_flagged_approximate(name, reg, mat):
    inst = instance(matrix=mat)
    sol = solve_rerm(inst, reg, 0.1)
    assert sol.approximate
    # the approximate answer is no worse than zero or the truth
    assert sol.objective <= empirical_objective(inst, reg, 0.1, np.zeros(inst.X.shape[1])) + 1e-9
    assert sol.objective <= empirical_objective(inst, reg, 0.1, inst.t_star) + 1e-4


def test_iteration_cap_is_reported():
    inst = instance()
    sol = solve_rerm(inst, R.l1(), 0.01, SolverConfig(max_iter=2))
    assert sol.status == "iteration-cap"
    assert sol.certificate > sol.tolerance


def test_invalid_inputs():
    inst = instance()
    with pytest.raises(ValueError):
        solve_rerm(inst, R.l1(), -1.0)
    with pytest.raises(ValueError):
        solve_rerm(inst, R.l1(), np.nan)
    with pytest.raises(ValueError):
        solve_constrained(inst, R.l1(), -1.0)
    X = np.array(inst.X)
    X[0, 0] = np.nan
    bad = ProblemInstance(X, inst.Y, inst.design, inst.target, inst.noise, 0)
    with pytest.raises(ValueError):
        solve_rerm(bad, R.l1(), 0.1)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)


def test_trace_csv(tmp_path):
    sol = solve_rerm(instance(), R.l1(), 0.1)
    path = tmp_path / "trace.csv"
    sol.write_trace_csv(path)
    rows = list(csv.reader(open(path)))
    assert len(rows) == len(sol.objective_trace) + 1
    assert float(rows[-1][1]) == pytest.approx(sol.objective_trace[-1])


def test_warm_start_is_used():
    inst = instance()
    cold = solve_rerm(inst, R.l1(), 0.05)
    warm = solve_rerm(inst, R.l1(), 0.05, x0=cold.t_hat)
    assert warm.iterations <= cold.iterations
    np.testing.assert_allclose(warm.t_hat, cold.t_hat, atol=1e-6)


def test_config_from_dict_ignores_unknown():
    cfg = SolverConfig.from_dict({"max_iter": 10, "other": 1})
    assert dataclasses.replace(cfg, max_iter=5000) == SolverConfig()
