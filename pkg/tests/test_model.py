import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from oracles import gaussian_abs_moment
from rerm.errors import MomentAssumptionError, ShapeMismatchError
from rerm.model import (
    DesignSpec,
    NoiseSpec,
    ProblemInstance,
    Shape,
    TargetSpec,
    generate_dataset,
    population_error,
)


def iso(d):
    return DesignSpec("gaussian-isotropic", Shape.vector(d))


def test_seeded_generation_is_bit_identical():
    args = (iso(7), TargetSpec.sparse(7, 2, 1.5), NoiseSpec("student-t", 1.0, q=4, dof=6), 50, 123)
    a, b = generate_dataset(*args), generate_dataset(*args)
    assert a.X.tobytes() == b.X.tobytes()
    assert a.Y.tobytes() == b.Y.tobytes()
    c = generate_dataset(*args[:-1], 124)
    assert c.X.tobytes() != a.X.tobytes()


@pytest.mark.parametrize("law,kw", [("gaussian-isotropic", {}), ("rademacher", {}), ("student-t", {"dof": 5})])
def test_noise_free_response_is_exact(law, kw):
    d = 4
    t = np.zeros(d)
    t[0] = 1.0
    inst = generate_dataset(DesignSpec(law, Shape.vector(d), **kw), TargetSpec("sparse", t), NoiseSpec("none"), 30, 1)
    np.testing.assert_array_equal(inst.Y, inst.X[:, 0])
    assert inst.sigma_q == 0


def test_gaussian_empirical_covariance_near_identity():
    inst = generate_dataset(iso(10), TargetSpec.sparse(10, 1, 1.0), NoiseSpec("none"), 100_000, 5)
    S = inst.X.T @ inst.X / inst.N
    assert np.max(np.abs(S - np.eye(10))) < 0.05


@pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
def test_gaussian_coordinate_moments_match_formula(q):
    rng = np.random.default_rng(q)
    x = iso(1).sample(1_000_000, rng)[:, 0]
    emp = np.mean(np.abs(x) ** q)
    assert abs(emp / gaussian_abs_moment(q) - 1) < 0.05


def test_student_t_design_has_unit_variance():
    rng = np.random.default_rng(0)
    x = DesignSpec("student-t", Shape.vector(3), dof=6).sample(400_000, rng)
    assert np.allclose(x.var(axis=0), 1.0, atol=0.03)


def test_student_t_noise_needs_dof_above_q():
    with pytest.raises(MomentAssumptionError):
        NoiseSpec("student-t", 1.0, q=4, dof=4)
    with pytest.raises(MomentAssumptionError):
        NoiseSpec("student-t", 1.0, q=4, dof=3)


def test_sigma_q_closed_forms():
    g = NoiseSpec("gaussian", 2.0, q=4)
    assert g.sigma_q == pytest.approx(2.0 * 3 ** 0.25)
    # E|T|^q for T ~ t(nu), then rescaled to unit variance
    nu, q = 7.0, 4.0
    m = nu ** (q / 2) * gamma((q + 1) / 2) * gamma((nu - q) / 2) / (np.sqrt(np.pi) * gamma(nu / 2))
    t = NoiseSpec("student-t", 1.0, q=q, dof=nu)
    assert t.sigma_q == pytest.approx(np.sqrt((nu - 2) / nu) * m ** (1 / q))
    rng = np.random.default_rng(1)
    xi = t.sample(2_000_000, rng)
    assert np.mean(np.abs(xi) ** q) ** (1 / q) == pytest.approx(t.sigma_q, rel=0.05)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatchError):
        generate_dataset(iso(5), TargetSpec.sparse(4, 1, 1.0), NoiseSpec(), 10, 0)
    with pytest.raises(ShapeMismatchError):
        population_error(np.zeros(3), np.zeros(4), iso(4))


def test_population_error_examples():
    d = iso(6)
    t = np.arange(6.0)
    assert population_error(t, t, d) == 0
    u = np.random.default_rng(3).standard_normal(6)
    assert population_error(u, np.zeros(6), d) == pytest.approx(u @ u)
    cov = np.diag([4.0, 1.0])
    dd = DesignSpec("explicit-covariance", Shape.vector(2), covariance=cov)
    assert population_error(np.array([1.0, 1.0]), np.zeros(2), dd) == pytest.approx(5.0)
    # Monte Carlo check of E<X,u>^2
    X = dd.sample(400_000, np.random.default_rng(0))
    assert np.mean((X @ np.ones(2)) ** 2) == pytest.approx(5.0, rel=0.02)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_population_error_is_psd_form(a, b):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 2))
    cov = A @ A.T  # rank deficient on purpose
    dd = DesignSpec("explicit-covariance", Shape.vector(3), covariance=cov)
    val = population_error(np.array(a), np.array(b), dd)
    assert val >= 0
    null = np.linalg.svd(cov)[2][-1]
    assert population_error(np.array(b) + 3 * null, np.array(b), dd) == pytest.approx(0, abs=1e-10)


def test_targets():
    t = TargetSpec.sparse(10, 3, 2.0)
    assert np.count_nonzero(t.t_star) == 3
    s = TargetSpec.dense_spread(8, 4.0)
    assert np.all(np.abs(s.t_star) == 0.5)
    dd = TargetSpec.dense_decay(100, 5.0)
    assert np.abs(dd.t_star).sum() == pytest.approx(5.0)
    assert np.all(dd.t_star > 0) and np.all(np.diff(dd.t_star) < 0)
    lr = TargetSpec.low_rank(4, 5, 2, 1.0, seed=3)
    assert np.linalg.matrix_rank(lr.t_star.reshape(4, 5)) == 2


def test_misspecified_target_best_linear_predictor():
    t0 = np.array([1.0, -0.5, 0.0])
    tgt = TargetSpec.misspecified_quadratic(t0, curvature=0.7)
    inst = generate_dataset(iso(3), tgt, NoiseSpec("none"), 200_000, 4)
    ls = np.linalg.lstsq(inst.X, inst.Y, rcond=None)[0]
    assert np.allclose(ls, t0, atol=0.02)
    assert not np.allclose(inst.Y, inst.X @ t0)


def test_json_round_trip():
    inst = generate_dataset(
        DesignSpec("gaussian-isotropic", Shape.matrix(2, 3)), TargetSpec.low_rank(2, 3, 1), NoiseSpec("gaussian", 0.5), 5, 9
    )
    obj = json.loads(inst.to_json())
    assert set(obj) == {"shape", "design", "target", "noise", "N", "seed", "X", "Y"}
    back = ProblemInstance.from_json(inst.to_json())
    np.testing.assert_array_equal(back.X, inst.X)
    np.testing.assert_array_equal(back.Y, inst.Y)
    assert back.shape == inst.shape and back.seed == 9
    assert back.noise.sigma_q == inst.noise.sigma_q


def test_instances_are_read_only():
    inst = generate_dataset(iso(3), TargetSpec.sparse(3, 1, 1.0), NoiseSpec(), 4, 0)
    with pytest.raises(ValueError):
        inst.X[0, 0] = 1.0


def test_invalid_specs():
    with pytest.raises(ValueError):
        Shape.vector(0)
    with pytest.raises(ValueError):
        DesignSpec("student-t", Shape.vector(2), dof=2)
    with pytest.raises(ValueError):
        DesignSpec("explicit-covariance", Shape.vector(2), covariance=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        generate_dataset(iso(2), TargetSpec.sparse(2, 1, 1.0), NoiseSpec(), 0, 0)
