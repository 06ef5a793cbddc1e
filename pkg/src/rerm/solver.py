"""Solvers for penalized and constrained least squares.

The empirical loss is f(t) = (1/N) ||Y - X t||^2. Penalized problems add
lam * Psi(t); constrained problems restrict to {Psi(t) <= radius}.

Prox-capable penalties use accelerated proximal gradient (FISTA) with
backtracking, a monotone safeguard and restart. Penalties with only an LMO
use Frank-Wolfe with exact line search on the quadratic; their penalized
form is reached by a golden-section search over the radius.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .model import ProblemInstance
from .regularizers import RegularizerDescriptor, dual_norm, lmo, project_ball, prox, psi_value

CONVERGED = "converged"
ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and tolerances.

    ``rel_tol`` bounds the relative objective change between iterations and
    ``cert_tol`` bounds the optimality certificate, relative to the scale of
    the problem at t = 0 (gradient norm for prox-gradient residuals, loss
    value for Frank-Wolfe gaps).
    """

    max_iter: int = 5000
    rel_tol: float = 1e-9
    cert_tol: float = 1e-7
    shrink: float = 0.5
    growth: float = 1.1
    monotone: bool = True
    restart: bool = True
    radius_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if self.rel_tol <= 0 or self.cert_tol <= 0 or self.radius_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise ConfigError("backtracking shrink must lie in (0, 1)")
        if self.growth < 1:
            raise ConfigError("step growth must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "SolverConfig":
        known = {k: obj[k] for k in cls.__dataclass_fields__ if k in obj}
        return cls(**known)


@dataclass
class Solution:
    """Solver output. ``certificate <= tolerance`` whenever status is converged."""

    t_hat: np.ndarray
    objective_trace: list
    status: str
    certificate: float
    tolerance: float
    iterations: int
    method: str
    approximate: bool = False
    certificate_trace: list = field(default_factory=list)
    lam: Optional[float] = None
    radius: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "certificate"])
            certs = self.certificate_trace or [float("nan")] * len(self.objective_trace)
            for i, (obj, cert) in enumerate(zip(self.objective_trace, certs)):
                w.writerow([i, repr(float(obj)), repr(float(cert))])


class _Quadratic:
    """f(t) = (1/N)||Y - Xt||^2 with its gradient."""

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("data contain non-finite values")
        self.X, self.Y = X, Y
        self.N = X.shape[0]

    def value(self, t):
        r = self.Y - self.X @ t
        return float(r @ r) / self.N

    def grad(self, t):
        return (2.0 / self.N) * (self.X.T @ (self.X @ t - self.Y))

    def curvature(self, d):
        """(1/N)||X d||^2, the second-order coefficient along d."""
        Xd = self.X @ d
        return float(Xd @ Xd) / self.N

    def lipschitz_guess(self):
        # average eigenvalue of the Hessian; backtracking corrects it downward
        return 2.0 * float(np.sum(self.X**2)) / self.N / max(1, min(self.X.shape))


def empirical_objective(instance: ProblemInstance, reg: RegularizerDescriptor, lam: float, t) -> float:
    """(1/N) sum (Y_i - <X_i,t>)^2 + lam * Psi(t)."""
    t = np.asarray(t, dtype=float).ravel()
    r = instance.Y - instance.X @ t
    pen = lam * psi_value(reg, t) if lam > 0 else 0.0
    return float(r @ r) / instance.N + pen


def _accelerated(
    f: _Quadratic,
    x0: np.ndarray,
    step_map: Callable[[np.ndarray, float], np.ndarray],
    penalty: Callable[[np.ndarray], float],
    certificate: Callable[[np.ndarray, float], float],
    tol: float,
    config: SolverConfig,
):
    """FISTA with backtracking. step_map(v, s) applies the prox (or projection)
    of the nonsmooth part with step s. Returns (x, trace, certs, status, cert, iters)."""
    x = x0.copy()
    fx = f.value(x)
    F = fx + penalty(x)
    trace, certs = [F], []
    y, t_mom = x.copy(), 1.0
    s = 1.0 / f.lipschitz_guess() if f.lipschitz_guess() > 0 else 1.0
    status, cert = ITERATION_CAP, np.inf
    it = 0
    for it in range(1, config.max_iter + 1):
        gy = f.grad(y)
        s *= config.growth
        while True:
            z = step_map(y - s * gy, s)
            dz = z - y
            # f is quadratic, so the sufficient-decrease test reduces to a
            # curvature bound that is free of cancellation error
            if f.curvature(dz) <= (dz @ dz) / (2 * s) or not np.any(dz):
                break
            s *= config.shrink
        fz = f.value(z)
        Fz = fz + penalty(z)
        res = float(np.linalg.norm(dz)) / s
        if config.monotone and Fz > F:
            # reject and restart momentum from the current iterate
            trace.append(F)
            certs.append(res)
            if config.restart:
                y, t_mom = x.copy(), 1.0
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t_mom * t_mom))
        if config.restart and not config.monotone and Fz > F:
            t_new = 1.0
        y = z + ((t_mom - 1) / t_new) * (z - x)
        t_mom = t_new
        change = abs(F - Fz)
        x, F = z, Fz
        trace.append(F)
        certs.append(res)
        if change <= config.rel_tol * max(1.0, abs(F)):
            cert = certificate(x, s)
            if cert <= tol:
                status = CONVERGED
                break
    if status != CONVERGED:
        cert = certificate(x, s)
    certs.append(cert)
    return x, trace, certs, status, cert, it


def _frank_wolfe(f: _Quadratic, reg, radius, tol, config: SolverConfig):
    """Conditional gradient with away steps and exact line search.

    The iterate is kept as a convex combination of LMO vertices, started at
    0 = (v - v) / 2, which lies in every symmetric ball.
    """
    D = f.X.shape[1]
    x = np.zeros(D)
    fx = f.value(x)
    trace, certs = [fx], []
    status, gap = ITERATION_CAP, np.inf
    v0 = lmo(reg, -f.grad(x), radius)
    if not np.any(v0):
        return x, trace, [0.0], CONVERGED, 0.0, 0
    active = {v0.tobytes(): [v0, 0.5], (-v0).tobytes(): [-v0, 0.5]}
    it = 0
    for it in range(1, config.max_iter + 1):
        g = f.grad(x)
        sv = lmo(reg, -g, radius)
        gap = float(g @ (x - sv))
        certs.append(gap)
        if gap <= tol:
            status = CONVERGED
            trace.append(fx)
            break
        akey = max(active, key=lambda k: g @ active[k][0])
        av, aw = active[akey]
        away_gain = float(g @ (av - x))
        if gap >= away_gain or aw >= 1.0:
            d, gmax, toward = sv - x, 1.0, True
            gain = gap
        else:
            d, gmax, toward = x - av, aw / (1.0 - aw), False
            gain = away_gain
        curv = f.curvature(d)
        gamma = gmax if curv <= 0 else min(gmax, gain / (2.0 * curv))
        if gamma <= 0:
            trace.append(fx)
            continue
        for item in active.values():
            item[1] *= (1 - gamma) if toward else (1 + gamma)
        if toward:
            key = sv.tobytes()
            if key in active:
                active[key][1] += gamma
            else:
                active[key] = [sv, gamma]
        else:
            active[akey][1] -= gamma
        active = {k: v for k, v in active.items() if v[1] > 1e-14}
        x = sum(w * v for v, w in active.values())
        fx_new = f.value(x)
        fx = min(fx, fx_new) if config.monotone else fx_new
        trace.append(fx)
    return x, trace, certs, status, gap, it


def _weak_lp_projection(v: np.ndarray, p: float, radius: float) -> np.ndarray:
    """Exact Euclidean projection onto the (nonconvex) set {||t||_{p,inf} <= radius}.

    Pairing the largest caps with the largest |v_i| is optimal by the
    rearrangement inequality for the convex cost (|v| - cap)_+^2.
    """
    order = np.argsort(-np.abs(v), kind="stable")
    caps = radius * np.arange(1.0, v.size + 1) ** (-1.0 / p)
    out = np.empty_like(v)
    out[order] = np.minimum(np.abs(v[order]), caps)
    return np.sign(v) * out


def _check_lambda(lam):
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("lambda must be a finite nonnegative number")


def solve_rerm(
    instance: ProblemInstance,
    reg: RegularizerDescriptor,
    lam: float,
    config: SolverConfig = SolverConfig(),
    x0: Optional[np.ndarray] = None,
) -> Solution:
    """Minimize (1/N) sum (Y_i - <X_i,t>)^2 + lam * Psi(t).

    Examples
    --------
    >>> import numpy as np
    >>> from rerm.model import DesignSpec, NoiseSpec, Shape, TargetSpec, generate_dataset
    >>> from rerm.regularizers import RegularizerDescriptor
    >>> inst = generate_dataset(DesignSpec("gaussian-isotropic", Shape.vector(5)),
    ...                         TargetSpec.sparse(5, 1, 1.0), NoiseSpec("none"), 50, 0)
    >>> sol = solve_rerm(inst, RegularizerDescriptor.l1(), 0.01)
    >>> sol.status, bool(abs(sol.t_hat[0] - 1) < 0.01)
    ('converged', True)
    """
    _check_lambda(lam)
    f = _Quadratic(instance.X, instance.Y)
    D = instance.X.shape[1]
    reg.check_dim(D)
    x0 = np.zeros(D) if x0 is None else np.asarray(x0, dtype=float).ravel()
    g0 = f.grad(np.zeros(D))
    tol = config.cert_tol * max(1.0, float(np.linalg.norm(g0)))

    if lam == 0 or reg.capabilities.has_prox:
        if lam == 0:
            step_map = lambda v, s: v  # noqa: E731
            penalty = lambda t: 0.0  # noqa: E731
        else:
            step_map = lambda v, s: prox(reg, v, s * lam)  # noqa: E731
            penalty = lambda t: lam * psi_value(reg, t)  # noqa: E731

        def certificate(x, s):
            return float(np.linalg.norm(x - step_map(x - s * f.grad(x), s))) / s

        x, trace, certs, status, cert, it = _accelerated(f, x0, step_map, penalty, certificate, tol, config)
        return Solution(x, trace, status, cert, tol, it, "fista", False, certs, lam=lam)

    return _penalized_by_radius(instance, reg, lam, config, f)


def _penalized_by_radius(instance, reg, lam, config, f: _Quadratic) -> Solution:
    """Golden-section search on R -> min_{Psi<=R} f + lam * R."""
    f0 = f.value(np.zeros(instance.X.shape[1]))
    hi = f0 / lam
    cache = {}

    def h(R):
        if R not in cache:
            sol = solve_constrained(instance, reg, R, config)
            cache[R] = (sol.objective + lam * R, sol)
        return cache[R][0]

    invphi = (np.sqrt(5) - 1) / 2
    a, b = 0.0, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    total_iters = 0
    while b - a > config.radius_tol * max(hi, 1e-12):
        if h(c) <= h(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
        total_iters += 1
    candidates = [0.0, a, b, c, d]
    best_R = min(candidates, key=h)
    best_val, sol = cache[best_R]
    x = sol.t_hat
    # report the penalized objective at the chosen point
    val = f.value(x) + lam * psi_value(reg, x)
    # best value so far, in evaluation order
    trace = list(np.minimum.accumulate([v for v, _ in cache.values()])) + [min(val, best_val)]
    return Solution(
        x,
        trace,
        sol.status,
        sol.certificate,
        sol.tolerance,
        total_iters,
        "radius-search+" + sol.method,
        True,
        sol.certificate_trace,
        lam=lam,
        radius=best_R,
    )


def solve_constrained(
    instance: ProblemInstance,
    reg: RegularizerDescriptor,
    radius: float,
    config: SolverConfig = SolverConfig(),
    x0: Optional[np.ndarray] = None,
) -> Solution:
    """Minimize (1/N) sum (Y_i - <X_i,t>)^2 over {Psi(t) <= radius}.

    The certificate is the conditional-gradient gap for convex kinds. For
    the nonconvex weak-lp ball it is the projected-gradient residual.
    """
    if not np.isfinite(radius) or radius < 0:
        raise ValueError("radius must be a finite nonnegative number")
    f = _Quadratic(instance.X, instance.Y)
    D = instance.X.shape[1]
    reg.check_dim(D)
    zero = np.zeros(D)
    if radius == 0:
        return Solution(zero, [f.value(zero)], CONVERGED, 0.0, 0.0, 0, "trivial", radius=0.0)
    x0 = zero if x0 is None else np.asarray(x0, dtype=float).ravel()

    if reg.kind == "weak-lp":
        p = reg.params["p"]
        step_map = lambda v, s: _weak_lp_projection(v, p, radius)  # noqa: E731
        tol = config.cert_tol * max(1.0, float(np.linalg.norm(f.grad(zero))))

        def certificate(x, s):
            return float(np.linalg.norm(x - step_map(x - s * f.grad(x), s))) / s

        x0 = _weak_lp_projection(x0, p, radius)
        x, trace, certs, status, cert, it = _accelerated(f, x0, step_map, lambda t: 0.0, certificate, tol, config)
        return Solution(x, trace, status, cert, tol, it, "projected-gradient", False, certs, radius=radius)

    tol = config.cert_tol * max(1.0, f.value(zero))
    if psi_value(reg, x0) > radius:
        x0 = zero

    def fw_gap(x, s=None):
        g = f.grad(x)
        return float(g @ x + radius * dual_norm(reg, -g))

    if reg.capabilities.has_prox:
        step_map = lambda v, s: project_ball(reg, v, radius)  # noqa: E731
        x, trace, certs, status, _, it = _accelerated(f, x0, step_map, lambda t: 0.0, fw_gap, tol, config)
        gap = fw_gap(x)
        status = CONVERGED if gap <= tol else ITERATION_CAP
        if certs:
            certs[-1] = gap
        return Solution(x, trace, status, gap, tol, it, "projected-fista", False, certs, radius=radius)

    x, trace, certs, status, gap, it = _frank_wolfe(f, reg, radius, tol, config)
    return Solution(x, trace, status, gap, tol, it, "frank-wolfe", False, certs, radius=radius)
