"""Proximal maps and Euclidean projections onto penalty balls."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from ..errors import CapabilityError
from .catalog import RegularizerDescriptor
from .norms import _mat, _vec, conjugate_exponent, dual_norm, psi_value


def soft_threshold(v: np.ndarray, tau) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def block_soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / nrm) * v


def pav_nonincreasing(y: np.ndarray) -> np.ndarray:
    """Least-squares nonincreasing fit of y by stack-based pool-adjacent-violators."""
    sums, counts = [], []
    for val in y:
        s, c = float(val), 1
        # pool while the new block mean exceeds the previous one
        while sums and s * counts[-1] >= sums[-1] * c:
            s += sums.pop()
            c += counts.pop()
        sums.append(s)
        counts.append(c)
    return np.repeat(np.array(sums) / np.array(counts), counts)


def slope_prox(v: np.ndarray, weights: np.ndarray, tau: float) -> np.ndarray:
    """argmin 0.5||x-v||^2 + tau * sum_j w_j |x|_(j)."""
    order = np.argsort(-np.abs(v), kind="stable")
    y = np.abs(v)[order] - tau * weights
    z = np.maximum(pav_nonincreasing(y), 0.0)
    out = np.empty_like(v)
    out[order] = z
    return np.sign(v) * out


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Sort-based Euclidean projection onto {||x||_1 <= radius}."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return soft_threshold(v, theta)


def _lq_shrink(a: np.ndarray, mu: float, q: float, iters: int = 100) -> np.ndarray:
    """Solve z + mu*q*z^(q-1) = a for z in [0, a], elementwise, by Newton.

    The left side is convex in z for q >= 2 and concave for q < 2; starting
    on the side where Newton is monotone (above the root for convex, below
    for concave) makes every step safe without a bracket.
    """
    if mu == 0:
        return a.copy()
    r = q - 1.0
    c = mu * q
    if q >= 2:
        z = np.minimum(a, (a / c) ** (1.0 / r))
    else:
        z = np.minimum(0.5 * a, (0.5 * a / c) ** (1.0 / r))
    tol = 1e-15 * a.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(iters):
            zr = z ** (r - 1.0)
            step = (z + c * z * zr - a) / (1.0 + c * r * zr)
            step = np.where(np.isfinite(step), step, 0.0)
            z = np.clip(z - step, 0.0, a)
            if np.max(np.abs(step)) <= tol:
                break
    return z


def project_lq_ball(w: np.ndarray, q: float, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {||x||_q <= radius}, 1 <= q <= inf.

    For 1 < q < inf the Lagrange multiplier is found by a scalar root-find;
    each coordinate then solves a monotone scalar equation.
    """
    if q == 1:
        return project_l1_ball(w, radius)
    if np.isinf(q):
        return np.clip(w, -radius, radius)
    if q == 2:
        nrm = np.linalg.norm(w)
        return w.copy() if nrm <= radius else w * (radius / nrm)
    if np.linalg.norm(w, ord=q) <= radius:
        return w.copy()
    if radius == 0:
        return np.zeros_like(w)
    scale = radius
    a = np.abs(w) / scale

    def excess(mu):
        return float(np.sum(_lq_shrink(a, mu, q) ** q)) - 1.0

    if excess(0.0) <= 0:
        return w.copy()
    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    mu = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    return np.sign(w) * scale * _lq_shrink(a, mu, q)


def lp_prox(v: np.ndarray, p: float, tau: float) -> np.ndarray:
    """Prox of tau*||.||_p via Moreau: v - tau * P_{dual ball}(v / tau)."""
    if p == 1:
        return soft_threshold(v, tau)
    if p == 2:
        return block_soft_threshold(v, tau)
    q = conjugate_exponent(p)
    return v - tau * project_lq_ball(v / tau, q)


def prox(reg: RegularizerDescriptor, v, tau: float) -> np.ndarray:
    """argmin_x 0.5||x - v||^2 + tau * Psi(x)."""
    if not reg.capabilities.has_prox:
        raise CapabilityError(f"{reg.kind} has no proximal map; use the LMO path")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    k, p = reg.kind, reg.params
    if k == "schatten":
        A = _mat(reg, v)
        if tau == 0:
            return A.ravel().copy()
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        return ((U * lp_prox(s, p["p"], tau)) @ Vt).ravel()
    v = _vec(reg, v)
    if tau == 0:
        return v.copy()
    if k == "l1" or (k == "mmp-cone" and p["cone"] == "nonneg-orthant"):
        return soft_threshold(v, tau)
    if k == "lp":
        return lp_prox(v, p["p"], tau)
    if k == "slope":
        return slope_prox(v, p["weights"], tau)
    if k == "mmp-cone":
        out = np.empty_like(v)
        for G in p["groups"]:
            idx = list(G)
            out[idx] = block_soft_threshold(v[idx], tau * np.sqrt(len(idx)))
        return out
    raise CapabilityError(f"no prox for {k}")


def project_ball(reg: RegularizerDescriptor, v, radius: float) -> np.ndarray:
    """Euclidean projection onto {Psi <= radius} for prox-capable kinds.

    Uses closed forms for l1 and l2; otherwise finds the multiplier tau with
    Psi(prox(v, tau)) = radius by a scalar root-find.
    """
    v = np.asarray(v, dtype=float).ravel()
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    k, p = reg.kind, reg.params
    if k == "l1" or (k == "mmp-cone" and p["cone"] == "nonneg-orthant") or (k == "lp" and p["p"] == 1):
        return project_l1_ball(v, radius)
    if k == "lp" and p["p"] == 2:
        return project_lq_ball(v, 2.0, radius)
    if not reg.capabilities.has_prox:
        raise CapabilityError(f"{reg.kind} has no proximal map; projection unavailable")
    if psi_value(reg, v) <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    hi = dual_norm(reg, v)

    def gap(tau):
        return psi_value(reg, prox(reg, v, tau)) - radius

    tau = brentq(gap, 0.0, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-14, maxiter=500)
    x = prox(reg, v, tau)
    nrm = psi_value(reg, x)
    # clean up root-finding slack so the result is feasible
    if nrm > radius:
        x = x * (radius / nrm)
    return x
