"""Penalty values, dual norms and linear-minimization oracles."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from ..errors import CapabilityError, ShapeMismatchError
from .catalog import RegularizerDescriptor


def _vec(reg: RegularizerDescriptor, t) -> np.ndarray:
    t = np.asarray(t, dtype=float).ravel()
    reg.check_dim(t.size)
    return t


def _mat(reg: RegularizerDescriptor, t) -> np.ndarray:
    shp = reg.params["shape"]
    t = np.asarray(t, dtype=float)
    if t.size != shp.D:
        raise ShapeMismatchError(f"{reg.kind} expects {shp.m}x{shp.T} entries, got {t.size}")
    return t.reshape(shp.m, shp.T)


def _lp(x: np.ndarray, p: float) -> float:
    return float(np.linalg.norm(x.ravel(), ord=p)) if x.size else 0.0


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _sorted_abs(t: np.ndarray) -> np.ndarray:
    return np.sort(np.abs(t))[::-1]


def _desc_order(g: np.ndarray) -> np.ndarray:
    """Indices sorting |g| descending; ties resolved by lowest index."""
    return np.argsort(-np.abs(g), kind="stable")


# ---------------------------------------------------------------- values


def psi_value(reg: RegularizerDescriptor, t) -> float:
    """Evaluate Psi(t)."""
    k = reg.kind
    if k in ("schatten", "max-norm"):
        A = _mat(reg, t)
        if k == "schatten":
            return _lp(np.linalg.svd(A, compute_uv=False), reg.params["p"])
        return max_norm_gauge(A)
    t = _vec(reg, t)
    if k == "l1":
        return float(np.abs(t).sum())
    if k == "lp":
        return _lp(t, reg.params["p"])
    if k == "weak-lp":
        if t.size == 0:
            return 0.0
        j = np.arange(1.0, t.size + 1)
        return float(np.max(j ** (1.0 / reg.params["p"]) * _sorted_abs(t)))
    if k == "slope":
        return float(reg.params["weights"] @ _sorted_abs(t))
    if k == "mmp-cone":
        if reg.params["cone"] == "nonneg-orthant":
            return float(np.abs(t).sum())
        return float(sum(np.sqrt(len(g)) * np.linalg.norm(t[list(g)]) for g in reg.params["groups"]))
    if k == "atomic":
        return atomic_gauge(reg.params["atoms"], t)
    raise CapabilityError(f"no value for {k}")


def atomic_gauge(atoms: np.ndarray, t: np.ndarray) -> float:
    """Minkowski functional of conv(atoms): min sum(c) with atoms' c = t, c >= 0."""
    if not np.any(t):
        return 0.0
    res = linprog(np.ones(atoms.shape[0]), A_eq=atoms.T, b_eq=t, bounds=(0, None), method="highs")
    if res.status == 2:
        return float("inf")
    if res.status != 0:
        raise RuntimeError(f"atomic gauge LP failed: {res.message}")
    return float(res.fun)


def _best_sign_pair(G: np.ndarray):
    """max over sign vectors u, v of u'Gv by enumerating the shorter side.

    The first entry of the enumerated vector is fixed to +1 (the pair (-u,-v)
    gives the same value). Returns (value, u, v), ties to the first pattern.
    """
    transpose = G.shape[0] > G.shape[1]
    H = G.T if transpose else G
    m = H.shape[0]
    best, bu, bv = -np.inf, None, None
    for tail in itertools.product((1.0, -1.0), repeat=m - 1):
        u = np.array((1.0,) + tail)
        w = H.T @ u
        val = float(np.abs(w).sum())
        if val > best + 1e-15:
            best, bu, bv = val, u, np.where(w >= 0, 1.0, -1.0)
    if transpose:
        bu, bv = bv, bu
    return best, bu, bv


def _check_cap(reg: RegularizerDescriptor) -> None:
    shp, cap = reg.params["shape"], reg.params.get("cap", 24)
    if shp.m + shp.T > cap:
        n = 2 ** (min(shp.m, shp.T) - 1)
        raise CapabilityError(
            f"max-norm brute force needs m+T <= {cap}; m+T = {shp.m + shp.T} would enumerate "
            f"{n} sign patterns, each costing an {shp.m}x{shp.T} product"
        )


def cut_norm(G: np.ndarray) -> float:
    """The infinity-to-one norm max_{u,v in {-1,1}} u'Gv."""
    return _best_sign_pair(np.asarray(G, dtype=float))[0]


def max_norm_gauge(A: np.ndarray, tol: float = 1e-9, max_rounds: int = 500) -> float:
    """Gauge of conv of rank-one sign matrices, by constraint generation.

    Solves max <A,G> subject to u'Gv <= 1 on a growing set of sign pairs; the
    box |G_ij| <= 1 is implied by the full constraint set and keeps every
    relaxation bounded. Pricing is exact brute force.
    """
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    m, T = A.shape
    rows = []
    c = -A.ravel()
    # seed with the sign pattern of A itself
    _, u, v = _best_sign_pair(A)
    rows.append(np.outer(u, v).ravel())
    val = np.inf
    for _ in range(max_rounds):
        res = linprog(c, A_ub=np.array(rows), b_ub=np.ones(len(rows)), bounds=(-1, 1), method="highs")
        if res.status != 0:
            raise RuntimeError(f"max-norm gauge LP failed: {res.message}")
        val = -res.fun
        G = res.x.reshape(m, T)
        viol, u, v = _best_sign_pair(G)
        if viol <= 1 + tol:
            return float(val)
        rows.append(np.outer(u, v).ravel())
    return float(val)


# ---------------------------------------------------------------- duals


def dual_norm(reg: RegularizerDescriptor, g) -> float:
    """Psi*(g) = sup{<g,t> : Psi(t) <= 1}."""
    k = reg.kind
    if k == "weak-lp":
        raise CapabilityError("weak-lp is a quasi-norm; its dual norm is not available (use support)")
    if k in ("schatten", "max-norm"):
        G = _mat(reg, g)
        if k == "schatten":
            return _lp(np.linalg.svd(G, compute_uv=False), conjugate_exponent(reg.params["p"]))
        _check_cap(reg)
        return cut_norm(G)
    g = _vec(reg, g)
    if g.size == 0:
        return 0.0
    if k == "l1":
        return float(np.abs(g).max())
    if k == "lp":
        return _lp(g, conjugate_exponent(reg.params["p"]))
    if k == "slope":
        return float(np.max(np.cumsum(_sorted_abs(g)) / np.cumsum(reg.params["weights"])))
    if k == "mmp-cone":
        if reg.params["cone"] == "nonneg-orthant":
            return float(np.abs(g).max())
        return float(max(np.linalg.norm(g[list(G)]) / np.sqrt(len(G)) for G in reg.params["groups"]))
    if k == "atomic":
        return float(np.max(reg.params["atoms"] @ g))
    raise CapabilityError(f"no dual norm for {k}")


def support(reg: RegularizerDescriptor, g) -> float:
    """sup{<g,t> : Psi(t) <= 1}. Equals dual_norm for norms; for weak-lp the
    supremum over its (nonconvex) unit ball, which equals that of the hull."""
    if reg.kind == "weak-lp":
        return float(np.asarray(g, dtype=float).ravel() @ lmo(reg, g, 1.0))
    return dual_norm(reg, g)


def batch_support(reg: RegularizerDescriptor, Gs: np.ndarray) -> np.ndarray:
    """Row-wise support values for an n x D array."""
    Gs = np.asarray(Gs, dtype=float)
    k, p = reg.kind, reg.params
    A = np.abs(Gs)
    if k == "l1" or (k == "mmp-cone" and p["cone"] == "nonneg-orthant"):
        return A.max(axis=1)
    if k == "lp":
        return np.linalg.norm(Gs, ord=conjugate_exponent(p["p"]), axis=1)
    if k == "slope":
        S = np.cumsum(-np.sort(-A, axis=1), axis=1)
        return np.max(S / np.cumsum(p["weights"]), axis=1)
    if k == "weak-lp":
        c = np.arange(1.0, Gs.shape[1] + 1) ** (-1.0 / p["p"])
        return -np.sort(-A, axis=1) @ c
    if k == "atomic":
        return np.max(Gs @ p["atoms"].T, axis=1)
    if k == "schatten":
        shp = p["shape"]
        s = np.linalg.svd(Gs.reshape(-1, shp.m, shp.T), compute_uv=False)
        return np.linalg.norm(s, ord=conjugate_exponent(p["p"]), axis=1)
    return np.array([support(reg, row) for row in Gs])


# ---------------------------------------------------------------- LMOs


def _lp_lmo(g: np.ndarray, p: float, radius: float) -> np.ndarray:
    out = np.zeros_like(g)
    if not np.any(g):
        return out
    if p == 1:
        j = int(np.argmax(np.abs(g)))
        out[j] = radius * np.sign(g[j])
        return out
    if np.isinf(p):
        return radius * np.where(g >= 0, 1.0, -1.0)
    q = conjugate_exponent(p)
    a = np.abs(g)
    # scale before powering to avoid overflow
    a = a / a.max()
    w = a ** (q - 1.0)
    return radius * np.sign(g) * w / np.linalg.norm(w, ord=p)


def lmo(reg: RegularizerDescriptor, g, radius: float) -> np.ndarray:
    """A maximizer of <g,t> over {Psi(t) <= radius}; lowest index wins ties."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    k, p = reg.kind, reg.params
    if k in ("schatten", "max-norm"):
        G = _mat(reg, g)
        if k == "max-norm":
            _check_cap(reg)
            if not np.any(G):
                return np.zeros(G.size)
            _, u, v = _best_sign_pair(G)
            return radius * np.outer(u, v).ravel()
        U, s, Vt = np.linalg.svd(G, full_matrices=False)
        return (U @ np.diag(_lp_lmo(s, p["p"], radius)) @ Vt).ravel()
    g = _vec(reg, g)
    out = np.zeros_like(g)
    if not np.any(g):
        return out
    if k == "l1" or (k == "mmp-cone" and p["cone"] == "nonneg-orthant"):
        return _lp_lmo(g, 1.0, radius)
    if k == "lp":
        return _lp_lmo(g, p["p"], radius)
    if k == "weak-lp":
        order = _desc_order(g)
        c = np.arange(1.0, g.size + 1) ** (-1.0 / p["p"])
        out[order] = radius * c * np.where(g[order] >= 0, 1.0, -1.0)
        return out
    if k == "slope":
        order = _desc_order(g)
        ratios = np.cumsum(np.abs(g[order])) / np.cumsum(p["weights"])
        kk = int(np.argmax(ratios)) + 1
        top = order[:kk]
        out[top] = radius * np.sign(g[top]) / p["weights"][:kk].sum()
        return out
    if k == "mmp-cone":
        vals = [np.linalg.norm(g[list(G)]) / np.sqrt(len(G)) for G in p["groups"]]
        G = list(p["groups"][int(np.argmax(vals))])
        nrm = np.linalg.norm(g[G])
        out[G] = radius * g[G] / (nrm * np.sqrt(len(G)))
        return out
    if k == "atomic":
        atoms = p["atoms"]
        return radius * atoms[int(np.argmax(atoms @ g))].copy()
    raise CapabilityError(f"no LMO for {k}")
