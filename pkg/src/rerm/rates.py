"""Closed-form error rates with absolute constants set to 1.

Every value is a rate "up to constants"; compare shapes and exponents,
never absolute levels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .model import Shape
from .regularizers import RegularizerDescriptor, mean_width_formula

CONVENTION = "up to constants"


@dataclass(frozen=True)
class RateEstimate:
    value: float
    regime: str
    formula_id: str
    detail: str = ""
    convention: str = CONVENTION

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RateQuery:
    """Inputs of a complexity-dependent rate. ``rho`` is Psi(t*)."""

    reg: RegularizerDescriptor
    shape: Shape
    N: int
    sigma_q: float
    rho: float
    s: Optional[int] = None
    M: Optional[float] = None
    width: Optional[float] = None

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.rho < 0 or self.sigma_q < 0:
            raise ConfigError("rho and sigma_q must be nonnegative")
        if self.s is not None and not 1 <= self.s <= self.shape.D:
            raise ConfigError("s must lie in [1, D]")


def minimax_rate_l1(rho: float, sigma: float, N: int, d: int, c0: float = 1.0, c1: float = 1.0) -> RateEstimate:
    """Minimax rate over the l1 ball of radius rho in the Gaussian linear model.

    Returns rho^2 when rho^2 N <= sigma^2 log d, else max(s_M^2, s_Q^2).
    ``c0 <= c1`` delimit the band N ~ d in which no precise value is known;
    inside it the larger of the two neighbouring s_Q branches is used.

    Examples
    --------
    >>> r = minimax_rate_l1(rho=0.01, sigma=1.0, N=100, d=50)
    >>> r.regime, round(r.value, 6)
    ('degenerate-small-rho', 0.0001)
    """
    if sigma <= 0 or N < 1 or d < 2 or rho < 0:
        raise ConfigError("need sigma > 0, N >= 1, d >= 2, rho >= 0")
    if not 0 < c0 <= c1:
        raise ConfigError("need 0 < c0 <= c1")
    logd = np.log(d)
    r2n = rho**2 * N
    if r2n <= sigma**2 * logd:
        return RateEstimate(rho**2, "degenerate-small-rho", "minimax-l1:rho^2")

    if r2n >= sigma**2 * d**2:
        sM, m_lab = sigma**2 * d / N, "sM:dense"
    else:
        sM = rho * sigma * np.sqrt(np.log(np.e * sigma * d / (rho * np.sqrt(N))) / N)
        m_lab = "sM:intermediate"

    if c0 * d <= N <= c1 * d:
        sQ = rho**2 / N * max(np.log(d / N), 0.0)
        q_lab = "imprecise-band"
    elif N > c1 * d:
        sQ, q_lab = 0.0, "sQ:zero"
    else:
        sQ, q_lab = rho**2 / N * np.log(d / N), "sQ:high-dimensional"

    if q_lab == "imprecise-band":
        regime = "imprecise-band"
    else:
        regime = m_lab if sM >= sQ else q_lab
    return RateEstimate(float(max(sM, sQ)), regime, "minimax-l1:max(sM^2,sQ^2)", f"{m_lab};{q_lab}")


def _label(reg: RegularizerDescriptor) -> str:
    return reg.label()


def complexity_rate(query: RateQuery, width_E: Optional[float] = None) -> RateEstimate:
    """sigma_q * L in the large-N regime, else max(sigma_q * L, L^2),
    with L = rho * w_K / sqrt(N).

    The large-N regime is N >= w_E^2, where w_E = sqrt(D) is the width of
    the isotropic ellipsoid.
    """
    if query.width is not None:
        wK = float(query.width)
    else:
        if not query.reg.capabilities.has_width_formula:
            raise ConfigError(f"{query.reg.kind} has no width formula; supply query.width")
        wK = mean_width_formula(query.reg, query.shape).value
    wE = np.sqrt(query.shape.D) if width_E is None else float(width_E)
    L = query.rho * wK / np.sqrt(query.N)
    lin = query.sigma_q * L
    fid = f"complexity:{_label(query.reg)}:Lambda=rho*w_K/sqrt(N)"
    if query.N >= wE**2:
        return RateEstimate(float(lin), "large-N", fid)
    quad = L**2
    if quad > lin:
        return RateEstimate(float(quad), "small-N:quadratic", fid)
    return RateEstimate(float(lin), "small-N:linear", fid)


def combined_rate(s: int, rho: float, sigma: float, N: int, d: int) -> RateEstimate:
    """min(s sigma^2 log d / N, max(sigma rho sqrt(log d / N), rho^2 log d / N)).

    Valid when N >= s log(d/s); below that only the complexity term is
    returned. Inside sigma sqrt(N / log d) <= rho <= sigma sqrt(s) the regime
    is reported as the deterioration band.

    Examples
    --------
    >>> r = combined_rate(1, 1.0, 1.0, 10_000, 10_000)
    >>> r.regime, round(r.value, 7)
    ('sparsity-dominated', 0.000921)
    """
    if s < 1 or s > d or N < 1 or d < 2 or rho < 0 or sigma < 0:
        raise ConfigError("invalid combined-rate arguments")
    logd = np.log(d)
    sparse = s * sigma**2 * logd / N
    comp = max(sigma * rho * np.sqrt(logd / N), rho**2 * logd / N)
    fid = "combined:min(sparsity,complexity)"
    if N < s * np.log(d / s):
        return RateEstimate(float(comp), "complexity-only", fid, "N below s*log(d/s); sparsity term not applicable")
    which = "sparsity-dominated" if sparse <= comp else "complexity-dominated"
    if sigma > 0 and sigma * np.sqrt(N / logd) <= rho <= sigma * np.sqrt(s):
        return RateEstimate(float(min(sparse, comp)), "deterioration band", fid, which)
    return RateEstimate(float(min(sparse, comp)), which, fid)


RATE_TABLE_COLUMNS = ["kind", "D", "N", "sigma_q", "rho", "s", "value", "regime", "formula_id"]


def write_rate_table(rows: Sequence[tuple], path) -> None:
    """CSV of (RateQuery, RateEstimate) pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATE_TABLE_COLUMNS)
        for q, r in rows:
            w.writerow(
                [q.reg.label(), q.shape.D, q.N, q.sigma_q, q.rho, "" if q.s is None else q.s, repr(r.value), r.regime, r.formula_id]
            )
