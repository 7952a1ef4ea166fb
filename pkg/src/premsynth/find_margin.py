"""FindMarginExample: certify an estimate on a large subset or find a margin.

Given the private histogram h*, a public estimate h_hat and an active set Y,
run every query through a RangeMonitor with thresholds that encode the
(1 +/- zeta) relative band around h_hat. Supports of queries that fall above
(below) the band are pooled into S+ (S-); what remains is S_act. The heaviest
of the three under h_hat is returned, so it always carries at least a third
of h_hat's mass on Y.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Histogram, QueryFamily, _check_dims
from .privacy import AccountingConstants, range_monitor_noise_scale
from .range_monitor import ApproxRangeMonitor, PureRangeMonitor, Response, _as_mask


class MarginVerdict(enum.Enum):
    PLUS = 1
    MINUS = -1
    APPROX = 0

    @property
    def sign(self) -> int:
        return self.value


@dataclass(frozen=True, eq=False)
class MarginOutcome:
    verdict: MarginVerdict
    subset: np.ndarray
    alpha0: float
    queries_consumed: int
    plus_set: np.ndarray
    minus_set: np.ndarray
    active_set: np.ndarray


@dataclass(frozen=True)
class BudgetExhausted:
    """The pure monitor hit its cap of Gamma out-of-range answers."""

    alpha0: float
    gamma: int
    queries_consumed: int


def select_verdict(mass_plus: float, mass_minus: float, mass_active: float) -> MarginVerdict:
    """Heaviest of the three sets; ties go Approx, then Plus, then Minus."""
    if min(mass_plus, mass_minus, mass_active) < 0:
        raise ValueError("masses must be nonnegative")
    if mass_active >= max(mass_plus, mass_minus):
        return MarginVerdict.APPROX
    if mass_plus >= mass_minus:
        return MarginVerdict.PLUS
    return MarginVerdict.MINUS


def approx_alpha0(a: float, n_queries: int, beta: float, zeta: float) -> float:
    return 4 * (1 + zeta) / a * math.log(n_queries / beta)


def pure_parameters(
    n: float, domain_size: int, n_queries: int, epsilon: float, beta: float, zeta: float
) -> tuple[float, int, float]:
    """(alpha0, Gamma, a) for the pure-DP variant.

    ln n and ln |X| are floored at 1 so that alpha0 stays positive on
    degenerate inputs (n = 1 or |X| = 1).
    """
    if n <= 0:
        raise ValueError("the private histogram must have positive mass")
    ln_n = max(math.log(n), 1.0)
    ln_x = max(math.log(domain_size), 1.0)
    alpha0 = math.sqrt(48 * n * ln_n * ln_x * math.log(n_queries / beta) / (zeta**2 * epsilon))
    gamma = math.ceil(8 * n / alpha0)
    return alpha0, gamma, epsilon / gamma


def _validate(h_star: Histogram, h_hat: Histogram, F: QueryFamily, beta, zeta):
    if not 0 < zeta < 0.5:
        raise ValueError(f"zeta must lie in (0, 1/2), got {zeta}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not F.is_binary:
        raise TypeError("FindMarginExample needs a binary query family")
    _check_dims(h_star.size, h_hat.size)
    _check_dims(h_star.size, F.domain_size)
    if not h_star.is_integral:
        raise ValueError("the private histogram must be integer-valued")


def _run(monitor, h_hat: Histogram, Y: np.ndarray, F: QueryFamily, zeta: float, alpha0: float):
    masks = F.masks
    est = h_hat.weights
    plus = np.zeros_like(Y)
    minus = np.zeros_like(Y)
    active = Y.copy()
    f_active = list(range(len(F)))

    while True:
        accurate = True
        pending = list(f_active)
        pos = 0
        while pos < len(pending):
            rem = pending[pos:]
            sub = masks[rem]
            vals = sub @ np.where(active, est, 0.0)
            tau_u = (vals + alpha0 / 2) / (1 - zeta)
            tau_l = np.maximum((vals - alpha0 / 2) / (1 + zeta), 0.0)
            j, response = monitor.scan(sub, tau_l, tau_u)
            if response is Response.HALTED:
                return None
            if j is None:
                break
            fid = rem[j]
            hit = active & masks[fid]
            if response is Response.ABOVE:
                plus |= hit
            else:
                minus |= hit
            active &= ~masks[fid]
            f_active.remove(fid)
            accurate = False
            pos += j + 1
        if accurate:
            break

    verdict = select_verdict(
        float(est[plus].sum()), float(est[minus].sum()), float(est[active].sum())
    )
    subset = {MarginVerdict.PLUS: plus, MarginVerdict.MINUS: minus, MarginVerdict.APPROX: active}[verdict]
    return MarginOutcome(
        verdict=verdict,
        subset=subset.copy(),
        alpha0=alpha0,
        queries_consumed=monitor.queries_answered,
        plus_set=plus,
        minus_set=minus,
        active_set=active,
    )


def find_margin_approx(
    h_star: Histogram,
    h_hat: Histogram,
    Y,
    F: QueryFamily,
    eps: float,
    delta: float,
    beta: float,
    zeta: float,
    constants: AccountingConstants = AccountingConstants(),
    rng=None,
) -> MarginOutcome:
    """(eps, delta)-DP margin search over an approximate-DP RangeMonitor."""
    _validate(h_star, h_hat, F, beta, zeta)
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    Y = _as_mask(Y, h_star.size)
    a = range_monitor_noise_scale(eps, delta, constants)
    alpha0 = approx_alpha0(a, len(F), beta, zeta)
    monitor = ApproxRangeMonitor(h_star, a, Y, rng)
    return _run(monitor, h_hat, Y, F, zeta, alpha0)


def find_margin_pure(
    h_star: Histogram,
    h_hat: Histogram,
    Y,
    F: QueryFamily,
    eps: float,
    beta: float,
    zeta: float,
    rng=None,
) -> MarginOutcome | BudgetExhausted:
    """eps-DP margin search over the sparse-vector RangeMonitor."""
    _validate(h_star, h_hat, F, beta, zeta)
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    n = h_star.total_mass
    if n == 0:
        raise ValueError("the private histogram must have positive mass")
    Y = _as_mask(Y, h_star.size)
    alpha0, gamma, a = pure_parameters(n, h_star.size, len(F), eps, beta, zeta)
    monitor = PureRangeMonitor(h_star, a, gamma, Y, rng)
    outcome = _run(monitor, h_hat, Y, F, zeta, alpha0)
    if outcome is None:
        return BudgetExhausted(alpha0, gamma, monitor.queries_answered)
    return outcome
