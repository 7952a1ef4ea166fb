"""Laplace noise and privacy-budget arithmetic."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class NoiseScaleClamped(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_pure(self) -> bool:
        return self.delta == 0

    def within(self, other: "PrivacyBudget", rtol: float = 1e-9) -> bool:
        """True if this budget is no larger than ``other`` in both coordinates."""
        return (
            self.epsilon <= other.epsilon * (1 + rtol)
            and self.delta <= other.delta * (1 + rtol)
        )


@dataclass(frozen=True)
class AccountingConstants:
    """Explicit constants for the approximate-DP RangeMonitor accounting.

    ``c_tct`` replaces the unspecified constant in eps = O(a log 1/delta).
    The default of 8 comes from the target-charging bound eps' = (2 tau / q) a
    with q = 1/(1 + e^a) >= 1/(1 + e) for a <= 1 and tau ~ 4 ln(2/delta) hits,
    doubled for replace-one adjacency. It is a heuristic choice, not a tight
    constant; lower it at your own risk.
    """

    c_tct: float = 8.0
    tau_hits: int = 1
    bisection_tol: float = 1e-10

    def __post_init__(self):
        if not self.c_tct >= 1:
            raise ValueError(f"c_tct must be >= 1, got {self.c_tct}")
        if int(self.tau_hits) != self.tau_hits or self.tau_hits < 1:
            raise ValueError(f"tau_hits must be a positive integer, got {self.tau_hits}")
        if not 0 < self.bisection_tol <= 1e-6:
            raise ValueError(f"bisection_tol must lie in (0, 1e-6], got {self.bisection_tol}")

    @classmethod
    def for_delta(cls, delta: float, **kw) -> "AccountingConstants":
        """Constants with tau_hits = ceil(4 ln(2/delta))."""
        return cls(tau_hits=max(1, math.ceil(4 * math.log(2 / delta))), **kw)


class ZeroNoise:
    """UNSAFE FOR PRIVACY. Uniform source pinned at 1/2, so every Laplace draw is 0.

    Only meant for deterministic branch coverage in tests. Anything that
    draws noise through :func:`laplace_sample` accepts it in place of a
    :class:`numpy.random.Generator`.
    """

    def random(self, size=None):
        if size is None:
            return 0.5
        return np.full(size, 0.5)

    def __repr__(self):
        return "ZeroNoise()"


def unsafe_zero_noise() -> ZeroNoise:
    logger.warning("noise disabled: outputs are NOT differentially private")
    return ZeroNoise()


def laplace_sample(scale: float, rng, size=None):
    """Lap(scale) by inverse CDF, one uniform per draw; u = 0 is redrawn."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    if size is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return _laplace_icdf(u, scale)
    u = np.asarray(rng.random(size), dtype=np.float64)
    zero = u == 0.0
    while np.any(zero):
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return _laplace_icdf(u, scale)


def _laplace_icdf(u, b):
    if np.ndim(u) == 0:
        return b * math.log(2 * u) if u < 0.5 else -b * math.log(2 * (1 - u))
    out = np.empty_like(u)
    lo = u < 0.5
    out[lo] = b * np.log(2 * u[lo])
    out[~lo] = -b * np.log(2 * (1 - u[~lo]))
    return out


def basic_composition(k: int, budget: PrivacyBudget) -> PrivacyBudget:
    if k < 1:
        raise ValueError("k must be >= 1")
    return PrivacyBudget(k * budget.epsilon, k * budget.delta)


def advanced_composition(k: int, per_step_epsilon: float, delta_prime: float) -> float:
    """Total epsilon of k adaptive (eps, .)-DP steps at extra slack delta_prime."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < delta_prime <= 1:
        raise ValueError(f"delta_prime must lie in (0, 1], got {delta_prime}")
    eps = per_step_epsilon
    return eps * (math.sqrt(2 * k * math.log(1 / delta_prime)) + k * math.tanh(eps / 2))


def compose(k: int, step: PrivacyBudget, delta_slack: float | None = None) -> PrivacyBudget:
    """Tighter of basic and advanced composition for k copies of ``step``."""
    basic = basic_composition(k, step)
    if not delta_slack:
        return basic
    adv_eps = advanced_composition(k, step.epsilon, delta_slack)
    adv_delta = k * step.delta + delta_slack
    if adv_eps < basic.epsilon and adv_delta < 1:
        return PrivacyBudget(adv_eps, adv_delta)
    return basic


def range_monitor_noise_scale(
    epsilon: float, delta: float, constants: AccountingConstants = AccountingConstants()
) -> float:
    """Noise parameter a = eps / (c_tct ln(1/delta)), clamped to 1."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    a = epsilon / (constants.c_tct * math.log(1 / delta))
    if a > 1:
        warnings.warn(
            f"RangeMonitor noise parameter {a:.4g} clamped to 1 (the analysis needs a <= 1)",
            NoiseScaleClamped,
            stacklevel=2,
        )
        a = 1.0
    return a


def per_round_rhs(eps_prime: float, delta_prime: float, k: int, constants: AccountingConstants) -> float:
    L = math.log(1 / delta_prime)
    return eps_prime * constants.c_tct * L * (math.sqrt(2 * k * L) + k * math.tanh(eps_prime / 2))


def solve_per_round_epsilon(
    total_epsilon: float,
    delta_prime: float,
    k: int,
    constants: AccountingConstants = AccountingConstants(),
) -> float:
    """Unique eps' > 0 with eps/2 = eps' c ln(1/d') (sqrt(2k ln(1/d')) + k tanh(eps'/2)).

    Note (e^x - 1)/(e^x + 1) = tanh(x/2). Solved by bisection on (0, eps].
    """
    if not total_epsilon > 0:
        raise ValueError("total_epsilon must be positive")
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta_prime must lie in (0, 1), got {delta_prime}")
    if k < 1:
        raise ValueError("k must be >= 1")
    target = total_epsilon / 2
    tol = constants.bisection_tol * total_epsilon

    def g(x):
        return per_round_rhs(x, delta_prime, k, constants) - target

    lo, hi = 0.0, float(total_epsilon)
    if g(hi) < 0:
        raise ArithmeticError(
            "no sign change on (0, eps]: the per-round equation has no root for "
            f"eps={total_epsilon}, delta'={delta_prime}, k={k}"
        )
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = g(mid)
        if abs(r) <= tol:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda x: abs(g(x)) if x > 0 else math.inf)
    if abs(g(best)) > tol:
        raise ArithmeticError("bisection stalled before reaching the residual tolerance")
    return best
