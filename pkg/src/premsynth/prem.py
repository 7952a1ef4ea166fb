"""PREM: private relative-error multiplicative weights.

Outer rounds peel off subsets of the domain on which a local MWU estimate is
certified relatively accurate; each round's estimate starts uniform on the
still-active part of the domain with a noisy count of its mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BinaryQuery, Histogram, QueryFamily, _check_dims
from .find_margin import (
    BudgetExhausted,
    MarginVerdict,
    approx_alpha0,
    find_margin_approx,
    find_margin_pure,
    pure_parameters,
)
from .privacy import (
    AccountingConstants,
    PrivacyBudget,
    ZeroNoise,
    compose,
    laplace_sample,
    range_monitor_noise_scale,
    solve_per_round_epsilon,
)

_COUNT, _MARGIN = 0, 1


@dataclass(frozen=True)
class PremConfig:
    epsilon: float
    delta: float = 0.0
    beta: float = 0.05
    zeta: float = 0.2
    accounting: AccountingConstants = field(default_factory=AccountingConstants)
    c_pure: float = 1.0
    rescale: bool = False

    def __post_init__(self):
        # eps > 1 is accepted: the accuracy theorem is stated for eps <= 1,
        # the privacy accounting is not.
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.zeta < 0.5:
            raise ValueError(f"zeta must lie in (0, 1/2), got {self.zeta}")
        if not self.c_pure > 0:
            raise ValueError(f"c_pure must be positive, got {self.c_pure}")

    @property
    def pure(self) -> bool:
        return self.delta == 0


@dataclass(frozen=True)
class PremDerived:
    I: int
    T: int
    eta: float
    beta_prime: float
    delta_prime: float
    eps_prime: float
    a: float
    alpha: float
    alpha_formula: float
    alpha0: float
    count_error: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def derive_parameters(config: PremConfig, n: int, domain_size: int, family_size: int) -> PremDerived:
    """All run parameters for one PREM invocation.

    ``alpha`` is the larger of the closed-form expression and the floor the
    accuracy argument actually needs (1.5 I alpha0, 88 alpha0 and 64 E / zeta,
    E the Laplace count error radius); the closed form alone drops the
    ln(1/delta') factor hidden in the monitor's noise scale.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    zeta, beta, eps = config.zeta, config.beta, config.epsilon
    I = max(1, math.ceil(math.log(n) / math.log(6 / 5)))
    T = max(1, math.ceil(128 * math.log(domain_size) / zeta**2))
    eta = zeta / 4
    beta_p = beta / (2 * I * T)
    if config.pure:
        delta_p = 0.0
        eps_p = eps / (2 * I * T)
        a = eps / (2 * I)
        alpha0 = pure_parameters(n, domain_size, family_size, eps_p, beta_p, zeta)[0]
        formula = config.c_pure * max(I * alpha0, 24 * I / eps * math.log(I / beta_p))
    else:
        delta_p = config.delta / (4 * I * T)
        eps_p = solve_per_round_epsilon(eps, delta_p, I * T, config.accounting)
        a = eps / (4 * math.sqrt(2 * I * math.log(I / config.delta)))
        monitor_a = range_monitor_noise_scale(eps_p, delta_p, config.accounting)
        alpha0 = approx_alpha0(monitor_a, family_size, beta_p, zeta)
        formula = 200 * I / eps_p * math.log(4 * family_size / beta_p)
    count_error = math.log(1 / beta_p) / a
    floor = max(1.5 * I * alpha0, 88 * alpha0, 64 * count_error / zeta)
    return PremDerived(
        I=I, T=T, eta=eta, beta_prime=beta_p, delta_prime=delta_p, eps_prime=eps_p,
        a=a, alpha=max(formula, floor), alpha_formula=formula, alpha0=alpha0,
        count_error=count_error,
    )


def augment_all_ones(F: QueryFamily) -> QueryFamily:
    ones = BinaryQuery.all_ones(F.domain_size)
    if any(isinstance(q, BinaryQuery) and q == ones for q in F):
        return F
    return QueryFamily([*F, ones])


def mwu_update(h_hat: Histogram, theta, S, eta: float, n_tilde: float) -> Histogram:
    """n_tilde * (h . exp(theta eta 1_S)) / ||h . exp(theta eta 1_S)||_1."""
    if h_hat.total_mass <= 0:
        raise ValueError("MWU needs an estimate with positive mass")
    if not eta > 0:
        raise ValueError("eta must be positive")
    sign = theta.sign if isinstance(theta, MarginVerdict) else int(theta)
    if sign not in (1, -1):
        raise ValueError("theta must be +1 or -1")
    S = np.asarray(S, dtype=bool)
    _check_dims(S.size, h_hat.size)
    w = h_hat.weights * np.exp(sign * eta * S)
    return Histogram(n_tilde * w / w.sum())


@dataclass(frozen=True)
class RoundTrace:
    n_tilde: float
    inner_iterations: int
    verdicts: tuple[str, ...]
    subset: tuple[int, ...] | None
    stop: str | None = None

    def to_dict(self) -> dict:
        return {
            "n_tilde": self.n_tilde,
            "inner_iterations": self.inner_iterations,
            "verdicts": list(self.verdicts),
            "subset": None if self.subset is None else list(self.subset),
            "stop": self.stop,
        }


@dataclass(frozen=True)
class PrivacyLedger:
    """What a run actually released, for composing its privacy cost."""

    pure: bool
    epsilon: float
    delta: float
    count_scale: float
    eps_prime: float
    delta_prime: float
    laplace_releases: int = 0
    monitor_instances: int = 0

    def composed(self, laplace_releases: int | None = None, monitor_instances: int | None = None) -> PrivacyBudget:
        """Total (eps, delta) of the recorded releases (or of the given counts)."""
        k_count = self.laplace_releases if laplace_releases is None else laplace_releases
        k_mon = self.monitor_instances if monitor_instances is None else monitor_instances
        eps_total, delta_total = 0.0, 0.0
        if k_count:
            slack = None if self.pure else self.delta / 2
            b = compose(k_count, PrivacyBudget(self.count_scale), slack)
            eps_total += b.epsilon
            delta_total += b.delta
        if k_mon:
            slack = None if self.pure else self.delta_prime
            b = compose(k_mon, PrivacyBudget(self.eps_prime, self.delta_prime), slack)
            eps_total += b.epsilon
            delta_total += b.delta
        return PrivacyBudget(max(eps_total, 1e-300), delta_total)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class PremResult:
    synthetic: Histogram
    certified_alpha: float
    rounds: tuple[RoundTrace, ...]
    failed: bool
    derived: PremDerived
    ledger: PrivacyLedger
    break_round: int | None
    family_size: int
    binary_alpha: float | None = None

    def trace_dict(self) -> dict:
        return {
            "certified_alpha": self.certified_alpha,
            "binary_alpha": self.binary_alpha,
            "failed": self.failed,
            "break_round": self.break_round,
            "family_size": self.family_size,
            "derived": self.derived.to_dict(),
            "ledger": self.ledger.to_dict(),
            "rounds": [r.to_dict() for r in self.rounds],
        }


def _seed_root(rng):
    if isinstance(rng, ZeroNoise):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    if isinstance(rng, (int, np.integer)):
        return np.random.SeedSequence(int(rng))
    raise TypeError("rng must be an int seed, a SeedSequence or a numpy Generator")


def _child(root, *key):
    """Independent stream per (round, iteration, purpose)."""
    if isinstance(root, ZeroNoise):
        return root
    seq = np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + key)
    return np.random.default_rng(seq)


def run_prem(h_star: Histogram, F: QueryFamily, config: PremConfig, rng) -> PremResult:
    """Relative-error synthetic histogram for the binary family F.

    The all-ones query is appended to F if missing. Returns a result with
    ``failed=True`` when an inner loop runs out of its T iterations (or the
    pure monitor halts), instead of raising.
    """
    if not h_star.is_integral:
        raise ValueError("the private histogram must be integer-valued")
    n = int(round(h_star.total_mass))
    if n < 1:
        raise ValueError("the private histogram must contain at least one record")
    if not F.is_binary:
        raise TypeError("run_prem takes binary queries; use run_prem_real for real-valued ones")
    _check_dims(h_star.size, F.domain_size)
    F = augment_all_ones(F)
    d = derive_parameters(config, n, h_star.size, len(F))
    root = _seed_root(rng)

    counts = 0
    monitors = 0
    size = h_star.size
    h_hat = np.zeros(size)
    active = np.ones(size, dtype=bool)
    rounds: list[RoundTrace] = []
    failed = False
    break_round = None

    for i in range(d.I):
        if not active.any():
            rounds.append(RoundTrace(0.0, 0, (), None, "empty"))
            break_round = i
            break
        n_true = float(h_star.weights[active].sum())
        n_tilde = n_true + laplace_sample(1 / d.a, _child(root, i, 0, _COUNT))
        counts += 1
        if n_tilde <= d.alpha / 4:
            rounds.append(RoundTrace(n_tilde, 0, (), None, "small"))
            break_round = i
            break
        n_tilde = max(n_tilde, 0.0)
        est = Histogram(np.where(active, n_tilde / active.sum(), 0.0))
        verdicts = []
        subset = None
        for t in range(d.T + 1):
            if t == d.T:
                failed = True
                break
            child = _child(root, i, t, _MARGIN)
            monitors += 1
            if config.pure:
                out = find_margin_pure(h_star, est, active, F, d.eps_prime, d.beta_prime, config.zeta, child)
            else:
                out = find_margin_approx(
                    h_star, est, active, F, d.eps_prime, d.delta_prime, d.beta_prime,
                    config.zeta, config.accounting, child,
                )
            if isinstance(out, BudgetExhausted):
                verdicts.append("exhausted")
                failed = True
                break
            verdicts.append(out.verdict.name)
            if out.verdict is MarginVerdict.APPROX:
                h_hat += np.where(out.subset, est.weights, 0.0)
                active &= ~out.subset
                subset = tuple(np.flatnonzero(out.subset).tolist())
                break
            est = mwu_update(est, out.verdict, out.subset, d.eta, n_tilde)
        rounds.append(RoundTrace(n_tilde, len(verdicts), tuple(verdicts), subset, "failure" if failed else None))
        if failed:
            break

    synthetic = Histogram(h_hat)
    if config.rescale and synthetic.total_mass > 0:
        synthetic = Histogram(h_hat * (n / synthetic.total_mass))
    ledger = PrivacyLedger(
        pure=config.pure, epsilon=config.epsilon, delta=config.delta, count_scale=d.a,
        eps_prime=d.eps_prime, delta_prime=d.delta_prime,
        laplace_releases=counts, monitor_instances=monitors,
    )
    return PremResult(
        synthetic=synthetic, certified_alpha=d.alpha, rounds=tuple(rounds), failed=failed,
        derived=d, ledger=ledger, break_round=break_round, family_size=len(F),
    )
