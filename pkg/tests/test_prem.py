import math

import numpy as np
import pytest

from premsynth.core import BinaryQuery, Histogram, QueryFamily, RealQuery
from premsynth.evaluation import audit, synthetic_population
from premsynth.prem import (
    PremConfig,
    augment_all_ones,
    derive_parameters,
    mwu_update,
    run_prem,
)
from premsynth.privacy import PrivacyBudget, ZeroNoise, solve_per_round_epsilon
from premsynth.workloads import random_binary

# large enough that alpha < n, so rounds actually run the MWU loop
ACTIVE_EPS = 1e14


def family(size, count, seed, p=0.5):
    return random_binary(size, count, p, np.random.default_rng(seed))


class TestDerive:
    def test_ceilings(self):
        d = derive_parameters(PremConfig(1.0, 1e-6, zeta=0.25), 10**6, 2**10, 10)
        # 128 ln(1024) / 0.0625 = 14195.65..., so the ceiling is 14196
        assert d.I == 76 and d.T == 14196
        assert math.ceil(math.log(1e6) / math.log(1.2)) == 76
        assert math.ceil(128 * 10 * math.log(2) / 0.0625) == 14196

    def test_definitions(self):
        cfg = PremConfig(0.7, 1e-6, beta=0.05, zeta=0.2)
        d = derive_parameters(cfg, 5000, 64, 20)
        assert d.eta == 0.2 / 4
        assert d.beta_prime * 2 * d.I * d.T == pytest.approx(0.05, rel=1e-15)
        assert d.delta_prime == pytest.approx(1e-6 / (4 * d.I * d.T))
        assert d.eps_prime == solve_per_round_epsilon(0.7, d.delta_prime, d.I * d.T, cfg.accounting)
        assert d.a == pytest.approx(0.7 / (4 * math.sqrt(2 * d.I * math.log(d.I / 1e-6))))
        assert d.alpha_formula == pytest.approx(200 * d.I / d.eps_prime * math.log(4 * 20 / d.beta_prime))
        assert d.alpha >= d.alpha_formula and d.alpha >= 1.5 * d.I * d.alpha0

    def test_pure(self):
        cfg = PremConfig(1.0, 0.0, zeta=0.2, c_pure=2.0)
        d = derive_parameters(cfg, 10**4, 64, 33)
        assert d.delta_prime == 0 and d.eps_prime == pytest.approx(1.0 / (2 * d.I * d.T))
        assert d.a == pytest.approx(1.0 / (2 * d.I))
        inner = max(d.I * d.alpha0, 24 * d.I / 1.0 * math.log(d.I / d.beta_prime))
        assert d.alpha_formula == pytest.approx(2.0 * inner)

    def test_config_validation(self):
        with pytest.raises(ValueError, match=r"zeta must lie in \(0, 1/2\)"):
            PremConfig(1.0, zeta=0.5)
        with pytest.raises(ValueError):
            PremConfig(0.0)
        with pytest.raises(ValueError):
            PremConfig(1.0, delta=1.0)
        with pytest.raises(ValueError):
            PremConfig(1.0, beta=0.0)
        with pytest.raises(ValueError):
            derive_parameters(PremConfig(1.0), 0, 4, 1)


class TestMWU:
    def test_value(self):
        out = mwu_update(Histogram([1, 1]), 1, np.array([True, False]), 0.1, 2)
        e = math.exp(0.1)
        np.testing.assert_allclose(out.weights, [2 * e / (e + 1), 2 / (e + 1)], rtol=1e-15)
        np.testing.assert_allclose(out.weights, [1.0500, 0.9500], atol=5e-5)

    def test_empty_and_full_subset(self):
        h = Histogram([1, 2, 5])
        a = mwu_update(h, -1, np.zeros(3, bool), 0.3, 4)
        b = mwu_update(h, -1, np.ones(3, bool), 0.3, 4)
        np.testing.assert_allclose(a.weights, h.weights * 0.5)
        np.testing.assert_allclose(b.weights, a.weights, rtol=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            mwu_update(Histogram.zeros(2), 1, np.ones(2, bool), 0.1, 1)
        with pytest.raises(ValueError):
            mwu_update(Histogram([1, 1]), 1, np.ones(2, bool), 0.0, 1)
        with pytest.raises(ValueError):
            mwu_update(Histogram([1, 1]), 0, np.ones(2, bool), 0.1, 1)

    def test_mass_conservation(self):
        r = np.random.default_rng(0)
        for _ in range(1000):
            size = int(r.integers(1, 50))
            h = Histogram(r.random(size) * 10 ** r.uniform(-3, 6) + 1e-12)
            n_t = 10 ** r.uniform(-2, 7)
            out = mwu_update(h, int(r.choice([-1, 1])), r.random(size) < 0.5, r.uniform(0.01, 0.125), n_t)
            assert abs(out.total_mass - n_t) <= 1e-9 * n_t


class TestAugment:
    def test_append_and_idempotent(self):
        F = family(8, 3, 0, p=0.3)
        G = augment_all_ones(F)
        assert len(G) == len(F) + 1 and G[-1] == BinaryQuery.all_ones(8)
        assert list(G[:3]) == list(F)
        assert augment_all_ones(G) is G
        H = QueryFamily([BinaryQuery.all_ones(8), *F])
        assert augment_all_ones(H) is H


def check_trace(result, h_star):
    subsets = [np.array(r.subset) for r in result.rounds if r.subset is not None]
    seen = set()
    for S in subsets:
        assert seen.isdisjoint(S.tolist())
        seen.update(S.tolist())
    outside = np.setdiff1d(np.arange(h_star.size), list(seen))
    assert np.all(result.synthetic.weights[outside] == 0)
    d = result.derived
    assert result.ledger.laplace_releases <= d.I
    assert result.ledger.monitor_instances <= d.I * d.T


class TestRun:
    def test_degenerate_regime_outputs_zero(self):
        # at ordinary budgets alpha exceeds n and the first round breaks
        h = synthetic_population(64, 10**4, 0)
        r = run_prem(h, family(64, 16, 1), PremConfig(1.0, 1e-6), 3)
        assert r.certified_alpha > h.total_mass
        assert r.break_round == 0 and r.rounds[0].stop == "small"
        assert r.synthetic.total_mass == 0 and not r.failed

    def test_active_regime_accurate(self):
        h = synthetic_population(64, 10**4, 1)
        F = family(64, 16, 2)
        r = run_prem(h, F, PremConfig(ACTIVE_EPS, 1e-6), 4)
        assert not r.failed
        assert r.certified_alpha < h.total_mass
        assert sum(x.inner_iterations for x in r.rounds) > 1
        assert audit(r.synthetic, h, augment_all_ones(F), 0.2).measured_alpha <= r.certified_alpha
        check_trace(r, h)

    def test_near_noiseless_small(self):
        h = synthetic_population(16, 10**4, 2)
        F = family(16, 8, 3)
        for seed in range(5):
            r = run_prem(h, F, PremConfig(1e6, 1e-6), seed)
            assert not r.failed
            assert audit(r.synthetic, h, F, 0.2).measured_alpha <= r.certified_alpha
            check_trace(r, h)

    def test_point_mass(self):
        n = 10**4
        w = np.zeros(32)
        w[5] = n
        F = QueryFamily([BinaryQuery.from_indices([5], 32)])
        r = run_prem(Histogram(w), F, PremConfig(ACTIVE_EPS, 1e-6), 0)
        got = r.synthetic.weights[5]
        assert (1 - 0.2) * n - r.certified_alpha <= got <= (1 + 0.2) * n + r.certified_alpha
        check_trace(r, Histogram(w))

    def test_pure_active(self):
        h = synthetic_population(32, 10**4, 3)
        F = family(32, 8, 4)
        r = run_prem(h, F, PremConfig(ACTIVE_EPS, 0.0), 5)
        assert r.ledger.pure and not r.failed
        assert audit(r.synthetic, h, F, 0.2).measured_alpha <= r.certified_alpha
        assert r.ledger.composed().within(PrivacyBudget(ACTIVE_EPS, 0.0))
        check_trace(r, h)

    def test_deterministic(self):
        h = synthetic_population(32, 5000, 4)
        F = family(32, 8, 5)
        cfg = PremConfig(ACTIVE_EPS, 1e-6)
        a, b = run_prem(h, F, cfg, 11), run_prem(h, F, cfg, 11)
        assert a.synthetic.weights.tobytes() == b.synthetic.weights.tobytes()
        assert a.trace_dict() == b.trace_dict()

    def test_zero_noise_mode(self):
        h = synthetic_population(16, 5000, 5)
        r = run_prem(h, family(16, 4, 6), PremConfig(ACTIVE_EPS, 1e-6), ZeroNoise())
        assert not r.failed

    def test_budget_ledger(self):
        h = synthetic_population(32, 5000, 6)
        for eps in (0.5, 1e6, ACTIVE_EPS):
            r = run_prem(h, family(32, 8, 7), PremConfig(eps, 1e-6), 2)
            assert r.ledger.composed().within(PrivacyBudget(eps, 1e-6))
            worst = r.ledger.composed(r.derived.I, r.derived.I * r.derived.T)
            assert worst.within(PrivacyBudget(eps, 1e-6))

    def test_rescale(self):
        h = synthetic_population(32, 5000, 7)
        r = run_prem(h, family(32, 8, 8), PremConfig(ACTIVE_EPS, 1e-6, rescale=True), 1)
        assert r.synthetic.total_mass == pytest.approx(5000)

    def test_preconditions(self, rng):
        F = family(4, 2, 0)
        with pytest.raises(ValueError):
            run_prem(Histogram([0.5, 1, 1, 1]), F, PremConfig(1.0), rng)
        with pytest.raises(ValueError):
            run_prem(Histogram.zeros(4), F, PremConfig(1.0), rng)
        with pytest.raises(TypeError):
            run_prem(Histogram([1, 1, 1, 1]), QueryFamily([RealQuery([0.5] * 4)]), PremConfig(1.0), rng)
