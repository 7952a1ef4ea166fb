import math

import numpy as np
import pytest

from premsynth.core import BinaryQuery, Histogram, QueryFamily, RealQuery, evaluate_query
from premsynth.evaluation import audit, synthetic_population
from premsynth.prem import PremConfig
from premsynth.reductions import binarize_family, build_ladder, run_prem_real, staircase_surrogate
from premsynth.workloads import threshold_real


def sandwich_holds(f, h, ladder) -> bool:
    ft = evaluate_query(h, staircase_surrogate(f, ladder))
    fv = evaluate_query(h, f)
    return ft <= fv <= (1 + ladder.zeta_prime) * ft + ladder.taus[ladder.L] * h.total_mass


class TestLadder:
    def test_L(self):
        lad = build_ladder(0.5, 10)
        assert lad.zeta_prime == pytest.approx(0.05)
        assert math.ceil(math.log(10) / math.log(1.05)) + 1 == 49
        assert lad.L == 49 and len(lad.taus) == 51

    def test_shape(self):
        lad = build_ladder(0.2, 1000)
        assert lad.taus[0] == 1 and lad.taus[-1] == 0
        assert np.all(np.diff(lad.taus) < 0)

    def test_rejects(self):
        with pytest.raises(ValueError):
            build_ladder(1.0, 10)
        with pytest.raises(ValueError):
            build_ladder(0.0, 10)
        with pytest.raises(ValueError):
            build_ladder(0.2, 0)

    def test_tau_L_times_n(self):
        r = np.random.default_rng(0)
        for _ in range(100):
            n = int(r.integers(1, 10**7))
            lad = build_ladder(r.uniform(1e-3, 0.5), n)
            assert lad.taus[lad.L] * n <= 1


class TestBinarize:
    lad = build_ladder(0.3, 100)

    def test_binary_query_levels(self):
        f = BinaryQuery.from_indices([0, 3], 5)
        Fb = binarize_family(QueryFamily([f]), self.lad)
        assert len(Fb) == self.lad.L + 2
        assert all(Fb[i] == f for i in range(self.lad.L + 1))
        assert Fb[self.lad.L + 1] == BinaryQuery.all_ones(5)

    def test_zero_query(self):
        Fb = binarize_family(QueryFamily([RealQuery(np.zeros(5))]), self.lad)
        assert all(not Fb[i].support.any() for i in range(self.lad.L + 1))

    def test_ids_and_count(self):
        r = np.random.default_rng(1)
        F = QueryFamily(RealQuery(r.random(6)) for _ in range(4))
        Fb = binarize_family(F, self.lad)
        assert len(Fb) == 4 * (self.lad.L + 2)
        j, i = 2, 7
        assert Fb[j * (self.lad.L + 2) + i] == BinaryQuery(F[j].values >= self.lad.taus[i])


class TestStaircase:
    lad = build_ladder(0.4, 500)

    def test_binary_is_fixed_point(self):
        f = BinaryQuery.from_indices([1, 2], 4)
        np.testing.assert_array_equal(staircase_surrogate(f, self.lad).values, f.values)

    def test_zero(self):
        assert not staircase_surrogate(RealQuery(np.zeros(4)), self.lad).values.any()

    def test_matches_explicit_sum(self):
        r = np.random.default_rng(2)
        taus = self.lad.taus
        for _ in range(200):
            f = RealQuery(r.random(10))
            h = Histogram(r.integers(0, 100, 10))
            explicit = sum(
                (taus[i] - taus[i + 1]) * evaluate_query(h, BinaryQuery(f.values >= taus[i]))
                for i in range(self.lad.L + 1)
            )
            assert evaluate_query(h, staircase_surrogate(f, self.lad)) == pytest.approx(explicit, rel=1e-9, abs=1e-9)

    def test_convex_weights(self):
        diffs = self.lad.taus[:-1] - self.lad.taus[1:]
        assert math.fsum(diffs) == pytest.approx(1.0, abs=1e-15)

    def test_pointwise_bounds(self):
        r = np.random.default_rng(3)
        f = RealQuery(r.random(1000))
        ft = staircase_surrogate(f, self.lad).values
        assert np.all(ft <= f.values) and np.all(ft >= 0)


def test_sandwich_exact_random():
    r = np.random.default_rng(4)
    for _ in range(10**4):
        size = int(r.integers(1, 20))
        n = int(r.integers(1, 10**5))
        lad = build_ladder(r.uniform(1e-3, 0.5), n)
        vals = r.random(size)
        vals[r.random(size) < 0.2] = r.choice([0.0, 1.0])
        h = Histogram(r.multinomial(n, np.ones(size) / size))
        assert sandwich_holds(RealQuery(vals), h, lad)


class TestRunReal:
    def test_binary_inputs(self):
        h = synthetic_population(16, 1000, 8)
        r = np.random.default_rng(5)
        F = QueryFamily(RealQuery((r.random(16) < 0.5).astype(float)) for _ in range(4))
        res = run_prem_real(h, F, PremConfig(1e6, 1e-6), 1)
        assert res.certified_alpha == pytest.approx(3 * res.binary_alpha + 1)
        assert audit(res.synthetic, h, F, 0.2).measured_alpha <= res.certified_alpha

    def test_linear_query_active(self):
        h = synthetic_population(16, 1000, 9)
        F = QueryFamily([RealQuery(np.arange(16) / 16)])
        res = run_prem_real(h, F, PremConfig(1e16, 1e-6), 2)
        assert not res.failed
        assert audit(res.synthetic, h, F, 0.2).measured_alpha <= res.certified_alpha

    def test_family_size_reported(self):
        h = synthetic_population(16, 1000, 10)
        F = threshold_real(16, 3)
        res = run_prem_real(h, F, PremConfig(1.0, 1e-6), 3)
        lad = build_ladder(0.2, 1000)
        # (L + 1) levels per query plus a single shared all-ones query
        assert res.family_size == 3 * (lad.L + 1) + 1
