import math

import numpy as np
import pytest

from oracles import multiset_softmax
from premsynth.baselines import (
    SparseHistogramSpace,
    exponential_mechanism,
    expmech_alpha_bound,
    laplace_per_query_baseline,
    prop_d2_support_size,
    relative_score,
    sparse_sample_histogram,
)
from premsynth.core import BinaryQuery, Domain, Histogram, QueryFamily
from premsynth.workloads import random_binary


def tv_from_draws(draws, cands, probs):
    index = {c: i for i, c in enumerate(cands)}
    counts = np.zeros(len(cands))
    for h in draws:
        counts[index[tuple(h.weights.tolist())]] += 1
    return 0.5 * np.abs(counts / len(draws) - np.asarray(probs)).sum()


class TestScore:
    def test_example(self):
        F = QueryFamily([BinaryQuery.from_indices([0], 2)])
        assert relative_score(Histogram([0, 4]), Histogram([4, 0]), F, 0.25) == pytest.approx(-3)

    def test_self_score(self):
        r = np.random.default_rng(0)
        for _ in range(100):
            h = Histogram(r.integers(0, 20, 8))
            F = random_binary(8, 5, 0.4, r)
            zeta = r.uniform(0, 0.5)
            s = relative_score(h, h, F, zeta)
            assert s == pytest.approx(zeta * F.answers(h).min())
            assert s >= 0
        assert relative_score(h, h, F, 0.0) == 0

    def test_sensitivity(self):
        r = np.random.default_rng(1)
        for _ in range(1000):
            size = 8
            w = r.integers(0, 10, size).astype(float)
            w[r.integers(size)] += 1
            src = r.choice(np.flatnonzero(w))
            w2 = w.copy()
            w2[src] -= 1
            w2[r.integers(size)] += 1
            F = random_binary(size, 4, 0.5, r)
            h = Histogram(r.random(size) * 20)
            zeta = r.uniform(0, 0.5)
            diff = relative_score(h, Histogram(w), F, zeta) - relative_score(h, Histogram(w2), F, zeta)
            assert abs(diff) <= 1 + zeta + 1e-12


class TestSpace:
    def test_enumeration(self):
        sp = SparseHistogramSpace(2, Domain(3), 6.0)
        c = sp.candidates()
        assert len(sp) == 6 and c.shape == (6, 3) and sp.bound == 9
        np.testing.assert_array_equal(c[0], [6, 0, 0])
        np.testing.assert_array_equal(c[1], [3, 3, 0])
        assert np.allclose(c.sum(axis=1), 6.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SparseHistogramSpace(0, Domain(3), 1.0)


class TestExpMech:
    h = Histogram([3, 1, 0, 2])
    F = QueryFamily([BinaryQuery.from_indices([0, 1], 4), BinaryQuery.from_indices([2, 3], 4), BinaryQuery.all_ones(4)])

    @pytest.mark.parametrize("eps", [0.5, 2.0])
    def test_matches_softmax(self, eps):
        cands, probs = multiset_softmax(self.h.weights.tolist(), [q.values.tolist() for q in self.F], eps, 0.2, 2)
        draws = exponential_mechanism(self.h, self.F, eps, 0.2, 2, np.random.default_rng(7), size=10**5)
        assert tv_from_draws(draws, cands, probs) <= 0.02

    def test_argmax_mode(self):
        cands, probs = multiset_softmax(self.h.weights.tolist(), [q.values.tolist() for q in self.F], 1.0, 0.2, 2)
        got = exponential_mechanism(self.h, self.F, math.inf, 0.2, 2, None)
        assert tuple(got.weights.tolist()) == cands[int(np.argmax(probs))]

    def test_ties_uniform(self):
        F = QueryFamily([BinaryQuery(np.zeros(4, bool))])
        draws = exponential_mechanism(self.h, F, 1.0, 0.2, 2, np.random.default_rng(8), size=10**5)
        cands, probs = multiset_softmax(self.h.weights.tolist(), [[0.0] * 4], 1.0, 0.2, 2)
        assert np.allclose(probs, 1 / len(probs))
        assert tv_from_draws(draws, cands, probs) <= 0.02

    def test_cap(self, rng):
        with pytest.raises(ValueError, match="enumeration cap"):
            exponential_mechanism(Histogram(np.ones(100)), random_binary(100, 2, 0.5, rng), 1.0, 0.2, 4, rng)

    def test_seeded(self):
        a = exponential_mechanism(self.h, self.F, 1.0, 0.2, 2, np.random.default_rng(1), size=20)
        b = exponential_mechanism(self.h, self.F, 1.0, 0.2, 2, np.random.default_rng(1), size=20)
        assert all(x == y for x, y in zip(a, b))


class TestSparseSample:
    def test_mass(self, rng):
        h = Histogram(np.full(10, 7.0))
        assert sparse_sample_histogram(h, 70, rng).total_mass == pytest.approx(70)

    def test_point_mass(self, rng):
        h = Histogram([0, 0, 9, 0])
        assert sparse_sample_histogram(h, 5, rng) == h

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            sparse_sample_histogram(Histogram.zeros(3), 2, rng)
        with pytest.raises(ValueError):
            sparse_sample_histogram(Histogram([1, 1]), 0, rng)

    def test_support_size_formula(self):
        k = prop_d2_support_size(1000, 250, 0.5, 4)
        assert k == math.ceil(8 * math.e / 0.25 * 4 * math.log(16))


class TestLaplaceBaseline:
    def test_near_noiseless(self, rng):
        h = Histogram(rng.integers(0, 100, 32))
        F = random_binary(32, 10, 0.5, rng)
        est = laplace_per_query_baseline(h, F, 1e6, rng)
        assert np.max(np.abs(est - F.answers(h))) < 1e-3

    def test_error_linear_in_family_size(self):
        r = np.random.default_rng(2)
        h = Histogram(r.integers(0, 100, 16))
        p90 = {}
        for m in (5, 20, 80):
            F = random_binary(16, m, 0.5, r)
            errs = np.concatenate([laplace_per_query_baseline(h, F, 1.0, r) - F.answers(h) for _ in range(400)])
            p90[m] = np.percentile(np.abs(errs), 90)
        # |Lap(b)| has 90th percentile b ln 10, b = |F| / eps
        for m, v in p90.items():
            assert v == pytest.approx(m * math.log(10), rel=0.08)

    def test_bound_formula(self):
        b = expmech_alpha_bound(100, 4, 3, 1.0, 0.2, 0.1)
        expected = 2 * math.sqrt(16 * 1.2 * math.e * 100 / 0.04 * math.log(12) * math.log(4)) + 2 * 1.2 * math.log(10)
        assert b == pytest.approx(expected)
