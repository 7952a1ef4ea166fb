"""Reference mechanisms to compare PREM against.

* the exponential mechanism over k-point histograms (pure DP, desk scale only),
* i.i.d. resampling into a k-point histogram (non-private, the existence
  argument behind the exponential mechanism's accuracy),
* independent Laplace noise per query (additive error only).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import Domain, Histogram, QueryFamily, _check_dims, sample_records_from_histogram
from .privacy import laplace_sample

ENUMERATION_CAP = 10**6


def relative_score(h: Histogram, h_star: Histogram, F: QueryFamily, zeta: float) -> float:
    """-max_f max{f(h) - (1+zeta) f(h*), (1-zeta) f(h*) - f(h)}."""
    _check_dims(h.size, h_star.size)
    est = F.answers(h)
    true = F.answers(h_star)
    return -float(np.max(np.maximum(est - (1 + zeta) * true, (1 - zeta) * true - est)))


@dataclass(frozen=True)
class SparseHistogramSpace:
    """Histograms putting mass n/k on each of k (not necessarily distinct) points.

    Candidates are multisets, enumerated in lexicographic order.
    """

    support_size: int
    domain: Domain
    total_mass: float

    def __post_init__(self):
        if self.support_size < 1:
            raise ValueError("support size k must be >= 1")

    @property
    def bound(self) -> int:
        """|X|^k, the crude cardinality bound used for the enumeration cap."""
        return self.domain.size**self.support_size

    def __len__(self):
        return math.comb(self.domain.size + self.support_size - 1, self.support_size)

    def candidates(self) -> np.ndarray:
        """(n_candidates, |X|) matrix of candidate histograms."""
        k, size = self.support_size, self.domain.size
        combos = np.array(list(itertools.combinations_with_replacement(range(size), k)), dtype=np.int64)
        counts = np.zeros((len(combos), size))
        rows = np.repeat(np.arange(len(combos)), k)
        np.add.at(counts, (rows, combos.ravel()), 1.0)
        return counts * self.total_mass / k


def _exp_mech_logits(h_star, F, eps, zeta, k, cap):
    space = SparseHistogramSpace(k, Domain(h_star.size), h_star.total_mass)
    if space.bound > cap:
        raise ValueError(
            f"|X|^k = {h_star.size}^{k} exceeds the enumeration cap {cap}; "
            "the exponential mechanism is only feasible at desk scale (shrink |X| or k)"
        )
    cands = space.candidates()
    est = cands @ F.matrix.T
    true = F.answers(h_star)
    scores = -np.max(np.maximum(est - (1 + zeta) * true, (1 - zeta) * true - est), axis=1)
    return cands, scores


def exponential_mechanism(
    h_star: Histogram,
    F: QueryFamily,
    eps: float,
    zeta: float,
    k: int,
    rng,
    size: int | None = None,
    cap: int = ENUMERATION_CAP,
):
    """eps-DP selection of a k-point histogram, P(h) ~ exp(eps s(h) / (2 (1 + zeta))).

    ``eps = math.inf`` returns the first highest-scoring candidate. With
    ``size`` set, returns a list of that many independent draws.
    """
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    cands, scores = _exp_mech_logits(h_star, F, eps, zeta, k, cap)
    if math.isinf(eps):
        best = Histogram(cands[int(np.argmax(scores))])
        return best if size is None else [best] * size
    logits = scores * eps / (2 * (1 + zeta))
    logits -= logits.max()
    probs = np.exp(logits)
    cdf = np.cumsum(probs / probs.sum())
    u = rng.random(1 if size is None else size)
    idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)
    if size is None:
        return Histogram(cands[idx[0]])
    return [Histogram(cands[i]) for i in idx]


def prop_d2_support_size(n: float, alpha_prime: float, zeta: float, n_queries: int) -> int:
    """k = ceil((8e / zeta^2) (n / alpha') ln(4 |F|))."""
    return math.ceil(8 * math.e / zeta**2 * (n / alpha_prime) * math.log(4 * n_queries))


def expmech_alpha_bound(n: float, domain_size: int, n_queries: int, eps: float, zeta: float, beta: float) -> float:
    return 2 * math.sqrt(
        16 * (1 + zeta) * math.e * n / (eps * zeta**2) * math.log(4 * n_queries) * math.log(domain_size)
    ) + 2 * (1 + zeta) / eps * math.log(1 / beta)


def sparse_sample_histogram(h_star: Histogram, k: int, rng) -> Histogram:
    """k i.i.d. draws from h*/n, each carrying mass n/k. Not private."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if h_star.total_mass <= 0:
        raise ValueError("cannot resample a zero-mass histogram")
    draws = sample_records_from_histogram(h_star, k, rng)
    counts = np.bincount(draws, minlength=h_star.size).astype(np.float64)
    return Histogram(counts * h_star.total_mass / k)


def laplace_per_query_baseline(h_star: Histogram, F: QueryFamily, eps: float, rng) -> np.ndarray:
    """f(h*) + Lap(|F| / eps) for every query: eps-DP by basic composition."""
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    true = F.answers(h_star)
    return true + laplace_sample(len(F) / eps, rng, size=len(F))
