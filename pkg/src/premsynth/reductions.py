"""Real-valued queries via exponentially spaced threshold queries.

Each f: X -> [0, 1] is replaced by its level sets f_{>=tau_i} on the ladder
tau_i = (1 + zeta')^-i, i = 0..L, plus tau_{L+1} = 0. The staircase
f~ = sum_i (tau_i - tau_{i+1}) f_{>=tau_i} sandwiches f:

    f~(h) <= f(h) <= (1 + zeta') f~(h) + tau_L ||h||_1
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryQuery, Histogram, QueryFamily, RealQuery
from .prem import PremConfig, PremResult, run_prem


@dataclass(frozen=True)
class ThresholdLadder:
    zeta_prime: float
    L: int
    taus: np.ndarray

    @property
    def levels(self) -> int:
        return self.L + 2


def build_ladder(zeta: float, n: int) -> ThresholdLadder:
    if not 0 < zeta <= 0.5:
        raise ValueError(f"zeta must lie in (0, 0.5], got {zeta}")
    if n < 1:
        raise ValueError("n must be >= 1")
    zp = 0.1 * zeta
    L = math.ceil(math.log(n) / math.log1p(zp)) + 1
    taus = np.empty(L + 2)
    taus[: L + 1] = (1 + zp) ** -np.arange(L + 1, dtype=float)
    taus[L + 1] = 0.0
    taus.setflags(write=False)
    return ThresholdLadder(zp, L, taus)


def _as_values(f) -> np.ndarray:
    return f.values if isinstance(f, (RealQuery, BinaryQuery)) else np.asarray(f, dtype=float)


def binarize_family(F_real: QueryFamily, ladder: ThresholdLadder) -> QueryFamily:
    """All level sets f_{>=tau_i}; query j at level i gets ID j * (L + 2) + i."""
    out = []
    for f in F_real:
        v = _as_values(f)
        out.extend(BinaryQuery(v >= tau) for tau in ladder.taus)
    return QueryFamily(out)


def staircase_surrogate(f, ladder: ThresholdLadder) -> RealQuery:
    v = _as_values(f)
    # sum_{i >= i(x)} (tau_i - tau_{i+1}) telescopes to tau_{i(x)}, i(x) the
    # first level with f(x) >= tau_i; evaluating it directly avoids rounding
    # the partial sums above f(x)
    first = np.argmax(v[None, :] >= ladder.taus[:, None], axis=0)
    return RealQuery(ladder.taus[first])


def run_prem_real(h_star: Histogram, F_real: QueryFamily, config: PremConfig, rng) -> PremResult:
    """PREM for [0, 1]-valued queries at relative parameter zeta / 10.

    The certified additive error for F_real is 3 alpha' + 1, alpha' the
    binary run's certified alpha.
    """
    n = int(round(h_star.total_mass))
    ladder = build_ladder(config.zeta, max(n, 1))
    F_bin = binarize_family(F_real, ladder)
    ones = BinaryQuery.all_ones(h_star.size)
    deduped = [q for q in F_bin if q != ones] + [ones]
    binary_config = dataclasses.replace(config, zeta=ladder.zeta_prime)
    result = run_prem(h_star, QueryFamily(deduped), binary_config, rng)
    return dataclasses.replace(
        result,
        certified_alpha=3 * result.certified_alpha + 1,
        binary_alpha=result.certified_alpha,
    )
