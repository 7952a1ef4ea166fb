"""Query-family generators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import BinaryQuery, Domain, QueryFamily, RealQuery

KINDS = ("random-binary", "marginal", "threshold-real", "explicit")


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    count: int | None = None
    seed: int = 0
    density: float = 0.5
    arity: int = 1
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r}; expected one of {KINDS}")
        if not 0 <= self.density <= 1:
            raise ValueError("density must lie in [0, 1]")
        if self.count is not None and self.count < 1:
            raise ValueError("count must be >= 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def random_binary(domain_size: int, count: int, p: float, rng) -> QueryFamily:
    """Each query contains each domain element independently with probability p."""
    masks = rng.random((count, domain_size)) < p
    return QueryFamily(BinaryQuery(m) for m in masks)


def marginals(domain: Domain, arity: int, count: int | None = None, rng=None) -> QueryFamily:
    """Conjunction indicators for every value combination of k-attribute subsets.

    All C(d, k) attribute subsets are used unless ``count`` caps the number of
    subsets, in which case they are drawn without replacement from ``rng``.
    """
    if domain.attributes is None:
        raise ValueError("marginal workloads need an attribute schema")
    d = len(domain.attributes)
    if not 1 <= arity <= d:
        raise ValueError(f"marginal arity {arity} must lie in [1, {d}] (the number of attributes)")
    subsets = list(itertools.combinations(range(d), arity))
    if count is not None and count < len(subsets):
        pick = sorted(rng.choice(len(subsets), size=count, replace=False))
        subsets = [subsets[i] for i in pick]
    digits = domain.digits_table()
    radices = domain.radices
    queries = []
    for attrs in subsets:
        for values in itertools.product(*(range(radices[a]) for a in attrs)):
            mask = np.all(digits[:, attrs] == np.array(values), axis=1)
            queries.append(BinaryQuery(mask))
    return QueryFamily(queries)


def threshold_real(domain_size: int, count: int, score: np.ndarray | None = None) -> QueryFamily:
    """Ramps f_j(x) = min(1, score(x) / t_j) for t_j = j / count.

    ``score`` defaults to x / (|X| - 1).
    """
    if score is None:
        score = np.arange(domain_size) / max(domain_size - 1, 1)
    score = np.asarray(score, dtype=float)
    if np.any(score < 0) or np.any(score > 1):
        raise ValueError("scores must lie in [0, 1]")
    ts = np.arange(1, count + 1) / count
    return QueryFamily(RealQuery(np.minimum(1.0, score / t)) for t in ts)


def generate_workload(spec: WorkloadSpec, domain: Domain, rng=None) -> QueryFamily:
    """Reproducible from (kind, params, seed) when ``rng`` is omitted."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind == "random-binary":
        return random_binary(domain.size, spec.count or 16, spec.density, rng)
    if spec.kind == "marginal":
        return marginals(domain, spec.arity, spec.count, rng)
    if spec.kind == "threshold-real":
        return threshold_real(domain.size, spec.count or 8)
    from .dataio import read_family

    if spec.path is None:
        raise ValueError("explicit workloads need a file path")
    return read_family(spec.path)
