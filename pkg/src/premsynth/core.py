"""Domain, histogram and query algebra shared by every mechanism.

Histograms are dense float vectors indexed by domain element. Binary queries
are boolean masks (numpy's bitset), real-valued queries are float vectors in
[0, 1]. All types are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

_FSUM_THRESHOLD = 2**16


class DimensionError(ValueError):
    """Raised when a histogram, query or subset live on different domains."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _mass(weights: np.ndarray) -> float:
    # MWU renormalisation amplifies rounding drift on large domains
    if weights.size > _FSUM_THRESHOLD:
        return math.fsum(weights.tolist())
    return float(weights.sum())


@dataclass(frozen=True)
class Domain:
    """A finite domain X, optionally the product of categorical attributes.

    Elements of a schema-backed domain use mixed-radix row-major encoding:
    the first attribute is the most significant digit.
    """

    size: int
    attributes: tuple[tuple[str, tuple[str, ...]], ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"domain size must be >= 1, got {self.size}")
        if self.attributes is not None:
            prod = math.prod(len(cats) for _, cats in self.attributes)
            if prod != self.size:
                raise ValueError(
                    f"schema has {prod} cells but domain size is {self.size}"
                )

    @classmethod
    def from_schema(cls, attributes: Sequence[tuple[str, Sequence[str]]]) -> "Domain":
        attrs = tuple((str(name), tuple(str(c) for c in cats)) for name, cats in attributes)
        if not attrs:
            raise ValueError("schema needs at least one attribute")
        for name, cats in attrs:
            if not cats:
                raise ValueError(f"attribute {name!r} has no categories")
            if len(set(cats)) != len(cats):
                raise ValueError(f"attribute {name!r} has duplicate categories")
        return cls(math.prod(len(c) for _, c in attrs), attrs)

    @property
    def radices(self) -> tuple[int, ...]:
        if self.attributes is None:
            return (self.size,)
        return tuple(len(c) for _, c in self.attributes)

    def encode(self, digits: Sequence[int]) -> int:
        index = 0
        for d, r in zip(digits, self.radices, strict=True):
            if not 0 <= d < r:
                raise ValueError(f"digit {d} out of range for radix {r}")
            index = index * r + d
        return index

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} outside domain of size {self.size}")
        digits = []
        for r in reversed(self.radices):
            index, d = divmod(index, r)
            digits.append(d)
        return tuple(reversed(digits))

    def digits_table(self) -> np.ndarray:
        """(size, n_attributes) array with the decoded digits of every element."""
        grids = np.unravel_index(np.arange(self.size), self.radices)
        return np.stack(grids, axis=1)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Nonnegative weights over a domain; ``total_mass`` is the L1 norm."""

    weights: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True).ravel()
        if w.size == 0:
            raise ValueError("histogram must cover a nonempty domain")
        if not np.all(np.isfinite(w)):
            raise ValueError("histogram weights must be finite")
        if np.any(w < 0):
            raise ValueError("histogram weights must be nonnegative")
        object.__setattr__(self, "weights", _freeze(w))
        object.__setattr__(self, "total_mass", _mass(w))

    @classmethod
    def zeros(cls, size: int) -> "Histogram":
        return cls(np.zeros(size))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.weights == np.round(self.weights)))

    def __add__(self, other: "Histogram") -> "Histogram":
        _check_dims(self.size, other.size)
        return Histogram(self.weights + other.weights)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Histogram(size={self.size}, total_mass={self.total_mass:g})"


@dataclass(frozen=True, eq=False)
class BinaryQuery:
    """Counting query f: X -> {0, 1}, stored as the mask of f^-1(1)."""

    support: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support)
        if s.dtype != np.bool_:
            if s.size and not np.all((s == 0) | (s == 1)):
                raise ValueError("binary query mask must be 0/1 valued")
            s = s.astype(bool)
        object.__setattr__(self, "support", _freeze(s.ravel().copy()))

    @classmethod
    def from_indices(cls, indices: Iterable[int], size: int) -> "BinaryQuery":
        mask = np.zeros(size, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= size):
            raise ValueError(f"query index outside [0, {size})")
        mask[idx] = True
        return cls(mask)

    @classmethod
    def all_ones(cls, size: int) -> "BinaryQuery":
        return cls(np.ones(size, dtype=bool))

    @property
    def size(self) -> int:
        return self.support.size

    @property
    def values(self) -> np.ndarray:
        return self.support.astype(np.float64)

    def indices(self) -> list[int]:
        return np.flatnonzero(self.support).tolist()

    def __eq__(self, other):
        if not isinstance(other, BinaryQuery):
            return NotImplemented
        return np.array_equal(self.support, other.support)

    def __hash__(self):
        return hash(np.packbits(self.support).tobytes())


@dataclass(frozen=True, eq=False)
class RealQuery:
    """Linear query f: X -> [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("real query values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def size(self) -> int:
        return self.values.size


Query = Union[BinaryQuery, RealQuery]


class QueryFamily(Sequence):
    """Ordered, nonempty family of queries; a query's ID is its position."""

    def __init__(self, queries: Iterable[Query]):
        self._queries: tuple[Query, ...] = tuple(queries)
        if not self._queries:
            raise ValueError("query family must be nonempty")
        sizes = {q.size for q in self._queries}
        if len(sizes) != 1:
            raise DimensionError(f"queries span different domain sizes: {sorted(sizes)}")
        self._matrix: np.ndarray | None = None

    def __getitem__(self, i):
        return self._queries[i]

    def __len__(self):
        return len(self._queries)

    def __repr__(self):
        return f"QueryFamily(n_queries={len(self)}, domain_size={self.domain_size})"

    @property
    def domain_size(self) -> int:
        return self._queries[0].size

    @property
    def is_binary(self) -> bool:
        return all(isinstance(q, BinaryQuery) for q in self._queries)

    @property
    def matrix(self) -> np.ndarray:
        """Dense (|F|, |X|) matrix of query values, cached."""
        if self._matrix is None:
            m = np.stack([q.values for q in self._queries])
            self._matrix = _freeze(m)
        return self._matrix

    @property
    def masks(self) -> np.ndarray:
        """Boolean (|F|, |X|) supports; binary families only."""
        if not self.is_binary:
            raise TypeError("masks are only defined for binary query families")
        return self.matrix > 0

    def answers(self, h: Histogram) -> np.ndarray:
        _check_dims(self.domain_size, h.size)
        return self.matrix @ h.weights


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"domain size mismatch: {a} != {b}")


def _mask(S, size: int) -> np.ndarray:
    if isinstance(S, BinaryQuery):
        S = S.support
    S = np.asarray(S)
    if S.dtype != np.bool_:
        raise TypeError("subsets must be boolean masks")
    _check_dims(S.size, size)
    return S


def evaluate_query(h: Histogram, f: Query) -> float:
    """Return <h, f> = sum_x h_x f(x)."""
    _check_dims(h.size, f.size)
    if isinstance(f, BinaryQuery):
        return float(h.weights[f.support].sum())
    return float(h.weights @ f.values)


def restrict(h: Histogram, S) -> Histogram:
    """Zero out every weight outside the subset mask ``S``."""
    mask = _mask(S, h.size)
    return Histogram(np.where(mask, h.weights, 0.0))


def indicator_mass(h: Histogram, S) -> float:
    mask = _mask(S, h.size)
    return float(h.weights[mask].sum())


def histogram_from_records(records: Iterable[int], domain: Domain | int) -> Histogram:
    size = domain.size if isinstance(domain, Domain) else int(domain)
    recs = np.fromiter((int(r) for r in records), dtype=np.int64)
    bad = np.flatnonzero((recs < 0) | (recs >= size))
    if bad.size:
        row = int(bad[0])
        raise ValueError(f"record {row} has index {recs[row]} outside domain of size {size}")
    return Histogram(np.bincount(recs, minlength=size).astype(np.float64))


def sample_records_from_histogram(h: Histogram, m: int, rng: np.random.Generator) -> list[int]:
    """Draw ``m`` i.i.d. records from the distribution h / ||h||_1."""
    if h.total_mass <= 0:
        raise ValueError("cannot sample from a zero-mass histogram")
    if m < 1:
        raise ValueError("m must be a positive integer")
    cdf = np.cumsum(h.weights)
    cdf /= cdf[-1]
    u = rng.random(m)
    idx = np.searchsorted(cdf, u, side="right")
    # guards against u landing exactly on a rounded final cdf value
    return np.minimum(idx, h.size - 1).tolist()
