"""Stateful interval monitors over a private histogram.

Both monitors answer whether a noisy count of f on the current active set lies
inside (tau_l, tau_u). Out-of-range answers remove f's support from the
active set, so privacy is paid mostly for those. The approximate-DP monitor
adds fresh Lap(1/a) per query; the pure-DP monitor is a sparse-vector variant
with a shared threshold noise and a cap of Gamma out-of-range answers.

A monitor is single-owner and strictly sequential.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import BinaryQuery, Histogram, _check_dims
from .privacy import laplace_sample


class Response(enum.Enum):
    INSIDE = "inside"
    ABOVE = "above"
    BELOW = "below"
    HALTED = "halted"


def _as_mask(Y, size: int) -> np.ndarray:
    if Y is None:
        return np.ones(size, dtype=bool)
    if isinstance(Y, BinaryQuery):
        Y = Y.support
    Y = np.array(Y, dtype=bool, copy=True)
    _check_dims(Y.size, size)
    return Y


def _as_masks(queries, size: int) -> np.ndarray:
    if isinstance(queries, BinaryQuery):
        queries = queries.support
    elif isinstance(queries, (list, tuple)) and queries and isinstance(queries[0], BinaryQuery):
        queries = np.stack([q.support for q in queries])
    m = np.atleast_2d(np.asarray(queries))
    if m.dtype != np.bool_:
        raise TypeError("monitors take binary queries only")
    _check_dims(m.shape[1], size)
    return m


class _Monitor:
    def __init__(self, h: Histogram, a: float, Y, rng):
        if not h.is_integral:
            raise ValueError("the private histogram must be integer-valued")
        self._h = h.weights
        self.a = float(a)
        self.active = _as_mask(Y, h.size)
        self.rng = rng
        self.queries_answered = 0
        self.out_of_range_count = 0

    def _values(self, masks: np.ndarray) -> np.ndarray:
        return masks @ np.where(self.active, self._h, 0.0)

    def _remove(self, mask: np.ndarray) -> None:
        self.active &= ~mask
        self.out_of_range_count += 1

    def query(self, f, tau_l: float, tau_u: float) -> Response:
        _, response = self.scan(f, [tau_l], [tau_u])
        return response

    def scan(self, queries, tau_l, tau_u) -> tuple[int | None, Response]:
        """Feed queries in order until the first non-Inside answer.

        Returns ``(j, response)`` for the first query j that was not Inside,
        or ``(None, Response.INSIDE)`` if all were. Queries after j are not
        asked; noise drawn for them is discarded unused, which leaves every
        answer distributed exactly as one-at-a-time querying.
        """
        raise NotImplementedError


class ApproxRangeMonitor(_Monitor):
    """Approximate-DP monitor; noise parameter 0 < a <= 1."""

    def __init__(self, h: Histogram, a: float, Y=None, rng=None):
        if not 0 < a <= 1:
            raise ValueError(f"noise parameter a must lie in (0, 1], got {a}")
        if rng is None:
            raise ValueError("an rng is required")
        super().__init__(h, a, Y, rng)

    def scan(self, queries, tau_l, tau_u):
        masks = _as_masks(queries, self._h.size)
        tl = np.asarray(tau_l, dtype=float)
        tu = np.asarray(tau_u, dtype=float)
        if np.any(tl < 0) or np.any(tu < 0):
            raise ValueError("thresholds must be nonnegative")
        m = masks.shape[0]
        noisy = self._values(masks) + laplace_sample(1 / self.a, self.rng, size=m)
        outside = np.flatnonzero(~((tl < noisy) & (noisy < tu)))
        if outside.size == 0:
            self.queries_answered += m
            return None, Response.INSIDE
        j = int(outside[0])
        self.queries_answered += j + 1
        self._remove(masks[j])
        return j, Response.ABOVE if noisy[j] >= tu[j] else Response.BELOW


class PureRangeMonitor(_Monitor):
    """Pure-DP monitor: at most ``gamma`` Above/Below answers, then halts."""

    def __init__(self, h: Histogram, a: float, gamma: int, Y=None, rng=None):
        if not a > 0:
            raise ValueError(f"noise parameter a must be positive, got {a}")
        if int(gamma) != gamma or gamma < 1:
            raise ValueError(f"gamma must be a positive integer, got {gamma}")
        if rng is None:
            raise ValueError("an rng is required")
        super().__init__(h, a, Y, rng)
        self.gamma = int(gamma)
        self.counter = 0
        self.halted = False
        self.threshold_noise = self._draw_threshold_noise()

    def _draw_threshold_noise(self) -> float:
        return laplace_sample(2 / self.a, self.rng)

    def scan(self, queries, tau_l, tau_u):
        if self.halted or self.counter >= self.gamma:
            self.halted = True
            return 0, Response.HALTED
        masks = _as_masks(queries, self._h.size)
        # any real thresholds are allowed here; tau_l = -inf disables Below
        tl = np.asarray(tau_l, dtype=float)
        tu = np.asarray(tau_u, dtype=float)
        if np.any(np.isnan(tl)) or np.any(np.isnan(tu)):
            raise ValueError("thresholds must not be NaN")
        m = masks.shape[0]
        values = self._values(masks)
        eta = self.threshold_noise
        # the second comparison uses its own independent draw
        nu1 = laplace_sample(4 / self.a, self.rng, size=m)
        nu2 = laplace_sample(4 / self.a, self.rng, size=m)
        above = values + nu1 >= tu + eta
        below = ~above & (values + nu2 <= tl - eta)
        hits = np.flatnonzero(above | below)
        if hits.size == 0:
            self.queries_answered += m
            return None, Response.INSIDE
        j = int(hits[0])
        self.queries_answered += j + 1
        self.counter += 1
        self.threshold_noise = self._draw_threshold_noise()
        self._remove(masks[j])
        return j, Response.ABOVE if above[j] else Response.BELOW


def approx_accuracy_radius(a: float, R: int, beta: float) -> float:
    """C = (1/a) ln(R/beta), valid jointly over R queries w.p. 1 - beta."""
    return math.log(R / beta) / a


def pure_accuracy_radius(a: float, R: int, beta: float) -> float:
    """C = (6/a) ln(R/beta)."""
    return 6 * math.log(R / beta) / a
