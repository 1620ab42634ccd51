"""Probability vectors, dyadic level sets and the shape class around a reference."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .errors import DimensionMismatch, EmptyVector, NegativeEntry, ZeroSum

SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Normalized probability vector over ``d`` categories.

    Build through :func:`make_distribution`; the stored array is read-only.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return int(self.probs.shape[0])

    def __len__(self) -> int:
        return self.d

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None

    def sorted_view(self) -> "SortedView":
        return sorted_view(self)


@dataclass(frozen=True)
class LevelSetMap:
    """``sets[i]`` holds the (0-based) indices j with probs[j] in [2^-i, 2^-i+1)."""

    sets: Dict[int, List[int]]
    zero_support: List[int] = field(default_factory=list)

    def sizes(self) -> Dict[int, int]:
        return {i: len(v) for i, v in self.sets.items()}


@dataclass(frozen=True)
class SortedView:
    order: np.ndarray
    sorted_probs: np.ndarray

    def unsort(self) -> np.ndarray:
        out = np.empty_like(self.sorted_probs)
        out[self.order] = self.sorted_probs
        return out


def make_distribution(raw) -> DiscreteDistribution:
    """Validate ``raw`` and return its normalized copy."""
    arr = np.asarray(raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyVector("probability vector is empty")
    if not np.all(np.isfinite(arr)):
        raise NegativeEntry("probability vector has non-finite entries")
    if np.any(arr < 0):
        raise NegativeEntry(f"negative entry at index {int(np.argmax(arr < 0))}")
    total = arr.sum()
    if total <= 0:
        raise ZeroSum("probability vector sums to zero")
    return DiscreteDistribution(arr / total)


def as_distribution(obj) -> DiscreteDistribution:
    if isinstance(obj, DiscreteDistribution):
        return obj
    return make_distribution(obj)


def sorted_view(pi: DiscreteDistribution) -> SortedView:
    # stable sort on the negated vector keeps ties in index order
    order = np.argsort(-pi.probs, kind="stable")
    return SortedView(order=order, sorted_probs=pi.probs[order])


def level_index(values: np.ndarray) -> np.ndarray:
    """Dyadic level i with value in [2^-i, 2^-i+1); only meaningful for values > 0.

    ``frexp`` gives value = m * 2^e with m in [0.5, 1), hence i = 1 - e exactly,
    without any rounding at powers of two.
    """
    _, e = np.frexp(np.asarray(values, dtype=np.float64))
    return 1 - e.astype(np.int64)


def level_sets(pi: DiscreteDistribution) -> LevelSetMap:
    p = pi.probs
    pos = np.flatnonzero(p > 0)
    zero = np.flatnonzero(p == 0).tolist()
    levels = level_index(p[pos])
    sets: Dict[int, List[int]] = {}
    for j, lvl in zip(pos.tolist(), levels.tolist()):
        sets.setdefault(int(lvl), []).append(j)
    return LevelSetMap(sets=dict(sorted(sets.items())), zero_support=zero)


def _level_counts(p: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Histogram of level indices over [lo, hi] (inclusive)."""
    lv = level_index(p[p > 0])
    return np.bincount(lv - lo, minlength=hi - lo + 1)


def in_class_p_pi(q: DiscreteDistribution, pi: DiscreteDistribution) -> bool:
    """Whether ``q``'s level-set sizes match those of ``pi`` up to windowed slack."""
    if q.d != pi.d:
        raise DimensionMismatch(f"q has d={q.d}, pi has d={pi.d}")
    lq = level_index(q.probs[q.probs > 0])
    lp = level_index(pi.probs[pi.probs > 0])
    both = np.concatenate([lq, lp])
    if both.size == 0:  # pragma: no cover - distributions always have mass
        return True
    # pad by 4 so every 5-wide window around the scanned range stays in bounds
    lo, hi = int(both.min()) - 4, int(both.max()) + 4
    cq = np.bincount(lq - lo, minlength=hi - lo + 1).astype(np.float64)
    cp = np.bincount(lp - lo, minlength=hi - lo + 1).astype(np.float64)
    for c in range(2, cq.size - 2):
        lower = cp[c] / 2.0
        mid = cq[c - 1] + cq[c] + cq[c + 1]
        upper = 1.5 * cp[c - 2:c + 3].sum()
        if not (lower <= mid <= upper):
            return False
    return True


def j_index(pi: DiscreteDistribution, k: int) -> int:
    """First (1-based) sorted position whose mass is at most 1/k; d+1 if none."""
    s = sorted_view(pi).sorted_probs
    return j_index_sorted(s, k)


def j_index_sorted(s: np.ndarray, k: float) -> int:
    hits = np.flatnonzero(s <= 1.0 / k)
    return int(hits[0]) + 1 if hits.size else int(s.shape[0]) + 1
