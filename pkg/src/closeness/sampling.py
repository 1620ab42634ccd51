"""Multinomial sampling, three-way sample splitting and Poissonization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .distmodel import DiscreteDistribution, as_distribution
from .errors import DimensionMismatch, KTooSmall


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream_id)``.

    ``child`` derives independent substreams (per trial block, per role)
    through numpy's ``SeedSequence`` spawn keys, so results never depend on
    the order in which substreams are consumed.
    """

    seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = field(default=())

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(i),))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.seed) & (2**64 - 1),
            spawn_key=(int(self.stream_id),) + self.path,
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class SplitCounts:
    """Six Poissonized count vectors.

    ``x[j]`` / ``y[j]`` are the counts of block j (0-based) for the first and
    second sample. ``budgets[0, j]`` and ``budgets[1, j]`` are the Poisson
    budgets drawn for ``x[j]`` and ``y[j]``.
    """

    x: np.ndarray
    y: np.ndarray
    k_bar: int
    budgets: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] != 3 or x.shape != y.shape:
            raise DimensionMismatch(
                f"expected two (3, d) count arrays, got {x.shape} and {y.shape}")
        if np.any(x < 0) or np.any(y < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "budgets", np.asarray(self.budgets, dtype=np.int64).reshape(2, 3))
        object.__setattr__(self, "k_bar", int(self.k_bar))

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    @classmethod
    def from_blocks(cls, x_blocks, y_blocks, k_bar: int) -> "SplitCounts":
        """Wrap externally computed counts; budgets become the block totals."""
        x = np.asarray(x_blocks, dtype=np.int64)
        y = np.asarray(y_blocks, dtype=np.int64)
        budgets = np.stack([x.sum(axis=1), y.sum(axis=1)])
        return cls(x=x, y=y, k_bar=k_bar, budgets=budgets, truncated=False)


def k_bar_of(k: int) -> int:
    if k < 3:
        raise KTooSmall(f"k must be at least 3, got {k}")
    return int(k) // 3


def sample_multinomial(dist, n: int, rng) -> np.ndarray:
    dist = as_distribution(dist)
    if n < 0:
        raise ValueError("n must be non-negative")
    gen = as_generator(rng)
    return gen.multinomial(int(n), dist.probs).astype(np.int64)


def draw_observations(dist, k: int, rng) -> np.ndarray:
    """``k`` i.i.d. category labels (0-based) drawn from ``dist``."""
    dist = as_distribution(dist)
    gen = as_generator(rng)
    return gen.choice(dist.d, size=int(k), p=dist.probs)


def _split_one(obs: np.ndarray, d: int, k_bar: int, budgets: np.ndarray,
               gen: np.random.Generator) -> np.ndarray:
    obs = gen.permutation(np.asarray(obs, dtype=np.int64))
    out = np.zeros((3, d), dtype=np.int64)
    for j in range(3):
        block = obs[j * k_bar:(j + 1) * k_bar]
        take = min(int(budgets[j]), k_bar)
        out[j] = np.bincount(block[:take], minlength=d)
    return out


def split_and_poissonize(x_obs, y_obs, d: int, k: int, rng) -> SplitCounts:
    """Split both label sequences into three blocks of ``k // 3`` and Poissonize.

    Each block keeps only its first ``min(budget, k_bar)`` observations, where
    the six budgets are independent Poisson(2 k_bar / 3) draws. Samples are
    shuffled first so the retained prefix is an exchangeable subsample.
    """
    k_bar = k_bar_of(k)
    x_obs = np.asarray(x_obs)
    y_obs = np.asarray(y_obs)
    if x_obs.size < 3 * k_bar or y_obs.size < 3 * k_bar:
        raise ValueError(f"each sample needs at least {3 * k_bar} observations")
    if x_obs.size and (x_obs.min() < 0 or x_obs.max() >= d):
        raise DimensionMismatch("x observation labels outside [0, d)")
    if y_obs.size and (y_obs.min() < 0 or y_obs.max() >= d):
        raise DimensionMismatch("y observation labels outside [0, d)")
    gen = as_generator(rng)
    budgets = gen.poisson(2.0 * k_bar / 3.0, size=(2, 3)).astype(np.int64)
    x = _split_one(x_obs, d, k_bar, budgets[0], gen)
    y = _split_one(y_obs, d, k_bar, budgets[1], gen)
    return SplitCounts(x=x, y=y, k_bar=k_bar, budgets=budgets,
                       truncated=bool(np.any(budgets > k_bar)))


def sample_split(p, q, k: int, rng) -> SplitCounts:
    """End-to-end path: multinomial samples of size k from p and q, then split."""
    p = as_distribution(p)
    q = as_distribution(q)
    if p.d != q.d:
        raise DimensionMismatch(f"p has d={p.d}, q has d={q.d}")
    k_bar_of(k)
    gen = as_generator(rng)
    x_obs = draw_observations(p, k, gen)
    y_obs = draw_observations(q, k, gen)
    return split_and_poissonize(x_obs, y_obs, p.d, k, gen)


def sample_poissonized_direct(p, q, k: int, rng) -> SplitCounts:
    """Draw all six vectors as independent Poisson(2 k_bar rate / 3) counts."""
    p = as_distribution(p)
    q = as_distribution(q)
    if p.d != q.d:
        raise DimensionMismatch(f"p has d={p.d}, q has d={q.d}")
    k_bar = k_bar_of(k)
    gen = as_generator(rng)
    scale = 2.0 * k_bar / 3.0
    x = gen.poisson(scale * p.probs, size=(3, p.d))
    y = gen.poisson(scale * q.probs, size=(3, q.d))
    return SplitCounts(x=x, y=y, k_bar=k_bar,
                       budgets=np.stack([x.sum(axis=1), y.sum(axis=1)]),
                       truncated=False)


def poissonized_batch(p_rows: np.ndarray, q_rows: np.ndarray, k_bar: int,
                      n: int, gen: np.random.Generator):
    """Vectorized direct Poisson draws for ``n`` trials.

    ``p_rows``/``q_rows`` are (d,) for a fixed pair or (n, d) for per-trial
    pairs. Returns integer arrays x, y of shape (n, 3, d).
    """
    scale = 2.0 * k_bar / 3.0
    p_rows = np.asarray(p_rows, dtype=np.float64)
    q_rows = np.asarray(q_rows, dtype=np.float64)
    d = p_rows.shape[-1]
    lam_x = scale * (p_rows[None, None, :] if p_rows.ndim == 1 else p_rows[:, None, :])
    lam_y = scale * (q_rows[None, None, :] if q_rows.ndim == 1 else q_rows[:, None, :])
    x = gen.poisson(np.broadcast_to(lam_x, (n, 3, d)))
    y = gen.poisson(np.broadcast_to(lam_y, (n, 3, d)))
    return x.astype(np.int64), y.astype(np.int64)
