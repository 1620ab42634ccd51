"""Distribution families, Monte Carlo risk, separation search and rate reports."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .adversarial import AdversarialPrior, draw_batch
from .distmodel import DiscreteDistribution, as_distribution, make_distribution, sorted_view
from .errors import BadParameter, BudgetTooSmall, KTooLargeForDesk
from .kernels import batch_statistics
from .rates import dk16_rate, identity_rate, lower_rate, regime_table, upper_rate
from .sampling import RngStream, k_bar_of, poissonized_batch, sample_split
from .testers import BLOCK, TestConstants, batch_verdicts

MAX_DESK_D = 10 ** 7

PairGen = Callable[[int, np.random.Generator], Tuple[np.ndarray, np.ndarray]]


# ------------------------------------------------------------ families

def family_uniform(d: int) -> DiscreteDistribution:
    if d < 1:
        raise BadParameter(f"d must be positive, got {d}")
    return make_distribution(np.ones(d))


def family_zipf(d: int, s: float) -> DiscreteDistribution:
    """pi_i proportional to i^-s."""
    if d < 1:
        raise BadParameter(f"d must be positive, got {d}")
    if s < 0:
        raise BadParameter(f"s must be non-negative, got {s}")
    return make_distribution(np.arange(1, d + 1, dtype=np.float64) ** (-float(s)))


def family_two_spike(k: int, h: float) -> DiscreteDistribution:
    """Two heavy atoms (1/2 and 1/2 - h) plus k^4 atoms of mass h/k^4."""
    if k < 2:
        raise BadParameter(f"k must be at least 2, got {k}")
    if not 0 < h < 0.5:
        raise BadParameter(f"h must lie in (0, 1/2), got {h}")
    n = int(k) ** 4
    if n + 2 > MAX_DESK_D:
        raise KTooLargeForDesk(f"two-spike at k={k} needs d={n + 2} > {MAX_DESK_D}")
    probs = np.full(n + 2, h / n)
    probs[0], probs[1] = 0.5, 0.5 - h
    return DiscreteDistribution(probs)


def family_two_level(d: int) -> DiscreteDistribution:
    """Half the mass spread over the first ceil(sqrt(d)) atoms, half over the rest."""
    if d < 2:
        return family_uniform(d)
    head = min(int(math.ceil(math.sqrt(d))), d - 1)
    probs = np.empty(d)
    probs[:head] = 0.5 / head
    probs[head:] = 0.5 / (d - head)
    return make_distribution(probs)


def default_null_suite(d: int):
    return [family_uniform(d), family_zipf(d, 1.0), family_two_level(d)]


# ------------------------------------------------------------ pair generators

def fixed_pair(p, q=None) -> PairGen:
    """Always the same (p, q); ``q`` defaults to ``p``."""
    p = as_distribution(p).probs
    q = p if q is None else as_distribution(q).probs

    def gen(n, _rng):
        return p, q
    return gen


def prior_pairs(prior: AdversarialPrior, mode: str = "null", scale: float = 1.0) -> PairGen:
    """Fresh prior draws per trial; returns (p_tilde, q_tilde) rows."""
    def gen(n, rng):
        b = draw_batch(prior, n, rng, mode, scale)
        return b.p, b.q
    return gen


# ------------------------------------------------------------ risk

@dataclass(frozen=True)
class RiskEstimate:
    type1: float
    type2: float
    n_trials: int
    se1: float
    se2: float
    truncation_rate: float = 0.0

    @property
    def risk(self) -> float:
        return self.type1 + self.type2

    @property
    def se(self) -> float:
        return math.sqrt(self.se1 ** 2 + self.se2 ** 2)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["risk"] = self.risk
        return out


def _se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def side_statistics(pairs: PairGen, k: int, n: int, rng: RngStream, model: str = "direct"):
    """(n, 6) statistics for ``n`` trials and the truncation count.

    Trials come in blocks of ``BLOCK``; block ``b`` draws both its pairs and
    its counts from substream ``b`` so results do not depend on batching
    elsewhere.
    """
    k_bar = k_bar_of(k)
    chunks, truncated = [], 0
    for b, start in enumerate(range(0, n, BLOCK)):
        m = min(BLOCK, n - start)
        gen = rng.child(b).generator()
        p_rows, q_rows = pairs(m, gen)
        if model == "direct":
            x, y = poissonized_batch(p_rows, q_rows, k_bar, m, gen)
        elif model == "split":
            p_rows = np.broadcast_to(p_rows, (m, np.shape(p_rows)[-1]))
            q_rows = np.broadcast_to(q_rows, (m, np.shape(q_rows)[-1]))
            xs, ys = [], []
            for r in range(m):
                c = sample_split(p_rows[r], q_rows[r], k, gen)
                xs.append(c.x)
                ys.append(c.y)
                truncated += int(c.truncated)
            x, y = np.stack(xs), np.stack(ys)
        else:
            raise BadParameter(f"unknown sampling model {model!r}")
        chunks.append(batch_statistics(x, y, k_bar))
    return np.concatenate(chunks), truncated


def rejections(pairs: PairGen, constants: TestConstants, k: int, n: int, rng: RngStream,
               model: str = "direct"):
    stats, truncated = side_statistics(pairs, k, n, rng, model)
    return batch_verdicts(stats, k_bar_of(k), constants).any(axis=1), truncated


def estimate_risk(constants: TestConstants, null_gen: PairGen, alt_gen: PairGen, k: int,
                  n_trials: int, rng: RngStream, model: str = "direct") -> RiskEstimate:
    """Type-I plus type-II error of the combined test, from independent trial sets."""
    if n_trials < 100:
        raise BudgetTooSmall(f"n_trials must be at least 100, got {n_trials}")
    rej0, tr0 = rejections(null_gen, constants, k, n_trials, rng.child(0), model)
    rej1, tr1 = rejections(alt_gen, constants, k, n_trials, rng.child(1), model)
    t1 = float(np.mean(rej0))
    t2 = float(1.0 - np.mean(rej1))
    return RiskEstimate(t1, t2, n_trials, _se(t1, n_trials), _se(t2, n_trials),
                        (tr0 + tr1) / (2.0 * n_trials))


# ------------------------------------------------------------ separation search

class MassTransport:
    """Move mass from a source set to a destination set of ``q``, proportionally.

    At scale t the moved mass is t * max_l1 / 2, so the L1 distance to ``q``
    is exactly t * max_l1.
    """

    def __init__(self, q, source, dest, max_l1: Optional[float] = None):
        self.q = as_distribution(q).probs
        src = np.zeros(self.q.size, dtype=bool)
        dst = np.zeros(self.q.size, dtype=bool)
        src[np.asarray(source, dtype=np.int64)] = True
        dst[np.asarray(dest, dtype=np.int64)] = True
        if np.any(src & dst):
            raise BadParameter("source and destination overlap")
        self.src_mass = float(self.q[src].sum())
        self.dst_mass = float(self.q[dst].sum())
        if self.src_mass <= 0 or self.dst_mass <= 0:
            raise BadParameter("source and destination must both carry mass")
        cap = 2.0 * self.src_mass
        self.max_l1 = cap if max_l1 is None else float(max_l1)
        if self.max_l1 > cap * (1 + 1e-12):
            raise BadParameter(f"max_l1={max_l1} exceeds twice the source mass {cap}")
        self._w = np.where(src, -self.q / self.src_mass, 0.0) + np.where(dst, self.q / self.dst_mass, 0.0)

    @classmethod
    def halves(cls, q, max_l1=None):
        """Source is the second half of the coordinates, destination the first."""
        d = as_distribution(q).d
        return cls(q, np.arange(d // 2, d), np.arange(d // 2), max_l1)

    @classmethod
    def tail(cls, q, k, max_l1=None):
        """Source is the sub-1/k tail, destination the heavier coordinates."""
        q = as_distribution(q)
        order = sorted_view(q).order
        small = q.probs[order] <= 1.0 / k
        if small.all() or not small.any():
            return cls.halves(q, max_l1)
        return cls(q, order[small], order[~small], max_l1)

    def alternative(self, t: float) -> np.ndarray:
        p = self.q + (t * self.max_l1 / 2.0) * self._w
        return np.maximum(p, 0.0)

    def pairs(self, t: float) -> PairGen:
        p = self.alternative(t)

        def gen(n, _rng):
            return p, self.q
        return gen

    def null_pairs(self) -> PairGen:
        return fixed_pair(self.q)

    def l1(self, t: float, n: int = 0, rng=None) -> float:
        return float(np.abs(self.alternative(t) - self.q).sum())


class PriorScaling:
    """Alternative draws of a hard prior with eps* multiplied by t * max_scale."""

    def __init__(self, prior: AdversarialPrior, max_scale: float = 1.0 / 0.1):
        self.prior = prior
        self.max_scale = float(max_scale)

    def pairs(self, t: float) -> PairGen:
        return prior_pairs(self.prior, "alt", t * self.max_scale)

    def null_pairs(self) -> PairGen:
        return prior_pairs(self.prior, "null")

    def l1(self, t: float, n: int = 400, rng=None) -> float:
        """Mean exact L1 distance of ``n`` alternative draws."""
        gen = np.random.default_rng(0) if rng is None else rng.generator()
        b = draw_batch(self.prior, n, gen, "alt", t * self.max_scale)
        return float(np.mean(np.abs(b.p - b.q).sum(axis=1)))


@dataclass(frozen=True)
class SeparationEstimate:
    rho_hat: Optional[float]      # None when the largest scale still fails
    gamma: float
    bracket: Tuple[float, float]
    n_trials_per_eval: int
    risk_low: float
    risk_high: float
    se_high: float

    @property
    def unreachable(self) -> bool:
        return self.rho_hat is None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bracket"] = list(self.bracket)
        out["unreachable"] = self.unreachable
        return out


def empirical_separation(constants: TestConstants, pi, k: int, gamma: float, direction,
                         n_trials_per_eval: int, rng: RngStream, steps: int = 12) -> SeparationEstimate:
    """Bisect the direction's scale for the smallest L1 gap with estimated risk <= gamma.

    Every evaluation reuses the same substreams, so neighbouring scales are
    compared with common random numbers. The reported values are L1
    distances, not scales.
    """
    if n_trials_per_eval < 100:
        raise BudgetTooSmall(f"n_trials_per_eval must be at least 100, got {n_trials_per_eval}")
    n = n_trials_per_eval
    if gamma >= 1:
        return SeparationEstimate(0.0, gamma, (0.0, 0.0), n, float("nan"), float("nan"), 0.0)
    rej0, _ = rejections(direction.null_pairs(), constants, k, n, rng.child(0))
    t1 = float(np.mean(rej0))

    def risk(t):
        rej1, _ = rejections(direction.pairs(t), constants, k, n, rng.child(1))
        t2 = 1.0 - float(np.mean(rej1))
        return t1 + t2, math.sqrt(_se(t1, n) ** 2 + _se(t2, n) ** 2)

    l1 = lambda t: direction.l1(t, n, rng.child(2))  # noqa: E731
    r_hi, se_hi = risk(1.0)
    if r_hi > gamma:
        return SeparationEstimate(None, gamma, (l1(0.0), l1(1.0)), n, float("nan"), r_hi, se_hi)
    lo, hi, r_lo = 0.0, 1.0, float("nan")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        r, se = risk(mid)
        if r <= gamma:
            hi, r_hi, se_hi = mid, r, se
        else:
            lo, r_lo = mid, r
    if math.isnan(r_lo):
        r_lo = risk(lo)[0]
    return SeparationEstimate(l1(hi), gamma, (l1(lo), l1(hi)), n, r_lo, r_hi, se_hi)


# ------------------------------------------------------------ reports

def compare_report(pi, k: int, gamma: float = 0.1, constants: Optional[TestConstants] = None,
                   options: Optional[dict] = None) -> dict:
    """All rate formulas and the regime table side by side, plus optional Monte Carlo."""
    options = dict(options or {})
    pi = as_distribution(pi)
    report = {
        "d": pi.d, "k": int(k), "gamma": gamma,
        "upper": upper_rate(pi, k).to_dict(),
        "lower": lower_rate(pi, k).to_dict(),
        "identity": identity_rate(pi, k).to_dict(),
        "dk16": dk16_rate(pi, k).to_dict(),
        "regimes": regime_table(pi, k).to_dict(),
    }
    report["upper_over_lower"] = report["upper"]["rho"] / report["lower"]["rho"]
    if constants is not None and options.get("separation", False):
        rng = RngStream(int(options.get("seed", 0)))
        direction = MassTransport.tail(pi, k)
        est = empirical_separation(constants, pi, k, gamma, direction,
                                   int(options.get("trials", 400)), rng)
        report["separation"] = est.to_dict()
        report["separation"]["label"] = "finite-suite surrogate, lower-confidence"
    if constants is not None:
        report["constants"] = constants.to_dict()
    return report
