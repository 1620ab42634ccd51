"""The four sub-tests, their combination and Monte Carlo calibration of the multipliers."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .distmodel import as_distribution
from .errors import BadParameter, BudgetTooSmall, KTooSmall, Unreachable
from .kernels import batch_statistics, linf_witness
from .sampling import RngStream, SplitCounts, k_bar_of, poissonized_batch

log = logging.getLogger(__name__)

SUBTESTS = ("inf", "23", "2", "1")
MAX_MULTIPLIER = 1e6
MIN_MULTIPLIER = 1e-6
BLOCK = 2000  # trials per RNG substream in Monte Carlo loops


@dataclass(frozen=True)
class TestConstants:
    """Multipliers of the four sub-tests and the level they were calibrated for."""

    __test__ = False  # not a pytest class

    c_inf: float
    c_23: float
    c_2: float
    c_1: float
    gamma: float = 0.1

    def __post_init__(self):
        for name in ("c_inf", "c_23", "c_2", "c_1"):
            v = getattr(self, name)
            if not (v > 0) and not math.isinf(v):
                raise BadParameter(f"{name} must be > 0, got {v}")
        if not 0 < self.gamma < 1:
            raise BadParameter(f"gamma must lie in (0, 1), got {self.gamma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.c_inf, self.c_23, self.c_2, self.c_1])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TestConstants":
        return cls(**{k: float(data[k]) for k in ("c_inf", "c_23", "c_2", "c_1", "gamma") if k in data})


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    t23: float
    t2: float
    t1: float
    thr23: float
    thr2: float
    thr1: float
    linf_witness: Optional[int]
    verdicts: Tuple[bool, bool, bool, bool]
    combined: bool
    k_bar: int
    constants: Optional[TestConstants] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdicts"] = dict(zip(("phi_inf", "phi_23", "phi_2", "phi_1"), self.verdicts))
        out["constants"] = None if self.constants is None else self.constants.to_dict()
        return out


# ------------------------------------------------------------ single sample

def _q_hat(counts: SplitCounts) -> np.ndarray:
    return np.maximum(counts.y[2], 1) / counts.k_bar


def _require_kbar(counts: SplitCounts) -> None:
    if counts.k_bar < 2:
        raise KTooSmall(f"k_bar must be at least 2, got {counts.k_bar}")


def pretest_linf(counts: SplitCounts, c: float):
    """Coordinate-wise pre-test. Returns ``(reject, first_violating_index)``."""
    _require_kbar(counts)
    i = linf_witness(counts.x[2], counts.y[2], counts.k_bar, c)
    return (i >= 0, i if i >= 0 else None)


def stat_t23(counts: SplitCounts) -> float:
    d1 = (counts.x[0] - counts.y[0]).astype(np.float64)
    d2 = (counts.x[1] - counts.y[1]).astype(np.float64)
    return float(np.sum(_q_hat(counts) ** (-2.0 / 3.0) * d1 * d2))


def thresh_t23(counts: SplitCounts) -> float:
    y1 = counts.y[0].astype(np.float64)
    return math.sqrt(counts.k_bar ** (-2.0 / 3.0) * float(np.sum(y1 ** (2.0 / 3.0)))) + 1.0


def test_23(counts: SplitCounts, c: float) -> bool:
    return stat_t23(counts) >= c * thresh_t23(counts)


def stat_t2(counts: SplitCounts) -> float:
    zero = counts.y[2] == 0
    d1 = (counts.x[0] - counts.y[0])[zero].astype(np.float64)
    d2 = (counts.x[1] - counts.y[1])[zero].astype(np.float64)
    return float(np.sum(d1 * d2))


def thresh_t2(counts: SplitCounts) -> float:
    _require_kbar(counts)
    zero = counts.y[2] == 0
    yy = float(np.sum(counts.y[0][zero].astype(np.float64) * counts.y[1][zero]))
    return math.sqrt(yy) + math.log(counts.k_bar) ** 2


def test_2(counts: SplitCounts, c: float) -> bool:
    return stat_t2(counts) >= c * thresh_t2(counts)


def stat_t1(counts: SplitCounts) -> float:
    zero = counts.y[2] == 0
    return float(np.sum(counts.x[0][zero] - counts.y[0][zero]))


def thresh_t1(counts: SplitCounts) -> float:
    return math.sqrt(counts.k_bar)


def test_1(counts: SplitCounts, c: float) -> bool:
    return stat_t1(counts) >= c * thresh_t1(counts)


# Sub-tests are plain functions named test_*; keep pytest from collecting them
# when they are imported into test modules.
for _f in (test_23, test_2, test_1):
    _f.__test__ = False


def combined_test(counts: SplitCounts, constants: TestConstants) -> TestReport:
    """Run all four sub-tests and reject when any of them rejects."""
    rej_inf, witness = pretest_linf(counts, constants.c_inf)
    t23, thr23 = stat_t23(counts), thresh_t23(counts)
    t2, thr2 = stat_t2(counts), thresh_t2(counts)
    t1, thr1 = stat_t1(counts), thresh_t1(counts)
    verdicts = (bool(rej_inf),
                bool(t23 >= constants.c_23 * thr23),
                bool(t2 >= constants.c_2 * thr2),
                bool(t1 >= constants.c_1 * thr1))
    return TestReport(t23=t23, t2=t2, t1=t1, thr23=thr23, thr2=thr2, thr1=thr1,
                      linf_witness=witness, verdicts=verdicts, combined=any(verdicts),
                      k_bar=counts.k_bar, constants=constants)


# ------------------------------------------------------------ batches

def batch_verdicts(stats: np.ndarray, k_bar: int, constants: TestConstants) -> np.ndarray:
    """(n, 4) boolean verdicts from the (n, 6) output of ``batch_statistics``."""
    c = constants
    out = np.empty((stats.shape[0], 4), dtype=bool)
    out[:, 0] = stats[:, 5] >= c.c_inf
    out[:, 1] = stats[:, 0] >= c.c_23 * stats[:, 1]
    out[:, 2] = stats[:, 2] >= c.c_2 * stats[:, 3]
    out[:, 3] = stats[:, 4] >= c.c_1 * math.sqrt(k_bar)
    return out


def critical_multipliers(stats: np.ndarray, k_bar: int) -> np.ndarray:
    """Per trial and sub-test, the largest multiplier at which the sub-test still rejects."""
    return np.column_stack([stats[:, 5],
                            stats[:, 0] / stats[:, 1],
                            stats[:, 2] / stats[:, 3],
                            stats[:, 4] / math.sqrt(k_bar)])


def simulate_statistics(p_rows, q_rows, k: int, n: int, rng: RngStream) -> np.ndarray:
    """Statistics of ``n`` direct-Poisson trials; trial blocks use separate substreams."""
    k_bar = k_bar_of(k)
    chunks = []
    for b, start in enumerate(range(0, n, BLOCK)):
        m = min(BLOCK, n - start)
        gen = rng.child(b).generator()
        pr = p_rows if np.ndim(p_rows) == 1 else p_rows[start:start + m]
        qr = q_rows if np.ndim(q_rows) == 1 else q_rows[start:start + m]
        x, y = poissonized_batch(pr, qr, k_bar, m, gen)
        chunks.append(batch_statistics(x, y, k_bar))
    return np.concatenate(chunks) if chunks else np.empty((0, 6))


def smallest_multiplier(critical: Sequence[np.ndarray], target: float) -> float:
    """Smallest multiplier whose worst-case rejection frequency is at most ``target``.

    A trial rejects at multiplier c iff its critical value is >= c, so the
    rejection frequency is a right-continuous step function of c and the
    answer is just above an order statistic of each member's critical values.
    """
    best = MIN_MULTIPLIER
    for r in critical:
        r = np.sort(np.asarray(r, dtype=np.float64))[::-1]
        allowed = int(math.floor(target * r.size + 1e-9))
        if allowed >= r.size:
            continue
        edge = r[allowed]
        if edge > 0:
            best = max(best, edge * (1 + 1e-12) + 1e-300)
    return float(best)


def rejection_rate(critical: np.ndarray, c: float) -> float:
    return float(np.mean(np.asarray(critical) >= c))


def calibrate_constants(null_suite, k: int, gamma: float, n_mc: int, rng: RngStream) -> TestConstants:
    """Calibrate the four multipliers on a suite of null distributions.

    Each sub-test independently gets the smallest multiplier keeping its
    worst-case null rejection frequency over the suite at most gamma/4, so
    the combined test's level is at most gamma by a union bound.
    """
    if n_mc < 100:
        raise BudgetTooSmall(f"n_mc must be at least 100, got {n_mc}")
    suite = [as_distribution(p) for p in null_suite]
    if not suite:
        raise BadParameter("null_suite is empty")
    if not 0 < gamma < 1:
        raise BadParameter(f"gamma must lie in (0, 1), got {gamma}")
    k_bar = k_bar_of(k)
    if k_bar < 2:
        raise KTooSmall(f"k must be at least 6 for calibration, got {k}")
    crit = [critical_multipliers(simulate_statistics(p.probs, p.probs, k, n_mc, rng.child(m)), k_bar)
            for m, p in enumerate(suite)]
    target = gamma / 4.0
    values = []
    for j, name in enumerate(SUBTESTS):
        c = smallest_multiplier([cr[:, j] for cr in crit], target)
        if c > MAX_MULTIPLIER:
            raise Unreachable(f"sub-test {name} still rejects above {target} at multiplier {MAX_MULTIPLIER}")
        values.append(c)
        log.debug("calibrated c_%s = %.6g", name, c)
    return TestConstants(*values, gamma=gamma)
