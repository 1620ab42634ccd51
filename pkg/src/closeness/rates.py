"""Closed-form local separation rates and their regime decomposition.

Every formula works on the non-increasing rearrangement ``s`` of the
reference vector, with 1-based indices as in the usual statements: ``s_1``
is the largest mass and ``J`` the first index with ``s_J <= 1/k``.
Minimizations are exhaustive scans driven by prefix sums, with ties broken
toward the smallest index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .distmodel import as_distribution, j_index_sorted
from .errors import KTooSmall

UPPER_U = 0.5
LOWER_V = 0.001


@dataclass(frozen=True)
class RateBreakdown:
    """A rate value, the index attaining the inner minimum and each term there."""

    rho: float
    minimizer: int
    terms: Dict[str, float] = field(default_factory=dict)
    u: Optional[float] = None
    v: Optional[float] = None
    kind: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rho": self.rho, "minimizer": self.minimizer,
                "terms": dict(self.terms), "u": self.u, "v": self.v}


def _check_k(k) -> float:
    if k < 2:
        raise KTooSmall(f"k must be at least 2, got {k}")
    return float(k)


def _sorted(pi) -> np.ndarray:
    return np.sort(as_distribution(pi).probs)[::-1]


def _suffix(x: np.ndarray) -> np.ndarray:
    """``out[i] = sum(x[i:])`` with a trailing zero, length d+1."""
    out = np.zeros(x.size + 1)
    out[:-1] = np.cumsum(x[::-1])[::-1]
    return out


def _prefix(x: np.ndarray) -> np.ndarray:
    """``out[i] = sum(x[:i])``, length d+1."""
    out = np.zeros(x.size + 1)
    np.cumsum(x, out=out[1:])
    return out


def head_term(s: np.ndarray, upto: int, k: float) -> float:
    """(sum_{i <= upto} s_i^{2/3})^{3/4} / sqrt(k), 1-based inclusive bound."""
    upto = min(upto, s.size)
    return float(np.sum(s[:upto] ** (2.0 / 3.0)) ** 0.75 / math.sqrt(k))


def _two_scale_objective(s: np.ndarray, k: float, exponent: float, sqrt_scale: float):
    """Inner objective max(sqrt(I)*scale, sqrt(I/k)*E^{1/4}, tail(I)) over I = J..d."""
    J = j_index_sorted(s, k)
    d = s.size
    energy = float(np.sum(s ** 2 * np.exp(-exponent * k * s)))
    I = np.arange(J, d + 1, dtype=np.float64)
    mid_sqrt = np.sqrt(I) * sqrt_scale
    mid_exp = np.sqrt(I / k) * energy ** 0.25
    tail = _suffix(s)[J - 1:d]
    return J, I, mid_sqrt, mid_exp, tail


def objective_at(pi, k, I: int, *, lower: bool = False, u: float = UPPER_U, v: float = LOWER_V) -> float:
    """Inner bracket of the upper (or lower) rate at a single index ``I``.

    Deliberately evaluated from scratch, without prefix sums; used to
    cross-check the vectorized minimization.
    """
    s = _sorted(pi)
    k = _check_k(k)
    expo = (2.0 + v) if lower else u
    energy = sum(float(x) ** 2 * math.exp(-expo * k * float(x)) for x in s)
    first = math.sqrt(I) / k if lower else math.sqrt(I) * math.log(k) / k
    tail = sum(float(x) for x in s[I - 1:])
    return max(first, math.sqrt(I / k) * energy ** 0.25, tail)


def _minmax_rate(s, k, exponent, sqrt_scale, floor, kind, u, v) -> RateBreakdown:
    J, I, mid_sqrt, mid_exp, tail = _two_scale_objective(s, k, exponent, sqrt_scale)
    head = head_term(s, J, k)
    if I.size == 0:
        # no coordinate at or below 1/k: the inner minimum ranges over nothing
        terms = {"head_23": head, "mid_sqrtI": 0.0, "mid_exp": 0.0, "tail_l1": 0.0, "floor_sqrtk": floor}
        return RateBreakdown(max(head, floor), s.size + 1, terms, u, v, kind)
    obj = np.maximum(np.maximum(mid_sqrt, mid_exp), tail)
    at = int(np.argmin(obj))
    terms = {"head_23": head, "mid_sqrtI": float(mid_sqrt[at]), "mid_exp": float(mid_exp[at]),
             "tail_l1": float(tail[at]), "floor_sqrtk": floor}
    rho = max(float(obj[at]), head, floor)
    return RateBreakdown(rho, J + at, terms, u, v, kind)


def upper_rate(pi, k, u: float = UPPER_U) -> RateBreakdown:
    """Separation distance achieved by the combined test (up to constants)."""
    k = _check_k(k)
    s = _sorted(pi)
    return _minmax_rate(s, k, u, math.log(k) / k, math.sqrt(math.log(k) / k), "upper", u, None)


def lower_rate(pi, k, v: float = LOWER_V) -> RateBreakdown:
    """Separation distance below which no test can succeed (up to constants)."""
    k = _check_k(k)
    s = _sorted(pi)
    return _minmax_rate(s, k, 2.0 + v, 1.0 / k, math.sqrt(1.0 / k), "lower", 2.0 + v, v)


def identity_rate(pi, k) -> RateBreakdown:
    """Local rate of one-sample identity testing against a known ``pi``."""
    k = _check_k(k)
    s = _sorted(pi)
    d = s.size
    w = s ** (2.0 / 3.0)
    w[0] = 0.0  # the largest coordinate never enters the head
    pre = _prefix(w)          # pre[m-1] = sum_{i < m} w_i, 1-based m
    suf = _suffix(s)          # suf[m-1] = sum_{i >= m} s_i
    heads = pre[:d + 1] ** 0.75 / math.sqrt(k)
    tails = suf[:d + 1]
    obj = np.maximum(np.maximum(heads, 1.0 / k), tails)
    at = int(np.argmin(obj))
    terms = {"head_23": float(heads[at]), "floor_1k": 1.0 / k, "tail_l1": float(tails[at])}
    return RateBreakdown(float(obj[at]), at + 1, terms, None, None, "identity")


def dk16_rate(pi, k) -> RateBreakdown:
    """Earlier adaptive closeness bound, counting all sub-1/k coordinates alike."""
    k = _check_k(k)
    s = _sorted(pi)
    small = s < 1.0 / k
    first = math.sqrt(np.count_nonzero(small)) * float(np.sum(s[small] ** 2)) ** 0.25 / math.sqrt(k)
    head = float(np.sum(s ** (2.0 / 3.0)) ** 0.75 / math.sqrt(k))
    terms = {"small_count": first, "head_23": head}
    return RateBreakdown(max(first, head), j_index_sorted(s, k), terms, None, None, "dk16")


def c_pi(pi, k, v: float = LOWER_V) -> float:
    """Mass scale sqrt(sum pi^2 exp(-2(1+v) k pi)) / k of the hard prior."""
    p = as_distribution(pi).probs
    return float(math.sqrt(np.sum(p ** 2 * np.exp(-2.0 * (1.0 + v) * k * p))) / k)


def i_v_pi_sorted(s: np.ndarray, k, C: float) -> int:
    """Cut-off index from the sorted vector and a precomputed mass scale."""
    d = s.size
    J = j_index_sorted(s, k)
    if J > d:
        return d
    j = np.arange(J, d + 1)
    cond1 = s[J - 1:] <= np.sqrt(C / j)
    cond2 = _suffix(s ** 2 * np.exp(-2.0 * k * s))[J - 1:d] <= C
    pre = _prefix(s)
    cond3 = _suffix(s)[J - 1:d] <= pre[J - 1:d] - pre[J - 1]
    ok = np.flatnonzero(cond1 & cond2 & cond3)
    return int(j[ok[0]]) if ok.size else d


def i_v_pi(pi, k, v: float = LOWER_V) -> int:
    """Smallest index at or after J meeting the three cut-off conditions; d if none does."""
    _check_k(k)
    return i_v_pi_sorted(_sorted(pi), k, c_pi(pi, k, v))


@dataclass(frozen=True)
class RegimeRow:
    label: str
    start: int   # 1-based, inclusive
    stop: int    # 1-based, inclusive; stop < start means empty
    ours: float
    identity: float
    dk16: float

    @property
    def size(self) -> int:
        return max(0, self.stop - self.start + 1)

    def to_dict(self) -> dict:
        return {"range": self.label, "start": self.start, "stop": self.stop,
                "ours": self.ours, "identity": self.identity, "dk16": self.dk16}


@dataclass(frozen=True)
class RegimeTable:
    rows: List[RegimeRow]
    J: int
    I_star: int
    m_star: int
    clamped: bool

    def to_dict(self) -> dict:
        return {"J": self.J, "I_star": self.I_star, "m_star": self.m_star,
                "clamped": self.clamped, "rows": [r.to_dict() for r in self.rows]}


def regime_table(pi, k, u: float = UPPER_U) -> RegimeTable:
    """Per-range contributions of the three rates on the four index ranges.

    Ranges are [1, J-1], [J, I*-1], [I*, m*-1], [m*, d], so they partition
    the indices; I* comes from the upper rate, m* from the identity rate.
    """
    k = _check_k(k)
    s = _sorted(pi)
    d = s.size
    J = j_index_sorted(s, k)
    I_raw = upper_rate(pi, k, u).minimizer
    m_raw = identity_rate(pi, k).minimizer
    I_star = min(max(I_raw, J), d + 1)
    m_star = min(max(m_raw, I_star), d + 1)
    clamped = (I_star != I_raw) or (m_star != m_raw)
    energy = float(np.sum(s ** 2 * np.exp(-u * k * s)))

    def head(sl):
        return float(np.sum(sl ** (2.0 / 3.0)) ** 0.75 / math.sqrt(k))

    def l1(sl):
        return float(np.sum(sl))

    def dk_mid(sl):
        return math.sqrt(sl.size / k) * float(np.sum(sl ** 2)) ** 0.25

    bounds = [("U1", 1, J - 1), ("U2", J, I_star - 1), ("U3", I_star, m_star - 1), ("U4", m_star, d)]
    rows = []
    for label, a, b in bounds:
        sl = s[a - 1:b] if b >= a else s[:0]
        if label == "U1":
            ours = ident = dk = head(sl)
        elif label == "U2":
            ours = math.sqrt(sl.size / k) * max(energy ** 0.25, 1.0 / math.sqrt(k)) if sl.size else 0.0
            ident, dk = head(sl), dk_mid(sl)
        elif label == "U3":
            ours, ident, dk = l1(sl), head(sl), dk_mid(sl)
        else:
            ours, ident, dk = l1(sl), l1(sl), dk_mid(sl)
        rows.append(RegimeRow(label, a, b, ours, ident, dk))
    return RegimeTable(rows, J, I_star, m_star, clamped)
