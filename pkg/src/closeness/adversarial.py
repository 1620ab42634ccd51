"""Hard prior pairs (q, p) that hide a perturbation below the detection floor.

The construction picks a thinned index set ``A`` on the dyadic levels of the
reference ``pi``, redraws the values on ``A`` uniformly among themselves and
renormalizes the remaining coordinates. Under the alternative the small
coordinates of ``A`` are additionally perturbed multiplicatively by
``±eps*``, a profile built to keep both hypotheses' Poisson laws close.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .distmodel import DiscreteDistribution, as_distribution, in_class_p_pi, level_index, sorted_view
from .errors import BadParameter, RenormalizationImpossible, RetryCapExceeded
from .rates import c_pi, i_v_pi_sorted
from .sampling import as_generator

MAX_RETRIES = 100
CERT_SLACK = 1e-12


def compliant_m(delta: float) -> float:
    """Smallest thinning factor the hardness argument allows at failure budget ``delta``."""
    return 4.0 * max(1.0, (32.0 * math.log(1.0 / delta)) ** 2)


# ------------------------------------------------------------ eps* profile

@dataclass(frozen=True)
class EpsProfile:
    eps: np.ndarray          # sorted order
    J: int
    I: int
    C: float
    case: str                # step2 / case1 / case2 / case3 / none
    construction: str        # recipe / waterfill
    certificate: Dict[str, bool]


def eps_recipe(s: np.ndarray, k: float, u: float, C: float, I: int, J: int):
    """Explicit profile: sqrt(u/2) from I on, one saturated-constraint fix below I."""
    d = s.size
    eps = np.zeros(d)
    if J > d:
        return eps, "none"
    eps[I - 1:] = math.sqrt(u / 2.0)
    if I <= J:
        return eps, "step2"
    m = I - 1                                       # 1-based index just below the cut
    if s[m - 1] > math.sqrt(C / I):
        eps[J - 1:I - 1] = math.sqrt(u * C) / (math.sqrt(2.0 * I) * s[J - 1:I - 1])
        return eps, "case3"
    tail = float(np.sum(s[m - 1:]))
    between = float(np.sum(s[J - 1:m - 1]))
    eps[m - 1] = math.sqrt(u / 2.0)
    return eps, ("case1" if tail > between else "case2")


def _caps(s, k, u, C, I, J):
    idx = np.arange(1, s.size + 1)
    active = (idx >= J) & (s < 1.0 / k) & (s > 0)
    cap = np.zeros(s.size)
    bound = math.sqrt(u) * np.minimum(min(1.0 / k, math.sqrt(C / (2.0 * I))), s[active] / 2.0)
    cap[active] = np.minimum(0.5, bound / s[active])
    return cap, active


def eps_waterfill(s: np.ndarray, k: float, u: float, C: float, I: int, J: int) -> np.ndarray:
    """Largest sum(s*eps) under the box caps and the weighted quadratic budget.

    The optimum has the form eps_i = min(cap_i, lam * s_i / w_i) with
    w_i = s_i^2 exp(-2 k s_i); lam is found by bisection on the budget.
    """
    cap, active = _caps(s, k, u, C, I, J)
    w = s ** 2 * np.exp(-2.0 * k * s)
    budget = u * C
    if np.sum(w * cap ** 2) <= budget:
        return cap

    def profile(lam):
        e = np.zeros(s.size)
        e[active] = np.minimum(cap[active], lam * s[active] / w[active])
        return e

    lo, hi = 0.0, 1.0
    while np.sum(w * profile(hi) ** 2) < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(w * profile(mid) ** 2) <= budget:
            lo = mid
        else:
            hi = mid
    return profile(lo)


def certificate(s, eps, k, u, C, I, J) -> Dict[str, bool]:
    """The four constraints the profile must satisfy, checked as inequalities."""
    d = s.size
    tol = CERT_SLACK
    box = bool(np.all((eps >= 0) & (eps <= 0.5 + tol)) and np.all(eps[s >= 1.0 / k] == 0))
    budget = float(np.sum(s ** 2 * eps ** 2 * np.exp(-2.0 * k * s))) <= u * C * (1 + tol)
    cap = math.sqrt(u) * np.minimum(min(1.0 / k, math.sqrt(C / (2.0 * I))), s / 2.0)
    pointwise = bool(np.all(s * eps <= cap * (1 + tol)))
    mass = float(np.sum(s * eps))
    a = math.sqrt(u / 2.0) * float(np.sum(s[I - 1:])) if I <= d else 0.0
    b = math.sqrt(u * C) * (I - J) / math.sqrt(2.0 * I)
    c = math.sqrt(u / 8.0) * float(np.sum(s[J - 1:])) if J <= d else 0.0
    lower = mass >= min(max(a, b), c) * (1 - tol)
    return {"box": box, "budget": bool(budget), "pointwise": pointwise, "mass": bool(lower)}


def build_eps(s: np.ndarray, k: float, u: float, v: float) -> EpsProfile:
    """Perturbation profile on a sorted vector.

    The explicit recipe is used when it passes every constraint; otherwise
    the water-filling optimum under the box and budget constraints replaces
    it, which satisfies the first three constraints by construction.
    """
    C = float(math.sqrt(np.sum(s ** 2 * np.exp(-2.0 * (1.0 + v) * k * s))) / k)
    I = i_v_pi_sorted(s, k, C)
    J = int(np.flatnonzero(s <= 1.0 / k)[0]) + 1 if np.any(s <= 1.0 / k) else s.size + 1
    eps, case = eps_recipe(s, k, u, C, I, J)
    cert = certificate(s, eps, k, u, C, I, J)
    construction = "recipe"
    if not all(cert.values()):
        eps = eps_waterfill(s, k, u, C, I, J)
        cert = certificate(s, eps, k, u, C, I, J)
        construction = "waterfill"
    return EpsProfile(eps, J, I, C, case, construction, cert)


# ------------------------------------------------------------ prior

@dataclass(frozen=True)
class AdversarialPrior:
    pi: DiscreteDistribution
    k: int
    u: float
    v: float
    M: int
    a: float
    delta: float
    gamma_lb: float
    A: np.ndarray            # sorted original indices
    A_prime: np.ndarray
    eps_star: np.ndarray     # original index order
    C: float
    I: int
    J: int
    case: str
    construction: str
    certificate: Dict[str, bool] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.pi.d

    def to_dict(self) -> dict:
        return {"pi": self.pi.probs.tolist(), "k": self.k, "u": self.u, "v": self.v, "M": self.M,
                "a": self.a, "delta": self.delta, "gamma_lb": self.gamma_lb,
                "A": self.A.tolist(), "A_prime": self.A_prime.tolist(),
                "eps_star": self.eps_star.tolist(), "C": self.C, "I": self.I, "J": self.J,
                "case": self.case, "construction": self.construction,
                "certificate": dict(self.certificate)}


def select_index_set(pi: DiscreteDistribution, k: float, M: int, a: float, gamma_lb: float) -> np.ndarray:
    """Per dyadic level, the floor(|S|/M) largest members of sufficiently full levels."""
    p = pi.probs
    pos = np.flatnonzero(p > 0)
    levels = level_index(p[pos])
    base = int(math.floor(math.log2(k)))
    chosen = []
    for lvl in np.unique(levels):
        members = pos[levels == lvl]
        i = int(lvl) - base
        cutoff = a * math.sqrt(max(math.log((abs(i) + 1) / gamma_lb), 0.0))
        if members.size <= cutoff:
            continue
        take = members.size // M
        if take == 0:
            continue
        ranked = members[np.argsort(-p[members], kind="stable")]
        chosen.append(ranked[:take])
    if not chosen:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(chosen)).astype(np.int64)


def build_prior(pi, k: int, u: float = 0.1, v: float = 0.001, M: int = 4, a: float = 3.0,
                delta: float = 0.125, gamma_lb: float = 0.1) -> AdversarialPrior:
    """Index set, perturbation profile and bookkeeping of the hard prior pair."""
    pi = as_distribution(pi)
    if not 0 < u < 1:
        raise BadParameter(f"u must lie in (0, 1), got {u}")
    if not v > 0:
        raise BadParameter(f"v must be > 0, got {v}")
    if not a > 2:
        raise BadParameter(f"a must be > 2, got {a}")
    if not 0 < delta <= 0.125:
        raise BadParameter(f"delta must lie in (0, 1/8], got {delta}")
    if not 0 < gamma_lb < 1:
        raise BadParameter(f"gamma_lb must lie in (0, 1), got {gamma_lb}")
    if int(M) != M or M < 1:
        raise BadParameter(f"M must be a positive integer, got {M}")
    if k < 2:
        raise BadParameter(f"k must be at least 2, got {k}")
    M = int(M)
    if M < compliant_m(delta) or M > math.sqrt(k):
        warnings.warn(f"M={M} is outside [{compliant_m(delta):.0f}, sqrt(k)={math.sqrt(k):.1f}]; "
                      "membership is checked empirically instead", stacklevel=2)
    view = sorted_view(pi)
    prof = build_eps(view.sorted_probs, float(k), u, v)
    eps = np.empty(pi.d)
    eps[view.order] = prof.eps
    A = select_index_set(pi, float(k), M, a, gamma_lb)
    rank = np.empty(pi.d, dtype=np.int64)
    rank[view.order] = np.arange(1, pi.d + 1)
    A_prime = A[rank[A] >= prof.J]
    return AdversarialPrior(pi, int(k), float(u), float(v), M, float(a), float(delta), float(gamma_lb),
                            A, A_prime, eps, prof.C, prof.I, prof.J, prof.case, prof.construction,
                            prof.certificate)


def separation_bound(prior: AdversarialPrior) -> float:
    """High-probability lower bound on the on-A L1 distance of an alternative draw."""
    s = np.sort(prior.pi.probs)[::-1]
    u, C, I, J, d = prior.u, prior.C, prior.I, prior.J, prior.d
    first = math.sqrt(u / 2.0) * float(np.sum(s[I - 1:])) if J <= d else 0.0
    second = math.sqrt(u * C) * (I - J) / math.sqrt(2.0 * I) if J <= d else 0.0
    core = min(max(first, second), math.sqrt(u / 8.0)) / (8.0 * prior.M ** 2)
    slack = 1.0 / math.sqrt(prior.k * prior.M * prior.delta) \
        + 8.0 * prior.a * (1.0 + math.log(1.0 / prior.gamma_lb)) / prior.k
    return core - slack


# ------------------------------------------------------------ draws

@dataclass(frozen=True)
class PriorDraw:
    q_tilde: DiscreteDistribution
    p_tilde: DiscreteDistribution
    xi: np.ndarray
    l1_distance: float
    l1_on_A: float
    valid: bool
    retries: int = 0

    def to_dict(self) -> dict:
        return {"q_tilde": self.q_tilde.probs.tolist(), "p_tilde": self.p_tilde.probs.tolist(),
                "xi": self.xi.tolist(), "l1_distance": self.l1_distance, "l1_on_A": self.l1_on_A,
                "valid": self.valid, "retries": self.retries}


@dataclass(frozen=True)
class DrawBatch:
    q: np.ndarray            # (n, d)
    p: np.ndarray            # (n, d)
    xi: np.ndarray           # (n, |A|) perturbations on A, in A's order
    retries: int


def _renormalize(rows: np.ndarray, pi: np.ndarray, A: np.ndarray, off_mass: float) -> None:
    """Rescale the off-A coordinates in place so each row sums to one."""
    shift = rows[:, A].sum(axis=1) - pi[A].sum()
    off = np.ones(pi.size, dtype=bool)
    off[A] = False
    rows[:, off] = pi[off] * (1.0 - shift / off_mass)[:, None]


def _check_renormalizable(prior: AdversarialPrior) -> float:
    off = np.ones(prior.d, dtype=bool)
    off[prior.A] = False
    off_mass = float(prior.pi.probs[off].sum())
    if off_mass <= 0:
        raise RenormalizationImpossible("the index set carries all of the mass")
    return off_mass


def _alt_values(prior, mode, drawn, q_A, gen, scale):
    """Values of p on A given the drawn source indices and q on A."""
    in_prime = np.isin(prior.A, prior.A_prime)
    if mode == "null":
        return q_A.copy(), np.zeros_like(q_A)
    if mode == "alt":
        eps = np.minimum(scale * prior.eps_star[prior.A[drawn]], 1.0)
        sign = np.where(gen.random(q_A.shape) < 0.5, -1.0, 1.0)
        xi = np.where(in_prime, sign * eps, 0.0)
        return q_A * (1.0 + xi), xi
    if mode == "smalltail":
        level = 2.0 * small_mass_level(prior) / prior.k
        coin = gen.random(q_A.shape) < 0.5
        p_A = np.where(in_prime, np.where(coin, level, 0.0), q_A)
        return p_A, p_A - q_A
    raise BadParameter(f"unknown draw mode {mode!r}")


def small_mass_level(prior: AdversarialPrior) -> float:
    """k times the average of the sub-1/k values over A (zero if A is empty)."""
    if prior.A.size == 0:
        return 0.0
    vals = prior.pi.probs[prior.A]
    return float(prior.k * np.mean(np.where(vals <= 1.0 / prior.k, vals, 0.0)))


def draw_batch(prior: AdversarialPrior, n: int, rng, mode: str = "null", scale: float = 1.0) -> DrawBatch:
    """``n`` independent (q, p) pairs; rows with a negative coordinate are redrawn."""
    gen = as_generator(rng)
    pi = prior.pi.probs
    off_mass = _check_renormalizable(prior)
    A = prior.A
    q = np.tile(pi, (n, 1))
    p = np.tile(pi, (n, 1))
    xi = np.zeros((n, A.size))
    # with A empty every row already equals pi
    todo = np.arange(n) if A.size else np.arange(0)
    retries = 0
    for attempt in range(MAX_RETRIES + 1):
        m = todo.size
        if m == 0:
            break
        drawn = gen.integers(0, A.size, size=(m, A.size))
        q_A = pi[A][drawn]
        p_A, x = _alt_values(prior, mode, drawn, q_A, gen, scale)
        qr, pr = np.tile(pi, (m, 1)), np.tile(pi, (m, 1))
        qr[:, A], pr[:, A] = q_A, p_A
        _renormalize(qr, pi, A, off_mass)
        _renormalize(pr, pi, A, off_mass)
        ok = np.all(qr >= 0, axis=1) & np.all(pr >= 0, axis=1)
        q[todo[ok]], p[todo[ok]], xi[todo[ok]] = qr[ok], pr[ok], x[ok]
        todo = todo[~ok]
        if todo.size:
            retries += int(todo.size)
    if todo.size:
        raise RetryCapExceeded(f"{todo.size} draws still negative after {MAX_RETRIES} retries")
    return DrawBatch(q, p, xi, retries)


def _single(prior: AdversarialPrior, rng, mode: str, scale: float = 1.0) -> PriorDraw:
    batch = draw_batch(prior, 1, rng, mode, scale)
    q, p = batch.q[0], batch.p[0]
    xi = np.zeros(prior.d)
    xi[prior.A] = batch.xi[0]
    qd, pd = DiscreteDistribution(q), DiscreteDistribution(p)
    valid = bool(np.all(q >= 0) and np.all(p >= 0)
                 and in_class_p_pi(qd, prior.pi) and in_class_p_pi(pd, prior.pi))
    diff = np.abs(p - q)
    return PriorDraw(qd, pd, xi, float(diff.sum()), float(diff[prior.A].sum()), valid, batch.retries)


def sample_null(prior: AdversarialPrior, rng) -> PriorDraw:
    """One draw of the null pair (q, q)."""
    return _single(prior, rng, "null")


def sample_alt(prior: AdversarialPrior, rng, scale: float = 1.0) -> PriorDraw:
    """One alternative draw; ``scale`` multiplies eps* (clipped at 1)."""
    return _single(prior, rng, "alt", scale)


def sample_alt_smalltail(prior: AdversarialPrior, rng) -> PriorDraw:
    """One alternative draw moving small coordinates of A to 0 or twice their average."""
    return _single(prior, rng, "smalltail")


def expected_l1_on_a(prior: AdversarialPrior, mode: str = "alt", scale: float = 1.0) -> float:
    """Exact mean of the on-A L1 distance, ignoring the negativity redraws."""
    A = prior.A
    if A.size == 0 or prior.A_prime.size == 0:
        return 0.0
    vals = prior.pi.probs[A]
    if mode == "alt":
        per = np.mean(vals * np.minimum(scale * prior.eps_star[A], 1.0))
    elif mode == "smalltail":
        level = 2.0 * small_mass_level(prior) / prior.k
        per = np.mean(0.5 * (vals + np.abs(vals - level)))
    else:
        raise BadParameter(f"unknown draw mode {mode!r}")
    return float(prior.A_prime.size * per)


def scale_for_separation(prior: AdversarialPrior, target: float, iters: int = 100):
    """eps* multiplier whose expected on-A L1 distance equals ``target``.

    Returns ``(scale, expected_l1)``. When even eps = 1 on every perturbed
    coordinate falls short, the saturating scale and its (smaller) expected
    distance are returned instead.
    """
    positive = prior.eps_star[prior.A][prior.eps_star[prior.A] > 0]
    if positive.size == 0:
        return 0.0, 0.0
    top = 1.0 / float(positive.min())
    reach = expected_l1_on_a(prior, "alt", top)
    if reach <= target:
        return top, reach
    lo, hi = 0.0, top
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if expected_l1_on_a(prior, "alt", mid) < target:
            lo = mid
        else:
            hi = mid
    return hi, expected_l1_on_a(prior, "alt", hi)
