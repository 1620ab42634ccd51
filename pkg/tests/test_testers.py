import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from closeness.errors import BadParameter, BudgetTooSmall
from closeness.harness import default_null_suite, family_uniform
from closeness.kernels import batch_statistics
from closeness.sampling import RngStream, SplitCounts, poissonized_batch
from closeness.testers import (TestConstants, batch_verdicts, calibrate_constants, combined_test,
                               critical_multipliers, pretest_linf, rejection_rate, smallest_multiplier,
                               stat_t1, stat_t2, stat_t23, test_1, test_2, test_23, thresh_t1, thresh_t2,
                               thresh_t23)

# frozen reference values (30-digit evaluation of the closed forms)
T23_EXAMPLE = -2.08008382305190411453
THR2_EXAMPLE = 22.6218060042866870910
LOG100_SQ = 21.2075924419135920422
LINF_THRESHOLD_EXAMPLE = 0.0675113621227743863


def counts(x, y, k_bar):
    return SplitCounts.from_blocks(np.asarray(x), np.asarray(y), k_bar)


def zeros(d):
    return np.zeros(d, dtype=int)


class TestPretest:
    def test_equal_counts_accept(self):
        c = counts([[1, 2], [3, 4], [5, 6]], [[0, 0], [0, 0], [5, 6]], 10)
        assert pretest_linf(c, 0.1) == (False, None)

    def test_hand_case(self):
        # coordinate 1: p_hat = 0.6, q_hat = 0.01, threshold ~ 0.0675
        x3, y3 = np.array([10, 60]), np.array([10, 1])
        c = counts([zeros(2)] * 2 + [x3], [zeros(2)] * 2 + [y3], 100)
        thr = math.sqrt(0.01 * math.log(100) / 100) + math.log(100) / 100
        assert thr == pytest.approx(LINF_THRESHOLD_EXAMPLE, rel=1e-14)
        assert pretest_linf(c, 1.0) == (True, 1)

    def test_first_index_reported(self):
        c = counts([zeros(3)] * 2 + [np.array([0, 60, 60])], [zeros(3)] * 2 + [np.array([0, 1, 1])], 100)
        assert pretest_linf(c, 1.0) == (True, 1)

    def test_huge_multiplier_accepts(self):
        c = counts([zeros(2)] * 2 + [np.array([100, 0])], [zeros(2)] * 2 + [np.array([0, 100])], 100)
        assert pretest_linf(c, 1000.0) == (False, None)


class TestT23:
    EX_X = [[2, 0], [1, 1], [0, 0]]
    EX_Y = [[0, 1], [1, 0], [3, 0]]

    def test_zero_when_first_blocks_match(self):
        c = counts([[1, 2], [5, 0], [0, 0]], [[1, 2], [0, 7], [1, 1]], 5)
        assert stat_t23(c) == 0

    def test_hand_case(self):
        c = counts(self.EX_X, self.EX_Y, 3)
        assert stat_t23(c) == pytest.approx(T23_EXAMPLE, rel=1e-14)
        assert not test_23(c, 1.0)

    def test_swap_symmetry(self):
        x, y = np.array(self.EX_X), np.array(self.EX_Y)
        sx, sy = x.copy(), y.copy()
        sx[:2], sy[:2] = y[:2], x[:2]
        assert stat_t23(counts(sx, sy, 3)) == stat_t23(counts(x, y, 3))

    @pytest.mark.parametrize("y1, k_bar, want", [([0, 0], 8, 1.0), ([8], 8, 2.0), ([1, 1, 1, 1], 8, 2.0)])
    def test_threshold(self, y1, k_bar, want):
        d = len(y1)
        c = counts([zeros(d)] * 3, [np.array(y1), zeros(d), zeros(d)], k_bar)
        assert thresh_t23(c) == pytest.approx(want, rel=1e-14)

    def test_null_accepts(self):
        c = counts(self.EX_X, self.EX_X, 3)
        assert not test_23(c, 1.0)

    def test_tiny_multiplier_rejects_positive(self):
        c = counts([[3, 0], [3, 0], [0, 0]], [[0, 0], [0, 0], [3, 3]], 3)
        assert stat_t23(c) > 0 and test_23(c, 1e-12)


class TestT2AndT1:
    X1, Y1, X2, Y2 = [3, 0], [1, 2], [2, 1], [2, 2]

    def make(self, y3):
        return counts([self.X1, self.X2, [0, 0]], [self.Y1, self.Y2, y3], 100)

    def test_t2_cases(self):
        assert stat_t2(self.make([1, 1])) == 0
        assert stat_t2(self.make([0, 5])) == 0
        assert stat_t2(self.make([0, 0])) == 2

    def test_t2_threshold(self):
        c = counts([zeros(2)] * 3, [[2, 3], [1, 4], [0, 1]], 100)
        assert thresh_t2(c) == pytest.approx(THR2_EXAMPLE, rel=1e-14)
        c = counts([zeros(2)] * 3, [zeros(2)] * 3, 100)
        assert thresh_t2(c) == pytest.approx(LOG100_SQ, rel=1e-14)
        c = counts([zeros(2)] * 3, [[2, 3], [1, 4], [1, 1]], 100)
        assert thresh_t2(c) == pytest.approx(LOG100_SQ, rel=1e-14)

    def test_t2_verdicts(self):
        assert not test_2(self.make([0, 0]), 1.0)
        assert test_2(self.make([0, 0]), 1e-9)
        assert not test_2(counts([self.X1] * 3, [self.X1] * 3, 100), 1.0)

    def test_t1(self):
        c = counts([[5, 2], zeros(2), zeros(2)], [[1, 1], zeros(2), [0, 3]], 9)
        assert stat_t1(c) == 4
        assert thresh_t1(c) == 3
        assert test_1(c, 1.0)
        assert not test_1(c, 1e6)
        assert stat_t1(counts([[5, 2], zeros(2), zeros(2)], [[1, 1], zeros(2), [1, 3]], 9)) == 0
        assert stat_t1(counts([[5, 2]] * 3, [[5, 2]] * 3, 9)) == 0


class TestCombined:
    def test_or_of_verdicts(self):
        g = np.random.default_rng(0)
        consts = TestConstants(1.0, 1.0, 0.5, 0.5)
        for _ in range(200):
            c = counts(g.poisson(2, (3, 6)), g.poisson(2, (3, 6)), 12)
            r = combined_test(c, consts)
            assert r.combined == any(r.verdicts)
            assert r.verdicts[0] == (r.linf_witness is not None)

    def test_all_accept(self):
        c = counts([[1, 1]] * 3, [[1, 1]] * 3, 10)
        r = combined_test(c, TestConstants(1.0, 1.0, 1.0, 1.0))
        assert r.verdicts == (False, False, False, False) and not r.combined

    def test_report_dict(self):
        c = counts([[1, 1]] * 3, [[1, 1]] * 3, 10)
        d = combined_test(c, TestConstants(1.0, 1.0, 1.0, 1.0)).to_dict()
        assert set(d["verdicts"]) == {"phi_inf", "phi_23", "phi_2", "phi_1"}
        assert d["constants"]["c_inf"] == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_permutation_equivariance(self, seed):
        g = np.random.default_rng(seed)
        x, y = g.poisson(1.5, (3, 9)), g.poisson(1.5, (3, 9))
        perm = g.permutation(9)
        consts = TestConstants(0.8, 0.5, 0.5, 0.5)
        a = combined_test(counts(x, y, 10), consts)
        b = combined_test(counts(x[:, perm], y[:, perm], 10), consts)
        assert a.verdicts == b.verdicts
        assert a.t23 == pytest.approx(b.t23, rel=1e-12, abs=1e-12)
        assert (a.t2, a.t1, a.thr2) == pytest.approx((b.t2, b.t1, b.thr2), rel=1e-12)


class TestConstantsType:
    def test_guards(self):
        with pytest.raises(BadParameter):
            TestConstants(0.0, 1, 1, 1)
        with pytest.raises(BadParameter):
            TestConstants(1, 1, 1, 1, gamma=1.0)
        TestConstants(math.inf, math.inf, math.inf, math.inf)

    def test_roundtrip(self):
        c = TestConstants(1.5, 2.5, 3.5, 4.5, 0.05)
        assert TestConstants.from_dict(c.to_dict()) == c


class TestCalibration:
    def test_budget_guard(self):
        with pytest.raises(BudgetTooSmall):
            calibrate_constants([family_uniform(5)], 300, 0.1, 10, RngStream(0))

    def test_deterministic(self):
        suite = default_null_suite(20)
        a = calibrate_constants(suite, 600, 0.1, 300, RngStream(4))
        b = calibrate_constants(suite, 600, 0.1, 300, RngStream(4))
        assert a == b

    def test_smallest_multiplier_matches_bisection(self):
        # dual route: exact order statistic vs. bisection on the step function
        g = np.random.default_rng(1)
        members = [g.exponential(size=400), g.exponential(size=250) * 2]
        target = 0.025
        exact = smallest_multiplier(members, target)
        lo, hi = 0.0, 100.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if max(rejection_rate(m, mid) for m in members) <= target:
                hi = mid
            else:
                lo = mid
        assert exact == pytest.approx(hi, rel=1e-9)
        assert max(rejection_rate(m, exact) for m in members) <= target
        assert max(rejection_rate(m, exact * (1 - 1e-6)) for m in members) > target

    def test_rejection_monotone_in_multiplier(self):
        gen = RngStream(2).generator()
        p = family_uniform(30).probs
        x, y = poissonized_batch(p, p, 100, 500, gen)
        crit = critical_multipliers(batch_statistics(x, y, 100), 100)
        grid = np.linspace(0.0, 5.0, 60)
        for j in range(4):
            rates = [rejection_rate(crit[:, j], c) for c in grid]
            assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_critical_values_agree_with_verdicts(self):
        gen = RngStream(3).generator()
        p = family_uniform(25).probs
        x, y = poissonized_batch(p, p, 80, 300, gen)
        stats = batch_statistics(x, y, 80)
        crit = critical_multipliers(stats, 80)
        consts = TestConstants(1.1, 0.7, 0.3, 0.2)
        verdicts = batch_verdicts(stats, 80, consts)
        assert np.array_equal(verdicts, crit >= consts.as_array()[None, :])

    def test_null_centering(self):
        gen = RngStream(5).generator()
        p = family_uniform(20).probs
        x, y = poissonized_batch(p, p, 60, 20000, gen)
        stats = batch_statistics(x, y, 60)
        for col in (0, 2, 4):
            v = stats[:, col]
            se = v.std(ddof=1) / math.sqrt(v.size)
            assert abs(v.mean()) <= 4 * se
