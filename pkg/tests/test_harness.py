import json
import math

import numpy as np
import pytest

from closeness.errors import BadParameter, BudgetTooSmall, KTooLargeForDesk
from closeness.formats import document_from_csv, document_to_csv, dumps
from closeness.harness import (MassTransport, compare_report, empirical_separation, estimate_risk,
                               family_two_level, family_two_spike, family_uniform, family_zipf, fixed_pair,
                               side_statistics)
from closeness.rates import dk16_rate, upper_rate
from closeness.sampling import RngStream
from closeness.testers import TestConstants, batch_verdicts, calibrate_constants

NEVER = TestConstants(math.inf, math.inf, math.inf, math.inf)
ALWAYS = TestConstants(1e-12, 1e-12, 1e-12, 1e-12)


class TestFamilies:
    def test_uniform(self):
        assert family_uniform(1).probs.tolist() == [1.0]
        assert family_uniform(4).probs.tolist() == [0.25] * 4

    def test_zipf(self):
        assert np.allclose(family_zipf(5, 0.0).probs, 0.2)
        assert family_zipf(2, 1.0).probs == pytest.approx([2 / 3, 1 / 3], rel=1e-15)
        assert np.all(np.diff(family_zipf(50, 1.3).probs) <= 0)

    def test_two_spike(self):
        pi = family_two_spike(10, 0.3)
        assert pi.d == 10002
        assert pi.probs[2] == pytest.approx(3e-5, rel=1e-15)
        assert pi.probs.sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("h", [0.0, 0.5, -0.1])
    def test_two_spike_guards(self, h):
        with pytest.raises(BadParameter):
            family_two_spike(10, h)

    def test_two_spike_desk_cap(self):
        with pytest.raises(KTooLargeForDesk):
            family_two_spike(60, 0.3)

    def test_two_level(self):
        p = family_two_level(100).probs
        assert p[:10].sum() == pytest.approx(0.5) and p[10:].sum() == pytest.approx(0.5)


class TestRisk:
    pi = family_uniform(30)

    def test_always_accept(self):
        alt = fixed_pair(family_zipf(30, 1.0), self.pi)
        r = estimate_risk(NEVER, fixed_pair(self.pi), alt, 300, 200, RngStream(0))
        assert (r.type1, r.type2) == (0.0, 1.0)

    def test_always_reject(self):
        alt = fixed_pair(family_zipf(30, 1.0), self.pi)
        r = estimate_risk(ALWAYS, fixed_pair(self.pi), alt, 300, 200, RngStream(0))
        assert r.type1 >= 0.9 and r.type2 <= 0.1

    def test_budget(self):
        with pytest.raises(BudgetTooSmall):
            estimate_risk(NEVER, fixed_pair(self.pi), fixed_pair(self.pi), 300, 99, RngStream(0))

    def test_bit_identical_and_se(self):
        c = TestConstants(1.0, 1.0, 1.0, 1.0)
        alt = fixed_pair(family_zipf(30, 1.0), self.pi)
        a = estimate_risk(c, fixed_pair(self.pi), alt, 300, 300, RngStream(7))
        b = estimate_risk(c, fixed_pair(self.pi), alt, 300, 300, RngStream(7))
        assert a == b
        assert a.se1 == pytest.approx(math.sqrt(a.type1 * (1 - a.type1) / 300))
        assert a.risk == a.type1 + a.type2

    def test_common_random_numbers(self):
        # statistics per trial do not depend on the multipliers, only the comparisons do
        s1, _ = side_statistics(fixed_pair(self.pi), 300, 500, RngStream(3))
        s2, _ = side_statistics(fixed_pair(self.pi), 300, 500, RngStream(3))
        assert np.array_equal(s1, s2)
        lo = batch_verdicts(s1, 100, TestConstants(0.5, 0.5, 0.5, 0.5)).any(axis=1)
        hi = batch_verdicts(s1, 100, TestConstants(2.0, 2.0, 2.0, 2.0)).any(axis=1)
        assert np.all(lo >= hi)

    def test_type1_and_type2_use_separate_streams(self):
        c = TestConstants(1.0, 1.0, 1.0, 1.0)
        r = estimate_risk(c, fixed_pair(self.pi), fixed_pair(self.pi), 300, 400, RngStream(1))
        # identical generators on both sides would make type1 + type2 exactly 1
        assert r.type1 + r.type2 != 1.0 or r.type1 in (0.0, 1.0)

    def test_split_model_runs(self):
        s, truncated = side_statistics(fixed_pair(self.pi), 300, 120, RngStream(2), model="split")
        assert s.shape == (120, 6) and 0 <= truncated <= 120
        with pytest.raises(BadParameter):
            side_statistics(fixed_pair(self.pi), 300, 10, RngStream(2), model="bogus")


class TestMassTransport:
    @pytest.mark.parametrize("t", [0.0, 0.1, 0.37, 1.0])
    def test_exact_l1(self, t):
        q = family_zipf(40, 1.0)
        mt = MassTransport.halves(q)
        p = mt.alternative(t)
        assert p.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.abs(p - q.probs).sum() == pytest.approx(t * mt.max_l1, rel=1e-12, abs=1e-15)

    def test_cap(self):
        q = family_uniform(10)
        with pytest.raises(BadParameter):
            MassTransport.halves(q, max_l1=1.5)

    def test_tail_direction(self):
        q = family_zipf(200, 1.0)
        mt = MassTransport.tail(q, 100)
        assert mt.src_mass == pytest.approx(q.probs[q.probs <= 0.01].sum())


class TestSeparation:
    def test_degenerate_level(self):
        est = empirical_separation(NEVER, family_uniform(10), 300, 1.0, MassTransport.halves(family_uniform(10)),
                                   100, RngStream(0))
        assert est.rho_hat == 0.0

    def test_unreachable(self):
        q = family_uniform(10)
        est = empirical_separation(NEVER, q, 300, 0.1, MassTransport.halves(q), 100, RngStream(0))
        assert est.unreachable and est.rho_hat is None

    def test_bracket_contract(self):
        q = family_uniform(16)
        c = calibrate_constants([q], 1200, 0.1, 400, RngStream(8))
        est = empirical_separation(c, q, 1200, 0.3, MassTransport.halves(q), 400, RngStream(4))
        assert not est.unreachable
        lo, hi = est.bracket
        assert lo <= est.rho_hat == hi
        assert est.risk_high <= 0.3
        assert est.risk_low > 0.3 - 2 * est.se_high


class TestReport:
    def test_two_spike_preset(self):
        pi = family_two_spike(10, 0.3)
        rep = compare_report(pi, 10)
        assert rep["dk16"]["rho"] >= 1
        assert rep["upper"]["rho"] <= 10 * (1 / math.sqrt(10) + 0.3)
        assert rep["dk16"]["rho"] == dk16_rate(pi, 10).rho
        assert rep["upper"]["rho"] == upper_rate(pi, 10).rho

    def test_deterministic(self):
        c = TestConstants(2.0, 2.0, 2.0, 2.0)
        opts = {"separation": True, "trials": 100, "seed": 3}
        a = compare_report(family_uniform(16), 600, 0.3, c, opts)
        b = compare_report(family_uniform(16), 600, 0.3, c, opts)
        assert dumps(a) == dumps(b)

    def test_round_trips(self):
        rep = compare_report(family_zipf(30, 1.0), 50, 0.1, TestConstants(1.0, 2.0, 3.0, 4.0))
        assert json.loads(dumps(rep)) == json.loads(dumps(rep))
        assert json.loads(dumps(rep)) == rep
        assert document_from_csv(document_to_csv(rep)) == rep
