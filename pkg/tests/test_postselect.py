"""Truncated-Gaussian retention statistics and the rejection-sampling cross-check."""

import math

import numpy as np
import pytest

from singletsim import postselect as ps


class TestTruncatedIntegral:
    @pytest.mark.parametrize("power", [0, 2])
    @pytest.mark.parametrize("l", [0.1, 0.678, 1.15, 3.0, math.inf])
    def test_closed_matches_quadrature(self, power, l):
        closed = ps.truncated_integral(power, l, "closed")
        quad = ps.truncated_integral(power, l, "quad")
        assert closed == pytest.approx(quad, rel=1e-10)

    def test_full_line_values(self):
        assert ps.truncated_integral(0, math.inf) == pytest.approx(math.sqrt(2 * math.pi))
        assert ps.truncated_integral(2, math.inf) == pytest.approx(math.sqrt(2 * math.pi))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            ps.truncated_integral(1, 1.0)
        with pytest.raises(ValueError):
            ps.truncated_integral(0, -1.0)
        with pytest.raises(ValueError):
            ps.truncated_integral(0, 1.0, method="series")


class TestMakeRule:
    def test_reference_thresholds(self):
        rule = ps.make_rule(0.678)
        assert rule.q == pytest.approx(0.502228, abs=1e-6)
        assert rule.mu == pytest.approx(0.144048, abs=1e-6)
        rule = ps.make_rule(1.150)
        assert rule.q == pytest.approx(0.749856, abs=1e-6)
        assert rule.mu == pytest.approx(0.368341, abs=1e-6)

    def test_infinite_threshold_keeps_everything(self):
        rule = ps.make_rule(math.inf)
        assert rule.q == 1.0 and rule.mu == 1.0

    def test_monotone_and_ordered(self):
        grid = np.linspace(0.05, 5.0, 40)
        rules = [ps.make_rule(float(b)) for b in grid]
        qs = [r.q for r in rules]
        mus = [r.mu for r in rules]
        assert all(a < b for a, b in zip(qs, qs[1:]))
        assert all(a < b for a, b in zip(mus, mus[1:]))
        assert all(r.mu < r.q for r in rules)

    def test_positive_threshold_required(self):
        with pytest.raises(ValueError):
            ps.make_rule(0.0)


class TestInvert:
    def test_half_retention_threshold(self):
        rule = ps.invert_for_q(0.5)
        assert rule.threshold_ratio == pytest.approx(0.674490, abs=1e-5)
        assert rule.q == pytest.approx(0.5, abs=1e-9)

    def test_three_quarter_retention_threshold(self):
        assert ps.invert_for_q(0.75).threshold_ratio == pytest.approx(1.150349, abs=1e-5)

    def test_deep_tail_warns(self):
        with pytest.warns(UserWarning):
            ps.invert_for_q(1.0 - 1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            ps.invert_for_q(0.0)
        with pytest.raises(ValueError):
            ps.invert_for_q(1.0)


class TestApply:
    def test_shrinks_only_mean_spread(self):
        rule = ps.make_rule(0.678)
        prior, cond = 2.0 / 3.0, 2.0 / 19.0
        out = ps.apply_postselection(prior, cond, rule)
        assert out == pytest.approx(cond + rule.mu * (prior - cond), rel=1e-12)
        assert cond < out < prior

    def test_ordering_enforced(self):
        rule = ps.make_rule(1.0)
        with pytest.raises(ValueError):
            ps.apply_postselection(0.1, 0.5, rule)
        with pytest.raises(ValueError):
            ps.apply_postselection(0.5, -0.1, rule)


class TestRejectionSampling:
    def test_agrees_with_analytic_within_three_sigma(self):
        rule = ps.make_rule(0.678)
        n = 200_000
        acc, var = ps.rejection_sample(rule, n, seed=77)
        sig_q = math.sqrt(rule.q * (1 - rule.q) / n)
        assert abs(acc - rule.q) <= 3 * sig_q
        assert abs(var - rule.mu) <= 0.01

    def test_deterministic_under_seed(self):
        rule = ps.make_rule(1.0)
        assert ps.rejection_sample(rule, 1000, seed=5) == ps.rejection_sample(rule, 1000, seed=5)
