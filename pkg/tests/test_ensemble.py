"""Scaled-basis state construction, squeezing reports, and sensitivity bounds."""

import math

import numpy as np
import pytest

from singletsim import ensemble as ens


def _mixed(j=1.0, n=1_000_000, s0=5e7):
    return ens.make_completely_mixed(ens.EnsembleParams(n, j), ens.PulseParams(s0=s0))


class TestParams:
    def test_collective_constants(self):
        p = ens.EnsembleParams(1_000_000, 1.0)
        assert p.collective_j == 1_000_000.0
        assert p.n_j == pytest.approx(2.0 / 3.0, abs=1e-15)

    @pytest.mark.parametrize("j", [0.3, 0.0, -0.5])
    def test_rejects_non_half_integer_spin(self, j):
        with pytest.raises(ValueError):
            ens.EnsembleParams(10, j)

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ValueError):
            ens.EnsembleParams(0, 1.0)

    def test_default_q(self):
        assert ens.default_q(0.5) == 1.0
        assert ens.default_q(1.0) == pytest.approx(8.0 / 9.0, abs=1e-15)
        with pytest.raises(ValueError):
            ens.default_q(1.5)

    def test_tau_couples_both_spins(self):
        pulse = ens.PulseParams(s0=5e7, omega=2.0)
        params = ens.EnsembleParams(1_000_000, 1.0)
        assert pulse.tau_for(params) == pytest.approx(
            1.0 / (2.0 * math.sqrt(5e7 * 1e6)), rel=1e-15)


class TestConstructors:
    @pytest.mark.parametrize("j,xi", [(0.5, 1.5), (1.0, 2.0), (2.0, 3.0)])
    def test_mixed_state_squeezing(self, j, xi):
        st = _mixed(j=j)
        assert ens.xi_squared(st).xi_squared == pytest.approx(xi, abs=1e-12)

    def test_mixed_state_blocks(self):
        st = _mixed()
        assert np.allclose(np.diag(st.cov)[:3], 2.0 / 3.0, atol=1e-15)
        assert np.array_equal(st.cov[:3, 3:], np.zeros((3, 3)))
        assert np.allclose(np.diag(st.cov)[3:], [0.0, 0.5, 0.5], atol=1e-15)
        assert st.mean_raw[3] == 5e7
        assert np.all(st.mean_raw[:3] == 0.0)

    def test_product_updown(self):
        st = ens.make_product_updown(ens.EnsembleParams(100, 1.0), ens.PulseParams(s0=1e4))
        assert np.allclose(np.diag(st.cov)[:3], [0.5, 0.5, 0.0], atol=1e-15)
        assert ens.xi_squared(st).xi_squared == pytest.approx(1.0, abs=1e-12)

    def test_product_updown_needs_even_count(self):
        with pytest.raises(ValueError):
            ens.make_product_updown(ens.EnsembleParams(7, 1.0), ens.PulseParams(s0=1e4))

    def test_scaled_light_mean(self):
        st = _mixed()
        assert st.mean_scaled[3] == pytest.approx(math.sqrt(5e7), rel=1e-15)


class TestCovarianceGuards:
    def test_rejects_asymmetric(self):
        cov = np.eye(6)
        cov[0, 1] = 1e-6
        with pytest.raises(ArithmeticError):
            ens.finalize_covariance(cov)

    def test_rejects_indefinite(self):
        cov = np.eye(6)
        cov[0, 0] = -0.5
        with pytest.raises(ArithmeticError):
            ens.finalize_covariance(cov)

    def test_clips_roundoff_negatives(self):
        cov = np.eye(6) * 1e-12
        cov[0, 0] = -1e-13  # within the tolerance floor
        out = ens.finalize_covariance((cov + cov.T) / 2)
        assert np.all(np.linalg.eigvalsh(out) >= 0.0)


class TestReports:
    def test_report_fields(self):
        st = _mixed()
        rep = ens.xi_squared(st)
        assert rep.var_x == pytest.approx(2e6 / 3.0, rel=1e-12)
        assert rep.unentangled_bound == pytest.approx(1e6 * 2.0, rel=1e-12)
        assert not rep.entangled_flag

    def test_entangled_flag(self):
        st = _mixed()
        cov = st.cov.copy()
        cov[:3, :3] = np.diag([0.1, 0.1, 0.1])
        rep = ens.xi_squared(st.with_(cov=ens.finalize_covariance(cov)))
        assert rep.entangled_flag

    def test_field_sensitivity_respects_bound(self):
        rng = np.random.default_rng(5)
        st = _mixed()
        for _ in range(50):
            n = rng.standard_normal(3)
            n /= np.linalg.norm(n)
            delta_f, bound = ens.field_sensitivity(st, n, 1e-4)
            assert delta_f <= bound + 1e-15

    def test_field_sensitivity_unit_vector_required(self):
        with pytest.raises(ValueError):
            ens.field_sensitivity(_mixed(), [1.0, 1.0, 0.0], 1e-4)

    def test_fisher_bound(self):
        st = _mixed()
        assert ens.fisher_upper_bound(st) == pytest.approx(4.0 * 1e6 * 2.0, rel=1e-12)
