import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from sqzlab.errors import AboveThresholdError, SqzlabError
from sqzlab.nonlinear import (
    CrystalSpec,
    boyd_kleinman_h,
    focusing_parameter,
    opa_threshold,
    optimal_sigma,
    pump_ratio,
    single_pass_efficiency,
    threshold_report,
)

PPKTP_CRYSTAL = CrystalSpec(
    length=2.6e-3,
    d_eff=7.3e-12,
    absorption_1550=84e-4,
    absorption_775=125e-4,
    refractive_index_1550=1.816,
    refractive_index_775=1.84,
)


def h_mpmath(sigma, xi):
    """Independent oracle: the imaginary part integrates to zero by symmetry."""
    mpmath.mp.dps = 25
    re = mpmath.quad(lambda t: (mpmath.cos(sigma * t) + t * mpmath.sin(sigma * t)) / (1 + t * t), [0, xi])
    return float(re**2 / xi)


def h_max_mpmath(xi):
    res = minimize_scalar(lambda s: -h_mpmath(s, xi), bounds=(0.0, 2.0), method="bounded", options={"xatol": 1e-8})
    return -res.fun


class TestBoydKleinman:
    def test_classic_optimum(self):
        sigma, h = optimal_sigma(2.84)
        assert h == pytest.approx(1.068, abs=0.001)
        assert h == pytest.approx(h_max_mpmath(2.84), abs=1e-8)
        assert sigma == pytest.approx(0.573, abs=0.002)

    def test_weak_focusing(self):
        assert boyd_kleinman_h(0.0, 0.01) == pytest.approx(0.00997, abs=5e-5)
        assert boyd_kleinman_h(0.0, 0.01) == pytest.approx(h_mpmath(0.0, 0.01), abs=1e-12)

    def test_ppktp_geometry(self):
        xi = focusing_parameter(2.6e-3, 33.86e-6, 1550e-9, 1.816)
        assert xi == pytest.approx(0.308, abs=5e-4)
        _, h = optimal_sigma(xi)
        assert h == pytest.approx(0.29, abs=0.01)
        assert h == pytest.approx(h_max_mpmath(xi), abs=1e-8)

    @pytest.mark.parametrize("sigma,xi", [(0.0, 1.0), (0.5, 2.84), (-0.7, 0.3), (2.5, 5.0), (1.0, 20.0)])
    def test_matches_oracle(self, sigma, xi):
        assert boyd_kleinman_h(sigma, xi) == pytest.approx(h_mpmath(sigma, xi), abs=1e-8)

    @pytest.mark.parametrize("sigma,xi", [(0.57, 2.84), (0.0, 0.1), (3.0, 10.0)])
    def test_quadrature_converged(self, sigma, xi):
        assert boyd_kleinman_h(sigma, xi, tol=1e-9) == pytest.approx(boyd_kleinman_h(sigma, xi, tol=1e-13), abs=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(sigma=st.floats(-3, 3), xi=st.floats(0.01, 10))
    def test_integration_direction(self, sigma, xi):
        # reversed limits only flip the sign of the integral
        from scipy.integrate import quad

        f = lambda t: np.exp(1j * sigma * t) / (1 + 1j * t)
        back = complex(
            quad(lambda t: f(t).real, xi, -xi, epsabs=1e-12)[0],
            quad(lambda t: f(t).imag, xi, -xi, epsabs=1e-12)[0],
        )
        assert boyd_kleinman_h(sigma, xi) == pytest.approx(abs(back) ** 2 / (4 * xi), abs=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(xi=st.floats(1e-4, 0.05))
    def test_weak_focusing_limit(self, xi):
        assert abs(boyd_kleinman_h(0.0, xi) / xi - 1) < 0.01

    def test_rejects_nonpositive_xi(self):
        with pytest.raises(SqzlabError):
            boyd_kleinman_h(0.0, 0.0)
        with pytest.raises(SqzlabError):
            optimal_sigma(-1.0)


class TestEfficiencyThreshold:
    def test_ppktp_efficiency(self):
        assert single_pass_efficiency(PPKTP_CRYSTAL, 33.86e-6) == pytest.approx(2.0e-4, rel=0.02)

    def test_zero_nonlinearity(self):
        crystal = CrystalSpec(2.6e-3, 0.0, 0.0, 0.0, 1.816, 1.84)
        assert single_pass_efficiency(crystal, 33.86e-6) == 0.0

    def test_quadratic_in_d_eff(self):
        doubled = CrystalSpec(2.6e-3, 14.6e-12, 0.0, 0.0, 1.816, 1.84)
        assert single_pass_efficiency(doubled, 33.86e-6) == pytest.approx(4 * single_pass_efficiency(PPKTP_CRYSTAL, 33.86e-6))

    def test_threshold_examples(self):
        assert opa_threshold(2.0e-4, 0.20008) == pytest.approx(50.0, abs=0.05)
        # efficiency implied by a 65 W threshold under the factor-4 convention
        implied = 0.20008**2 / (4 * 65.0)
        assert implied == pytest.approx(1.540e-4, abs=5e-8)
        assert opa_threshold(implied, 0.20008) == pytest.approx(65.0, rel=1e-12)
        assert opa_threshold(8e-4, 0.2) == pytest.approx(opa_threshold(2e-4, 0.2) / 4)

    @given(e=st.floats(1e-6, 1e-2), rho=st.floats(1e-4, 1.0))
    def test_threshold_identity(self, e, rho):
        assert 4 * e * opa_threshold(e, rho) == pytest.approx(rho**2, rel=1e-12)

    def test_threshold_rejects_zero_efficiency(self):
        with pytest.raises(SqzlabError):
            opa_threshold(0.0, 0.2)

    def test_pump_ratio(self):
        assert pump_ratio(37.0, 65.0) == pytest.approx(0.7545, abs=5e-5)
        assert pump_ratio(0.0, 65.0) == 0.0
        assert pump_ratio(16.25, 65.0) == 0.5

    def test_pump_ratio_above_threshold(self):
        with pytest.raises(AboveThresholdError):
            pump_ratio(65.0, 65.0)

    @given(p=st.floats(0, 60), dp=st.floats(1e-3, 4))
    def test_pump_ratio_increasing(self, p, dp):
        assert pump_ratio(p + dp, 65.0) > pump_ratio(p, 65.0)

    def test_report(self):
        rep = threshold_report(PPKTP_CRYSTAL, 33.86e-6, 0.9998, 0.64, 0.0, circulating_pump=37.0)
        assert rep.round_trip_amplitude_loss == pytest.approx(0.20008, abs=1e-5)
        assert 32.5 < rep.threshold_power_intracavity < 130
        assert rep.pump_ratio_x == pytest.approx(np.sqrt(37.0 / rep.threshold_power_intracavity))
        fixed = threshold_report(PPKTP_CRYSTAL, 33.86e-6, 0.9998, 0.64, 0.0, 37.0, threshold_override=65.0)
        assert fixed.pump_ratio_x == pytest.approx(0.7545, abs=5e-5)

    def test_crystal_validation(self):
        with pytest.raises(SqzlabError):
            CrystalSpec(0.0, 7e-12, 0, 0, 1.8, 1.8)
        with pytest.raises(SqzlabError):
            CrystalSpec(1e-3, 7e-12, -1, 0, 1.8, 1.8)
        assert PPKTP_CRYSTAL.double_pass_loss("775") == pytest.approx(6.5e-5, rel=1e-4)
