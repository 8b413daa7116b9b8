import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqzlab import cavity
from sqzlab.cavity import (
    CavitySpec,
    SurfaceSpec,
    airy_intracavity,
    buildup,
    eigenmode_waist,
    escape_efficiency,
    finesse,
    fsr,
    harmonic_waist,
    linewidth_fwhm,
)
from sqzlab.errors import SqzlabError, UnstableCavityError

from conftest import kogelnik_waist, scanned_finesse

reflectivity = st.floats(min_value=0.05, max_value=0.9999)


class TestFinesse:
    def test_fundamental(self):
        assert finesse(0.9998, 0.64, 0.0) == pytest.approx(14.04, abs=0.005)

    def test_pump(self):
        assert finesse(0.98, 0.9998, 0.0) == pytest.approx(308.0, abs=0.05)
        assert finesse(0.98, 0.9998, 0.0) == pytest.approx(307, rel=0.01)

    def test_no_feedback(self):
        assert finesse(0.0, 0.7) == 0.0

    def test_symmetric_closed_form(self):
        assert finesse(0.6, 0.6) == pytest.approx(6.0837, abs=1e-4)

    def test_symmetric_scanned(self):
        # scanned Airy FWHM gives the exact arcsin form, not the closed-form approximation
        assert scanned_finesse(0.6, 0.6) == pytest.approx(6.0147, abs=1e-4)

    def test_rejects_closed_lossless(self):
        with pytest.raises(SqzlabError, match="diverges"):
            finesse(1.0, 1.0, 0.0)

    def test_rejects_out_of_range(self):
        with pytest.raises(SqzlabError):
            finesse(1.2, 0.5)


class TestAiryOracle:
    @pytest.mark.parametrize("r_a,r_b,loss", [(0.9, 0.8, 0.0), (0.98, 0.9998, 6.5e-5), (0.9998, 0.64, 4.4e-5)])
    def test_scan_matches_exact_halfwidth(self, r_a, r_b, loss):
        rho = np.sqrt(r_a * r_b * (1 - loss))
        exact = np.pi / (2 * np.arcsin((1 - rho) / (2 * np.sqrt(rho))))
        assert scanned_finesse(r_a, r_b, loss) == pytest.approx(exact, rel=1e-9)

    @pytest.mark.parametrize("r", [0.94, 0.97, 0.99, 0.999])
    def test_closed_form_high_finesse(self, r):
        assert finesse(r, r) >= 50
        assert finesse(r, r) == pytest.approx(scanned_finesse(r, r), rel=1e-3)

    def test_resonance_value(self):
        assert airy_intracavity(0.0, 0.02, 0.98, 0.9998) == pytest.approx(194.15, abs=0.005)

    def test_antiresonance_value(self):
        assert airy_intracavity(np.pi, 0.02, 0.98, 0.9998) == pytest.approx(0.00505, abs=2e-5)

    def test_zero_input(self):
        assert airy_intracavity(0.3, 0.0, 0.98, 0.9998) == 0.0

    def test_geometric_series(self):
        # field sum over round trips, truncated where rho^n is negligible
        t_in, r_a, r_b, phase = 0.02, 0.98, 0.9998, 0.01
        rho = np.sqrt(r_a * r_b)
        n = np.arange(20000)
        field = np.sqrt(t_in) * np.sum((rho * np.exp(1j * phase)) ** n)
        assert airy_intracavity(phase, t_in, r_a, r_b) == pytest.approx(abs(field) ** 2, rel=1e-10)

    def test_vectorised(self):
        out = airy_intracavity(np.array([0.0, 2 * np.pi]), 0.02, 0.98, 0.9998)
        assert out.shape == (2,)
        assert out[0] == pytest.approx(out[1])


class TestFsrLinewidth:
    def test_ppktp_fsr(self):
        assert fsr(2.6e-3, 1.816) == pytest.approx(31.75e9, rel=1e-3)

    def test_one_ghz(self):
        assert fsr(0.149896229, 1.0) == pytest.approx(1.0e9, rel=1e-6)

    def test_hand_value(self):
        assert fsr(1e-3, 2.0) == pytest.approx(74.95e9, rel=1e-4)

    def test_rejects_length(self):
        with pytest.raises(SqzlabError):
            fsr(0.0, 1.5)

    def test_linewidth(self):
        assert linewidth_fwhm(31.75e9, 14.04) == pytest.approx(2.261e9, rel=1e-3)
        assert linewidth_fwhm(5.0, 1.0) == 5.0
        assert linewidth_fwhm(31.75e9, 308) == pytest.approx(103.1e6, rel=1e-3)

    def test_linewidth_rejects_zero(self):
        with pytest.raises(SqzlabError):
            linewidth_fwhm(1e9, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(r_a=reflectivity, r_b=reflectivity, bump=st.floats(1e-4, 0.05))
    def test_linewidth_decreases_with_reflectivity(self, r_a, r_b, bump):
        f = fsr(2.6e-3, 1.816)
        base = linewidth_fwhm(f, finesse(r_a, r_b))
        assert linewidth_fwhm(f, finesse(min(r_a + bump, 0.99995), r_b)) < base
        assert linewidth_fwhm(f, finesse(r_a, min(r_b + bump, 0.99995))) < base


class TestBuildupEscape:
    def test_with_absorption(self):
        assert buildup(0.02, 0.98, 0.9998, 6.5e-5, 1.0) == pytest.approx(193.0, abs=0.1)

    def test_partial_mode_matching(self):
        assert buildup(0.02, 0.98, 0.9998, 6.5e-5, 0.511) == pytest.approx(98.7, abs=0.2)

    def test_no_mode_matching(self):
        assert buildup(0.02, 0.98, 0.9998, 6.5e-5, 0.0) == 0.0

    @given(mm=st.floats(0, 1))
    def test_linear_in_mode_matching(self, mm):
        assert buildup(0.02, 0.98, 0.9998, 0, mm) == pytest.approx(mm * buildup(0.02, 0.98, 0.9998, 0, 1.0))

    def test_escape_examples(self):
        assert escape_efficiency(0.36, 2.44e-4) == pytest.approx(0.99932, abs=1e-5)
        assert escape_efficiency(0.1, 0.0) == 1.0
        assert escape_efficiency(0.36, 0.36) == 0.5

    def test_escape_rejects_zero(self):
        with pytest.raises(SqzlabError):
            escape_efficiency(0.0, 0.0)

    @given(t=st.floats(0.01, 0.5), loss=st.floats(1e-6, 0.1), d=st.floats(1e-4, 0.1))
    def test_escape_monotone(self, t, loss, d):
        assert escape_efficiency(t + d, loss) > escape_efficiency(t, loss)
        assert escape_efficiency(t, loss + d) < escape_efficiency(t, loss)


class TestEigenmode:
    def test_ppktp_geometry(self):
        w = eigenmode_waist(2.6e-3, 12e-3, 12e-3, 1.816, 1550e-9)
        assert w == pytest.approx(31.8e-6, abs=0.05e-6)
        assert w == pytest.approx(kogelnik_waist(2.6e-3, 12e-3, 12e-3, 1.816, 1550e-9), rel=1e-12)

    def test_short_cavity(self):
        # oracle value; see decisions ledger for the differing quoted figure
        w = eigenmode_waist(1e-4, 12e-3, 12e-3, 1.0, 1550e-9)
        assert w == pytest.approx(kogelnik_waist(1e-4, 12e-3, 12e-3, 1.0, 1550e-9), rel=1e-10)
        assert w == pytest.approx(19.53e-6, abs=0.01e-6)

    @pytest.mark.parametrize("roc_a,roc_b", [(12e-3, 20e-3), (5e-3, 50e-3), (20e-3, 4e-3)])
    def test_asymmetric_against_closed_form(self, roc_a, roc_b):
        length = 2.6e-3
        assert eigenmode_waist(length, roc_a, roc_b, 1.8, 1550e-9) == pytest.approx(
            kogelnik_waist(length, roc_a, roc_b, 1.8, 1550e-9), rel=1e-10
        )

    @settings(max_examples=50, deadline=None)
    @given(roc_a=st.floats(3e-3, 0.1), roc_b=st.floats(3e-3, 0.1))
    def test_swap_invariance(self, roc_a, roc_b):
        w1 = eigenmode_waist(2.6e-3, roc_a, roc_b, 1.816, 1550e-9)
        w2 = eigenmode_waist(2.6e-3, roc_b, roc_a, 1.816, 1550e-9)
        assert w1 == pytest.approx(w2, rel=1e-9)

    def test_plano_concave(self):
        w = eigenmode_waist(2.6e-3, None, 12e-3, 1.0, 1550e-9)
        g = 1 - 2.6 / 12
        zr = 2.6e-3 * np.sqrt(g / (1 - g))
        assert w == pytest.approx(np.sqrt(zr * 1550e-9 / np.pi), rel=1e-10)

    def test_unstable_rejected(self):
        with pytest.raises(UnstableCavityError, match="g_a\\*g_b"):
            eigenmode_waist(2.6e-3, 1e-3, 1e-3, 1.816, 1550e-9)

    def test_planar_planar_rejected(self):
        with pytest.raises(UnstableCavityError):
            eigenmode_waist(2.6e-3, None, None, 1.0, 1550e-9)

    def test_harmonic_relation(self):
        assert harmonic_waist(33.86e-6) == pytest.approx(23.94e-6, abs=0.005e-6)
        w1 = eigenmode_waist(2.6e-3, 12e-3, 12e-3, 1.816, 1550e-9)
        w2 = eigenmode_waist(2.6e-3, 12e-3, 12e-3, 1.816, 775e-9)
        assert w2 == pytest.approx(harmonic_waist(w1), rel=1e-12)


class TestSpecs:
    def test_surface_validation(self):
        with pytest.raises(SqzlabError):
            SurfaceSpec(1.1, 0.5)
        with pytest.raises(SqzlabError):
            SurfaceSpec(0.5, 0.5, -1.0)

    def test_cavity_validation(self):
        s = SurfaceSpec(0.9, 0.9, 0.01)
        with pytest.raises(SqzlabError):
            CavitySpec(0.0, 1.8, 1.8, s, s)
        with pytest.raises(SqzlabError):
            CavitySpec(1e-3, 0.9, 1.8, s, s)
        with pytest.raises(SqzlabError):
            CavitySpec(1e-3, 1.8, 1.8, s, s, internal_round_trip_loss_1550=1.0)

    def test_analyze_ppktp(self, ppktp_config):
        figs = cavity.analyze(ppktp_config.cavity, "1550", coupler="b")
        assert figs.linewidth_fwhm == figs.fsr / figs.finesse
        assert 0 < figs.escape_efficiency <= 1
        assert figs.escape_efficiency == pytest.approx(0.99932, abs=1e-5)
        pump = cavity.analyze(ppktp_config.cavity, "775", coupler="a", mode_matching=0.5114)
        assert pump.buildup * 0.375 == pytest.approx(37.0, rel=1e-3)
