"""Bi-photon coincidence dip and the relaxed (odd-order) cancellation condition."""
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conveyorsync.biphoton import (
    BiphotonState,
    coincidence_probability,
    dip_asymptote,
    dip_scan,
    gaussian_dip,
    quantum_cancellation_check,
)
from conveyorsync.optics import DelayDrive, DispersionProfile, FrequencyGrid, PulseSpectrum, dispersion_immunity_check, fringe_scan

C = 299_792_458.0
OMEGA0, SIGMA = 1e14, 1e13
V = 1e-6 * C
WIDTH = C / (4 * V * SIGMA)  # dip 1/e^2 half-width


@pytest.fixture
def state():
    return BiphotonState(OMEGA0, SIGMA)


@pytest.fixture
def drive():
    return DelayDrive(V, C)


def direct_dip(delta_t, sigma, v, c):
    """P(dt) by adaptive quadrature of the Gaussian density times sin^2."""

    def integrand(w):
        return math.exp(-0.5 * (w / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma) * math.sin(4 * v * w * delta_t / c) ** 2

    val, _ = integrate.quad(integrand, -12 * sigma, 12 * sigma, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


class TestDip:
    def test_null_at_zero(self, state, drive):
        assert coincidence_probability(state, drive, DispersionProfile.none(), 0.0).p_coinc == 0.0

    def test_closed_form(self, state, drive):
        offsets = np.concatenate([np.linspace(-4, 4, 161) * WIDTH, [1e-3 * WIDTH, 1e-6 * WIDTH]])
        _, p = dip_scan(state, drive, DispersionProfile.none(), offsets, as_arrays=True)
        ref = gaussian_dip(offsets, sigma_q=SIGMA, v=V, c=C)
        mask = ref > 0
        np.testing.assert_allclose(p[mask], ref[mask], rtol=1e-10)

    @pytest.mark.parametrize("x", [0.05, 0.4, 1.0, 2.5])
    def test_closed_form_against_adaptive_quadrature(self, x):
        ref = direct_dip(x * WIDTH, SIGMA, V, C)
        assert gaussian_dip(x * WIDTH, sigma_q=SIGMA, v=V, c=C) == pytest.approx(ref, rel=1e-9)

    def test_width(self):
        assert gaussian_dip(WIDTH, sigma_q=SIGMA, v=V, c=C) == pytest.approx(0.5 * (1 - math.exp(-2)), rel=1e-14)

    def test_bounded_and_asymptote(self, state, drive):
        offsets = np.linspace(-20, 20, 2001) * WIDTH
        _, p = dip_scan(state, drive, DispersionProfile.none(), offsets, as_arrays=True)
        assert np.all(p >= 0) and np.all(p <= 0.5 + 1e-9)
        far = np.abs(offsets) > 10 * WIDTH
        np.testing.assert_allclose(p[far], 0.5, rtol=1e-9)
        assert dip_asymptote(state, drive, DispersionProfile.none()) == pytest.approx(0.5, rel=1e-12)
        assert offsets[np.argmin(p)] == 0.0

    def test_even(self, state, drive):
        offsets = np.linspace(0.01, 3, 100) * WIDTH
        profile = DispersionProfile(plus_to=[0.2, 1e-13, 5e-26], minus_to=[0.0, 1e-13, -2e-26])
        _, a = dip_scan(state, drive, profile, offsets, as_arrays=True)
        _, b = dip_scan(state, drive, profile, -offsets, as_arrays=True)
        np.testing.assert_array_equal(a, b)

    def test_no_carrier_fringes(self, state, drive):
        # sample finely enough to see the 8 v omega0 / c carrier if it were there
        rate = 8 * V * OMEGA0 / C
        offsets = np.linspace(-6, 6, 4096) * WIDTH
        _, p = dip_scan(state, drive, DispersionProfile.none(), offsets, as_arrays=True)
        spectrum = np.abs(np.fft.rfft(p - p.mean()))
        freq = 2 * np.pi * np.fft.rfftfreq(offsets.size, offsets[1] - offsets[0])
        assert freq[-1] > 2 * rate
        band = np.abs(freq - rate) < 0.1 * rate
        assert spectrum[band].max() < 1e-9 * spectrum.max()

    def test_samples(self, state, drive):
        samples = dip_scan(state, drive, DispersionProfile.none(), [0.0, WIDTH])
        assert [s.delta_t for s in samples] == [0.0, WIDTH]

    def test_non_finite_offsets(self, state, drive):
        with pytest.raises(ValueError, match="finite"):
            dip_scan(state, drive, DispersionProfile.none(), [math.inf])

    def test_odd_mismatch_shifts_null(self, state, drive):
        dk1 = 2e-14
        profile = DispersionProfile(plus_to=[0, dk1])
        assert not quantum_cancellation_check(profile)
        expected = -dk1 * C / (4 * V)
        offsets = expected + np.linspace(-1, 1, 2001) * 0.05 * WIDTH
        _, p = dip_scan(state, drive, profile, offsets, as_arrays=True)
        assert offsets[np.argmin(p)] == pytest.approx(expected, abs=offsets[1] - offsets[0])
        assert p.min() < 1e-12

    def test_loss_lowers_asymptote(self, state, drive):
        profile = DispersionProfile.common([0.1j])
        assert dip_asymptote(state, drive, profile) == pytest.approx(0.5 * math.exp(-0.4), rel=1e-12)


class TestCancellation:
    def test_even_only_difference_passes(self):
        check = quantum_cancellation_check(DispersionProfile(plus_to=[0.3, 1e-13, 4e-26], minus_to=[0, 1e-13, -7e-26]))
        assert check.passed and check.residual == 0.0

    def test_linear_difference_fails(self):
        check = quantum_cancellation_check(DispersionProfile(plus_to=[0, 1e-13]))
        assert not check and check.residual == pytest.approx(1e-13)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=6))
    def test_classical_immunity_implies_quantum(self, coeffs):
        profile = DispersionProfile.common(coeffs)
        assert dispersion_immunity_check(profile)
        assert quantum_cancellation_check(profile)

    @settings(max_examples=10, deadline=None)
    @given(k0=st.floats(0.1, 3), k2=st.floats(1, 20), k4=st.floats(-0.5, 0.5))
    def test_even_difference_leaves_dip_and_spoils_fringe(self, k0, k2, k4):
        state, drive = BiphotonState(OMEGA0, SIGMA), DelayDrive(V, C)
        profile = DispersionProfile(plus_to=[k0, 0, k2 / SIGMA ** 2, 0, k4 / SIGMA ** 4])
        offsets = np.linspace(-3, 3, 121) * WIDTH
        _, ref = dip_scan(state, drive, DispersionProfile.none(), offsets, as_arrays=True)
        _, got = dip_scan(state, drive, profile, offsets, as_arrays=True)
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=0)
        spectrum = PulseSpectrum(OMEGA0, SIGMA, 1.0)
        _, cross, _ = fringe_scan(spectrum, drive, profile, [0.0], as_arrays=True)
        assert cross[0] > 1e-3


class TestState:
    def test_unnormalized_table(self):
        w = np.linspace(-5, 5, 201) * SIGMA
        with pytest.raises(ValueError, match="normalized"):
            BiphotonState(OMEGA0, SIGMA, shape="tabulated", table_detuning=w, table_density=np.ones_like(w))

    def test_tabulated_gaussian(self, drive):
        w = np.linspace(-9, 9, 3001) * SIGMA
        dens = np.exp(-0.5 * (w / SIGMA) ** 2) / (math.sqrt(2 * math.pi) * SIGMA)
        state = BiphotonState(OMEGA0, SIGMA, shape="tabulated", table_detuning=w, table_density=dens)
        offsets = np.linspace(-3, 3, 61) * WIDTH
        _, p = dip_scan(state, drive, DispersionProfile.none(), offsets, as_arrays=True)
        np.testing.assert_allclose(p, gaussian_dip(offsets, sigma_q=SIGMA, v=V, c=C), rtol=1e-4, atol=1e-9)

    def test_short_window_warns(self):
        with pytest.warns(RuntimeWarning, match="coincidence window"):
            BiphotonState(OMEGA0, SIGMA, coincidence_window=10 / SIGMA)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            BiphotonState(OMEGA0, SIGMA, coincidence_window=1000 / SIGMA)

    def test_invalid(self):
        with pytest.raises(ValueError):
            BiphotonState(OMEGA0, 0.0)
        with pytest.raises(ValueError):
            BiphotonState(OMEGA0, SIGMA, shape="lorentzian")
        with pytest.raises(ValueError, match="table"):
            BiphotonState(OMEGA0, SIGMA, shape="tabulated")

    def test_density_normalized(self, state):
        _, h, density = state.sampled(FrequencyGrid())
        assert h * density.sum() == pytest.approx(1.0, rel=1e-12)
