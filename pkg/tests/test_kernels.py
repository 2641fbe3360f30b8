"""Compiled and NumPy quadrature kernels must agree; threading must not change bits."""
import numpy as np
import pytest

from conveyorsync import kernels
from conveyorsync.optics import DelayDrive, DispersionProfile, PulseSpectrum, fringe_scan

compiled = pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled kernel not built")

C = 299_792_458.0


def inputs(n=2000, m=300, uniform=True, seed=0):
    rng = np.random.default_rng(seed)
    if uniform:
        x = 1e14 + np.linspace(-8e13, 8e13, n)
    else:
        x = 1e14 + np.sort(rng.uniform(-8e13, 8e13, n))
    phase = rng.uniform(-np.pi, np.pi, n)
    w = rng.uniform(0, 1, n)
    tau = rng.uniform(-1e-13, 1e-13, m)
    return x, np.cos(phase), np.sin(phase), w, tau


def reference(x, ur, ui, w, tau):
    arg = np.outer(tau, x) + np.arctan2(ui, ur)
    return (w * np.sin(arg) ** 2).sum(axis=1), (w * np.cos(arg) ** 2).sum(axis=1)


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
@pytest.mark.parametrize("uniform", [True, False])
def test_against_direct_evaluation(backend, uniform):
    x, ur, ui, w, tau = inputs(uniform=uniform)
    s, c = kernels.phase_sums(x, ur, ui, w, tau, backend=backend)
    rs, rc = reference(x, ur, ui, w, tau)
    scale = w.sum()
    np.testing.assert_allclose(s, rs, rtol=0, atol=1e-11 * scale)
    np.testing.assert_allclose(c, rc, rtol=0, atol=1e-11 * scale)


@compiled
def test_backends_agree_on_fringe_scan():
    spectrum = PulseSpectrum(1e14, 1e13, 1.0)
    drive = DelayDrive(1e9 * C / 8e14, C)
    offsets = np.linspace(-5e-8, 5e-8, 501)
    profile = DispersionProfile(plus_to=[0.3, 1e-14], minus_to=[0, 0, 2e-27])
    _, a, b = fringe_scan(spectrum, drive, profile, offsets, backend="compiled", as_arrays=True)
    _, c, d = fringe_scan(spectrum, drive, profile, offsets, backend="python", as_arrays=True)
    np.testing.assert_allclose(a, c, rtol=0, atol=1e-12)
    np.testing.assert_allclose(b, d, rtol=0, atol=1e-12)


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_threads_bit_identical(backend):
    x, ur, ui, w, tau = inputs(m=1000)
    one = kernels.phase_sums(x, ur, ui, w, tau, backend=backend, num_threads=1)
    four = kernels.phase_sums(x, ur, ui, w, tau, backend=backend, num_threads=4)
    np.testing.assert_array_equal(one[0], four[0])
    np.testing.assert_array_equal(one[1], four[1])


def test_scan_order_independent():
    x, ur, ui, w, tau = inputs()
    s, _ = kernels.phase_sums(x, ur, ui, w, tau)
    perm = np.random.default_rng(3).permutation(tau.size)
    s_perm, _ = kernels.phase_sums(x, ur, ui, w, tau[perm])
    np.testing.assert_array_equal(s_perm, s[perm])


def test_uniformity_detection():
    assert kernels.is_uniform(np.linspace(0, 1, 100))
    assert not kernels.is_uniform(np.r_[0.0, 0.1, 0.3, 0.4])


def test_unknown_backend():
    with pytest.raises(ValueError, match="backend"):
        kernels.phase_sums(*inputs(n=10, m=2), backend="gpu")
