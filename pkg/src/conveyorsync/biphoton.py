"""Quantum version: frequency-entangled photon pairs and the coincidence dip.

A pair ``|omega0 + w>_{+45} |omega0 - w>_{-45}`` replaces the laser pulse and
Alice records coincidences between the two output ports. Because the pair's
frequency anticorrelation symmetrizes the dispersion, only the odd-order part
of the dispersion difference survives in the coincidence probability

    P(dt) = integral dw |phi(w)|^2 sin^2(4 v w dt / c + delta(w) / 2),
    delta(w) = [k+(w0+w) + k-(w0-w)] - [k+(w0-w) + k-(w0+w)],

with ``w`` the detuning from degeneracy. The coincidence window is taken as
infinite, which normalizes the asymptote to 1/2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .optics import DispersionProfile, FrequencyGrid, ImmunityCheck, _check_no_gain

__all__ = [
    "BiphotonState",
    "DipSample",
    "coincidence_probability",
    "dip_scan",
    "dip_asymptote",
    "quantum_cancellation_check",
    "gaussian_dip",
]

NORMALIZATION_RTOL = 1e-6


@dataclass(frozen=True)
class BiphotonState:
    """Spectral density ``|phi(w)|^2`` of a degenerate bi-photon, ``w`` = detuning.

    ``sigma_q`` is the RMS width of the Gaussian density (or the width used to
    size the quadrature grid for a tabulated one). A tabulated density must
    already integrate to one.
    """

    omega0: float
    sigma_q: float
    coincidence_window: float = math.inf
    shape: str = "gaussian"
    table_detuning: Optional[Sequence[float]] = None
    table_density: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not (self.omega0 > 0 and self.sigma_q > 0):
            raise ValueError("omega0 and sigma_q must be positive")
        if self.shape not in ("gaussian", "tabulated"):
            raise ValueError(f"unknown spectral shape {self.shape!r}")
        if self.shape == "tabulated":
            if self.table_detuning is None or self.table_density is None:
                raise ValueError("tabulated states need table_detuning and table_density")
            x = np.asarray(self.table_detuning, dtype=float)
            y = np.asarray(self.table_density, dtype=float)
            norm = float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)
            if abs(norm - 1) > 1e-3:
                raise ValueError(f"spectral density is not normalized (integral {norm:.6g})")
        if self.coincidence_window < 100 / self.sigma_q:
            warnings.warn(
                "coincidence window is not much longer than the inverse bandwidth; "
                "the infinite-window dip is only approximate",
                RuntimeWarning,
                stacklevel=2,
            )

    def density(self, detuning: np.ndarray) -> np.ndarray:
        if self.shape == "gaussian":
            z = detuning / self.sigma_q
            return np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigma_q)
        return np.interp(
            detuning,
            np.asarray(self.table_detuning, dtype=float),
            np.clip(np.asarray(self.table_density, dtype=float), 0, None),
            left=0.0,
            right=0.0,
        )

    def sampled(self, grid: FrequencyGrid):
        d, h = grid.detuning(self.sigma_q)
        density = self.density(d)
        norm = h * density.sum()
        if abs(norm - 1) > NORMALIZATION_RTOL:
            if self.shape == "gaussian":
                raise ValueError(f"spectral density integrates to {norm:.9g} on the grid")
            density = density / norm
        return d, h, density


@dataclass(frozen=True)
class DipSample:
    delta_t: float
    p_coinc: float


@dataclass
class _PreparedDip:
    x: np.ndarray
    weight: np.ndarray
    half_residual: np.ndarray
    loss_floor: float


def _prepare(state: BiphotonState, drive, dispersion: DispersionProfile, grid: FrequencyGrid) -> _PreparedDip:
    d, h, density = state.sampled(grid)
    k_plus_hi, k_minus_hi = drive.kappa(dispersion, d, state.omega0)
    k_plus_lo, k_minus_lo = drive.kappa(dispersion, -d, state.omega0)
    _check_no_gain(k_plus_hi, k_minus_hi)
    _check_no_gain(k_plus_lo, k_minus_lo)
    # both two-photon paths attenuate; the coincidence amplitude carries their geometric mean
    loss = (k_plus_hi + k_minus_lo + k_plus_lo + k_minus_hi).imag
    weight = h * density * np.exp(-loss)
    half_residual = drive.odd_residual(dispersion, d, state.omega0) / 2
    floor = float(np.sum(weight * np.sinh(half_residual.imag) ** 2))
    return _PreparedDip(-d, weight, half_residual, floor)


def dip_scan(
    state: BiphotonState,
    drive,
    dispersion: DispersionProfile,
    offsets: Sequence[float],
    *,
    grid: FrequencyGrid = FrequencyGrid(),
    backend: Optional[str] = None,
    num_threads: int = 1,
    as_arrays: bool = False,
):
    """Coincidence probability over a grid of clock offsets."""
    prep = _prepare(state, drive, dispersion, grid)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    if not np.all(np.isfinite(offsets)):
        raise ValueError("offsets must be finite")
    td = np.asarray(drive.tau_d(offsets), dtype=float)
    p = prep.half_residual.real
    s, _ = kernels.phase_sums(prep.x, np.cos(p), np.sin(p), prep.weight, td, backend=backend, num_threads=num_threads)
    prob = s + prep.loss_floor
    if as_arrays:
        return offsets, prob
    return [DipSample(float(o), float(v)) for o, v in zip(offsets, prob)]


def coincidence_probability(
    state: BiphotonState,
    drive,
    dispersion: DispersionProfile,
    delta_t: float,
    *,
    grid: FrequencyGrid = FrequencyGrid(),
) -> DipSample:
    return dip_scan(state, drive, dispersion, [delta_t], grid=grid)[0]


def dip_asymptote(state: BiphotonState, drive, dispersion: DispersionProfile, *, grid: FrequencyGrid = FrequencyGrid()) -> float:
    """Coincidence probability far from the dip (1/2 without loss)."""
    prep = _prepare(state, drive, dispersion, grid)
    return float(prep.weight.sum() / 2 + prep.loss_floor)


def quantum_cancellation_check(dispersion: DispersionProfile, tol: float = 0.0) -> ImmunityCheck:
    """Do the odd Taylor orders of the two composite dispersions agree?

    Even orders may differ freely. ``residual`` is the largest absolute odd
    coefficient difference.
    """
    plus, minus = dispersion.plus, dispersion.minus
    n = max(len(plus), len(minus))
    plus = np.array(plus + (0j,) * (n - len(plus)), dtype=complex)
    minus = np.array(minus + (0j,) * (n - len(minus)), dtype=complex)
    diff = np.abs(plus - minus)[1::2]
    residual = float(diff.max(initial=0.0))
    return ImmunityCheck(residual <= tol, residual)


def gaussian_dip(delta_t, *, sigma_q, v, c):
    """Closed-form dip ``(1/2)[1 - exp(-2 (4 v sigma_q dt / c)^2)]`` for a Gaussian density."""
    b = 4 * v * sigma_q / c * np.asarray(delta_t, dtype=float)
    return -0.5 * np.expm1(-2 * b * b)
