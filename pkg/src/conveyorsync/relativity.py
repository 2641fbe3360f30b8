"""Exact-in-v/c versions of the delay, roundtrip time and dispersion arguments.

Only three things change when the mirror speed is not small against ``c``:
the differential delay gains a ``1 / (1 - (v/c)^2)`` factor, the roundtrip
delay a ``(1 + (v/c)^2) / (1 - (v/c)^2)`` factor, and each dispersion polynomial
is evaluated at a Doppler-scaled frequency (``omega / chi`` or ``omega * chi``
with ``chi = (1 + v/c) / (1 - v/c)``). Polynomials are evaluated at the scaled
frequency directly, never re-expanded about ``omega0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .optics import DispersionProfile, poly_eval

__all__ = ["RelativisticDrive", "tau_d_rel", "tau_rel", "kappa_rel"]


@dataclass(frozen=True)
class RelativisticDrive:
    """Moving-delay drive valid for any ``|v| < c``.

    Drop-in replacement for :class:`~conveyorsync.optics.DelayDrive` in the
    fringe and dip computations.
    """

    v: float
    c: float
    L: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not abs(self.v) < self.c:
            raise ValueError(f"|v| must be below c (v/c = {self.v / self.c:.6g})")
        if self.L < 0:
            raise ValueError("L must be non-negative")

    @property
    def ratio(self) -> float:
        return self.v / self.c

    @property
    def chi(self) -> float:
        return (1 + self.ratio) / (1 - self.ratio)

    @property
    def beta(self) -> float:
        b = self.ratio
        return -4 * b / (1 - b * b)

    @property
    def tau(self) -> float:
        b2 = self.ratio ** 2
        return 2 * self.L / self.c * (1 + b2) / (1 - b2)

    def tau_d(self, delta_t):
        return np.multiply(self.beta, delta_t)

    def scaled_detuning(self, detuning, omega0: float):
        """Detunings of ``omega / chi`` and ``omega * chi`` from ``omega0``.

        Written with ``chi - 1 = 2 b / (1 - b)`` so nothing cancels for small ``b``.
        """
        b = self.ratio
        detuning = np.asarray(detuning, dtype=float)
        down = detuning / self.chi - omega0 * (2 * b / (1 + b))
        up = detuning * self.chi + omega0 * (2 * b / (1 - b))
        return down, up

    def kappa(self, profile: DispersionProfile, detuning, omega0: float):
        down, up = self.scaled_detuning(detuning, omega0)
        if profile.valid_half_width is not None:
            reach = max(np.abs(down).max(initial=0.0), np.abs(up).max(initial=0.0))
            if reach > profile.valid_half_width:
                warnings.warn(
                    "Doppler-scaled frequencies leave the dispersion polynomials' validity band",
                    RuntimeWarning,
                    stacklevel=3,
                )
        plus = poly_eval(profile.plus_to, down) + poly_eval(profile.plus_from, up)
        minus = poly_eval(profile.minus_to, up) + poly_eval(profile.minus_from, down)
        return plus, minus

    def odd_residual(self, profile: DispersionProfile, detuning, omega0: float):
        detuning = np.asarray(detuning, dtype=float)
        plus_hi, minus_hi = self.kappa(profile, detuning, omega0)
        plus_lo, minus_lo = self.kappa(profile, -detuning, omega0)
        return (plus_hi + minus_lo) - (plus_lo + minus_hi)


def tau_d_rel(drive: RelativisticDrive, delta_t):
    """Differential delay ``-(4 v/c) / (1 - (v/c)^2) * delta_t``."""
    return drive.tau_d(delta_t)


def tau_rel(drive: RelativisticDrive) -> float:
    """Roundtrip delay ``(2L/c) (1 + (v/c)^2) / (1 - (v/c)^2)``."""
    return drive.tau


def kappa_rel(profile: DispersionProfile, drive: RelativisticDrive, omega, *, omega0: float):
    """Composite +45/-45 degree dispersion at absolute frequency ``omega``.

    ``omega0`` is the frequency the profile's Taylor coefficients refer to.
    """
    return drive.kappa(profile, np.asarray(omega, dtype=float) - omega0, omega0)
