"""Classical coherent-state implementation of the conveyor belt.

A vertically polarized pulse is split into its +45 and -45 degree components.
The moving delays of Alice and Bob shift them by ``-tau_D`` and ``+tau_D``,
where ``tau_D = -4 v (t0_b - t0_a) / c``. Both components also pick up the
roundtrip delay ``tau`` and a dispersion phase ``kappa(omega)``, which may be
complex (imaginary part = loss). An integrating detector behind a polarizing
beam splitter counts the horizontal photons ``J_cross``; ``J_par`` is the
complementary vertical port.

Frequencies are angular (rad/s) and times are in seconds throughout. Spectral
integrals use a uniform detuning grid around ``omega0`` with plain
rectangle weights, so time- and frequency-domain results obey discrete
Parseval exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import GridResolutionError

__all__ = [
    "DEFAULT_GRID_POINTS",
    "DEFAULT_HALF_WIDTH",
    "NONRELATIVISTIC_LIMIT",
    "PulseSpectrum",
    "DispersionProfile",
    "DelayDrive",
    "FringeSample",
    "FrequencyGrid",
    "poly_eval",
    "tau_d",
    "branch_phases",
    "photon_flux",
    "flux_trace",
    "integrated_photon_number",
    "fringe_scan",
    "ImmunityCheck",
    "dispersion_immunity_check",
    "gaussian_fringe",
    "rms_duration",
]

DEFAULT_GRID_POINTS = 2 ** 14
DEFAULT_HALF_WIDTH = 8.0
NONRELATIVISTIC_LIMIT = 0.01
NORMALIZATION_RTOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform detuning grid ``omega0 + detuning`` spanning ``+-half_width`` RMS widths."""

    points: int = DEFAULT_GRID_POINTS
    half_width: float = DEFAULT_HALF_WIDTH

    def __post_init__(self):
        if self.points < 16:
            raise ValueError("frequency grid needs at least 16 points")
        if self.half_width < DEFAULT_HALF_WIDTH:
            raise ValueError(f"band must cover at least +-{DEFAULT_HALF_WIDTH} RMS widths")

    def detuning(self, width: float) -> tuple[np.ndarray, float]:
        d = np.linspace(-self.half_width * width, self.half_width * width, self.points)
        return d, d[1] - d[0]


@dataclass(frozen=True)
class PulseSpectrum:
    """Coherent-state spectral amplitude ``alpha(omega)``.

    ``delta_omega`` is the RMS width of ``|alpha|^2``. With ``shape="gaussian"``
    the amplitude is transform limited; ``shape="tabulated"`` takes sample
    frequencies, ``|alpha|^2`` values and phases, interpolated linearly and
    rescaled so that ``2 pi * integral |alpha|^2 = total_photons``.
    """

    omega0: float
    delta_omega: float
    total_photons: float = 1.0
    shape: str = "gaussian"
    table_omega: Optional[Sequence[float]] = None
    table_power: Optional[Sequence[float]] = None
    table_phase: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.delta_omega > 0:
            raise ValueError("delta_omega must be positive")
        if not self.total_photons >= 0:
            raise ValueError("total_photons must be non-negative")
        if self.shape not in ("gaussian", "tabulated"):
            raise ValueError(f"unknown spectral shape {self.shape!r}")
        if self.shape == "tabulated" and (self.table_omega is None or self.table_power is None):
            raise ValueError("tabulated spectra need table_omega and table_power")
        if self.omega0 < 10 * self.delta_omega:
            warnings.warn("omega0 is not much larger than delta_omega", RuntimeWarning, stacklevel=2)

    def power(self, omega: np.ndarray) -> np.ndarray:
        """``|alpha(omega)|^2`` (photons per unit angular frequency, over 2 pi)."""
        if self.shape == "gaussian":
            d = (omega - self.omega0) / self.delta_omega
            return self.total_photons / (2 * np.pi) * np.exp(-0.5 * d * d) / (np.sqrt(2 * np.pi) * self.delta_omega)
        table = np.clip(np.asarray(self.table_power, dtype=float), 0, None)
        return np.interp(omega, np.asarray(self.table_omega, dtype=float), table, left=0.0, right=0.0)

    def phase(self, omega: np.ndarray) -> np.ndarray:
        if self.shape == "gaussian" or self.table_phase is None:
            return np.zeros_like(omega)
        return np.interp(omega, np.asarray(self.table_omega, dtype=float), np.asarray(self.table_phase, dtype=float))

    def sampled(self, grid: FrequencyGrid):
        """Detuning grid, step, ``|alpha|^2`` and complex ``alpha`` on the grid.

        Raises GridResolutionError when the grid loses more than 1e-9 of the
        photon number (Gaussian) or sees no power at all (tabulated).
        """
        d, h = grid.detuning(self.delta_omega)
        omega = self.omega0 + d
        power = self.power(omega)
        total = 2 * np.pi * h * power.sum()
        if self.shape == "tabulated":
            if not total > 0:
                raise GridResolutionError("tabulated spectrum has no power on the frequency grid")
            power = power * (self.total_photons / total)
        elif self.total_photons > 0 and abs(total - self.total_photons) > NORMALIZATION_RTOL * self.total_photons:
            suggested = FrequencyGrid(max(grid.points, 4 * DEFAULT_GRID_POINTS), max(grid.half_width, 10.0))
            raise GridResolutionError(
                f"grid recovers {total:.12g} of {self.total_photons:.12g} photons; "
                f"try points={suggested.points}, half_width={suggested.half_width}"
            )
        amplitude = np.sqrt(power) * np.exp(1j * self.phase(omega))
        return d, h, power, amplitude


def poly_eval(coeffs: Sequence[complex], detuning: np.ndarray) -> np.ndarray:
    """``sum_n coeffs[n] * detuning**n``, term by term.

    Powers are built by repeated multiplication so that even terms are
    bit-identical at ``+d`` and ``-d`` and odd terms flip sign exactly.
    """
    detuning = np.asarray(detuning, dtype=float)
    out = np.zeros(detuning.shape, dtype=complex)
    power = np.ones_like(detuning)
    for n, k in enumerate(coeffs):
        if n:
            power = power * detuning
        if k != 0:
            out = out + complex(k) * power
    return out


def _coeffs(values) -> tuple:
    return tuple(complex(v) for v in (values or ()))


def _add_coeffs(a, b) -> tuple:
    n = max(len(a), len(b))
    a = tuple(a) + (0j,) * (n - len(a))
    b = tuple(b) + (0j,) * (n - len(b))
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class DispersionProfile:
    """Taylor coefficients (about ``omega0``) of the four dispersion phases.

    ``plus`` is the +45 degree polarization, ``minus`` the -45 degree one;
    ``to``/``from`` are the legs towards and back from Bob. Coefficient ``n``
    multiplies ``(omega - omega0)**n`` and is in rad/(rad/s)**n. Imaginary parts
    are attenuation and must not turn into gain. ``valid_half_width`` (rad/s),
    when given, is the detuning range over which the polynomials are trusted.
    """

    plus_to: tuple = ()
    plus_from: tuple = ()
    minus_to: tuple = ()
    minus_from: tuple = ()
    valid_half_width: Optional[float] = None

    def __post_init__(self):
        for name in ("plus_to", "plus_from", "minus_to", "minus_from"):
            object.__setattr__(self, name, _coeffs(getattr(self, name)))

    @classmethod
    def none(cls) -> "DispersionProfile":
        return cls()

    @classmethod
    def common(cls, coeffs, **kwargs) -> "DispersionProfile":
        """Same phase on both polarizations, all on the outbound leg."""
        return cls(plus_to=coeffs, minus_to=coeffs, **kwargs)

    @property
    def plus(self) -> tuple:
        return _add_coeffs(self.plus_to, self.plus_from)

    @property
    def minus(self) -> tuple:
        return _add_coeffs(self.minus_to, self.minus_from)

    @property
    def max_order(self) -> int:
        return max(len(self.plus), len(self.minus), 1) - 1

    def with_common(self, coeffs) -> "DispersionProfile":
        """Add the same polynomial to the outbound leg of both polarizations."""
        return DispersionProfile(
            _add_coeffs(self.plus_to, _coeffs(coeffs)),
            self.plus_from,
            _add_coeffs(self.minus_to, _coeffs(coeffs)),
            self.minus_from,
            self.valid_half_width,
        )

    def composite(self, detuning: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return poly_eval(self.plus, detuning), poly_eval(self.minus, detuning)

    def odd_difference(self, detuning: np.ndarray) -> np.ndarray:
        """``sum over odd n of (plus_n - minus_n) * d**n``."""
        diff = _add_coeffs(self.plus, tuple(-k for k in self.minus))
        odd = tuple(k if n % 2 else 0j for n, k in enumerate(diff))
        return poly_eval(odd, detuning)


def _check_no_gain(plus: np.ndarray, minus: np.ndarray, scale: float = 0.0) -> None:
    tol = 1e-12 * max(1.0, scale)
    if plus.imag.min(initial=0.0) < -tol or minus.imag.min(initial=0.0) < -tol:
        raise ValueError("dispersion profile has negative imaginary part (gain) on the band")


@dataclass(frozen=True)
class DelayDrive:
    """Non-relativistic moving-delay drive: mirror speed ``v``, phase velocity ``c``, distance ``L``."""

    v: float
    c: float
    L: float = 0.0

    def __post_init__(self):
        if not (self.v > 0 and self.c > 0):
            raise ValueError("v and c must be positive")
        if self.v / self.c > NONRELATIVISTIC_LIMIT:
            raise ValueError(
                f"v/c = {self.v / self.c:.3g} exceeds {NONRELATIVISTIC_LIMIT}; "
                "use conveyorsync.relativity.RelativisticDrive"
            )
        if self.L < 0:
            raise ValueError("L must be non-negative")

    @property
    def beta(self) -> float:
        return -4 * self.v / self.c

    @property
    def tau(self) -> float:
        return 2 * self.L / self.c

    @property
    def fringe_rate(self) -> float:
        """Angular frequency of the fringes versus clock offset, ``8 v omega0 / c`` per unit omega0."""
        return 8 * self.v / self.c

    def tau_d(self, delta_t):
        return np.multiply(self.beta, delta_t)

    def kappa(self, profile: DispersionProfile, detuning: np.ndarray, omega0: float):
        return profile.composite(detuning)

    def odd_residual(self, profile: DispersionProfile, detuning: np.ndarray, omega0: float) -> np.ndarray:
        """Residual phase the bi-photon coincidence still sees; zero iff odd orders agree."""
        return 2 * profile.odd_difference(detuning)


def tau_d(drive, delta_t):
    """Differential delay ``-4 v delta_t / c`` between the two polarizations."""
    if drive.v / drive.c > NONRELATIVISTIC_LIMIT:
        raise ValueError("v/c too large for the first-order delay; use relativity.tau_d_rel")
    return drive.tau_d(delta_t)


@dataclass(frozen=True)
class FringeSample:
    delta_t: float
    j_cross: float
    j_par: float


def branch_phases(spectrum: PulseSpectrum, drive, dispersion: DispersionProfile, delta_t: float, omega):
    """Complex phases of the +45 and -45 degree branches at ``omega``."""
    omega = np.asarray(omega, dtype=float)
    d = omega - spectrum.omega0
    k_plus, k_minus = drive.kappa(dispersion, d, spectrum.omega0)
    td = drive.tau_d(delta_t)
    phi_plus = -omega * td + omega * drive.tau + k_plus
    phi_minus = omega * td + omega * drive.tau + k_minus
    return phi_plus, phi_minus


@dataclass
class _Prepared:
    """Frequency-domain ingredients shared by all offsets of one scan."""

    d: np.ndarray
    h: float
    omega: np.ndarray
    power: np.ndarray
    amplitude: np.ndarray
    k_plus: np.ndarray
    k_minus: np.ndarray
    weight: np.ndarray = field(init=False)
    half_diff: np.ndarray = field(init=False)
    loss_floor: float = field(init=False)

    def __post_init__(self):
        # |e^{i phi+} -+ e^{i phi-}|^2 / 4 = e^{-Im S} * (sin^2|cos^2)(Re D/2) + e^{-Im S} sinh^2(Im D/2)
        attenuation = np.exp(-(self.k_plus.imag + self.k_minus.imag))
        self.weight = 2 * np.pi * self.h * self.power * attenuation
        self.half_diff = (self.k_minus - self.k_plus) / 2
        self.loss_floor = float(np.sum(self.weight * np.sinh(self.half_diff.imag) ** 2))


def _prepare(spectrum, drive, dispersion, grid) -> _Prepared:
    d, h, power, amplitude = spectrum.sampled(grid)
    k_plus, k_minus = drive.kappa(dispersion, d, spectrum.omega0)
    _check_no_gain(k_plus, k_minus)
    return _Prepared(d, h, spectrum.omega0 + d, power, amplitude, k_plus, k_minus)


def _scan(prep: _Prepared, drive, offsets, backend=None, num_threads=1):
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    if not np.all(np.isfinite(offsets)):
        raise ValueError("offsets must be finite")
    td = np.asarray(drive.tau_d(offsets), dtype=float)
    p = prep.half_diff.real
    s, c = kernels.phase_sums(
        prep.omega, np.cos(p), np.sin(p), prep.weight, td, backend=backend, num_threads=num_threads
    )
    return s + prep.loss_floor, c + prep.loss_floor


def integrated_photon_number(
    spectrum: PulseSpectrum,
    drive,
    dispersion: DispersionProfile,
    delta_t: float,
    *,
    grid: FrequencyGrid = FrequencyGrid(),
) -> FringeSample:
    """Mean photon numbers at the two detectors for one clock offset.

    Time integration of the flux is done analytically: it leaves a frequency
    integral in which only the dispersion *difference* survives.
    """
    prep = _prepare(spectrum, drive, dispersion, grid)
    s, c = _scan(prep, drive, [delta_t])
    return FringeSample(float(delta_t), float(s[0]), float(c[0]))


def fringe_scan(
    spectrum: PulseSpectrum,
    drive,
    dispersion: DispersionProfile,
    offsets: Sequence[float],
    *,
    grid: FrequencyGrid = FrequencyGrid(),
    backend: Optional[str] = None,
    num_threads: int = 1,
    as_arrays: bool = False,
):
    """``integrated_photon_number`` over many offsets.

    Offsets are independent; threading does not change any result bit.
    With ``as_arrays`` returns ``(offsets, j_cross, j_par)`` arrays instead of
    a list of :class:`FringeSample`.
    """
    prep = _prepare(spectrum, drive, dispersion, grid)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    s, c = _scan(prep, drive, offsets, backend=backend, num_threads=num_threads)
    if as_arrays:
        return offsets, s, c
    return [FringeSample(float(o), float(a), float(b)) for o, a, b in zip(offsets, s, c)]


def _field_spectrum(prep: _Prepared, drive, delta_t: float) -> np.ndarray:
    """Cross-port field amplitude per frequency, without the roundtrip carrier."""
    td = drive.tau_d(delta_t)
    half_d = prep.omega * td + prep.half_diff
    half_s = (prep.k_plus + prep.k_minus) / 2
    return -1j * prep.amplitude * np.exp(1j * half_s) * np.sin(half_d)


def photon_flux(
    spectrum: PulseSpectrum,
    drive,
    dispersion: DispersionProfile,
    delta_t: float,
    t,
    *,
    grid: FrequencyGrid = FrequencyGrid(),
) -> np.ndarray:
    """Mean photon flux ``I_cross(t)`` (photons/s) at the horizontal detector.

    Direct Fourier synthesis at arbitrary times ``t``; use :func:`flux_trace`
    for a full uniformly sampled trace.
    """
    prep = _prepare(spectrum, drive, dispersion, grid)
    beta = _field_spectrum(prep, drive, delta_t) * prep.h
    t = np.asarray(t, dtype=float)
    rel = np.atleast_1d(t - drive.tau).ravel()
    out = np.empty(rel.size)
    rows = max(1, (1 << 21) // prep.d.size)
    for start in range(0, rel.size, rows):
        phase = np.exp(-1j * np.outer(rel[start:start + rows], prep.d))
        out[start:start + rows] = np.abs(phase @ beta) ** 2
    return out.reshape(t.shape) if t.ndim else float(out[0])


def flux_trace(
    spectrum: PulseSpectrum,
    drive,
    dispersion: DispersionProfile,
    delta_t: float,
    *,
    grid: FrequencyGrid = FrequencyGrid(),
    port: str = "cross",
):
    """``(t, I(t))`` on the FFT time grid centred on the roundtrip delay.

    The window spans ``2 pi / step`` of the frequency grid. ``port="par"``
    gives the vertical detector instead.
    """
    prep = _prepare(spectrum, drive, dispersion, grid)
    if port == "cross":
        beta = _field_spectrum(prep, drive, delta_t)
    elif port == "par":
        td = drive.tau_d(delta_t)
        half_d = prep.omega * td + prep.half_diff
        beta = prep.amplitude * np.exp(1j * (prep.k_plus + prep.k_minus) / 2) * np.cos(half_d)
    else:
        raise ValueError("port must be 'cross' or 'par'")
    n = prep.d.size
    dt = 2 * np.pi / (n * prep.h)
    # index m of the DFT is the time tau + m*dt; the detuning origin only adds a unit phase
    field_t = np.fft.fftshift(np.fft.fft(beta * prep.h))
    m = np.arange(n) - n // 2
    return drive.tau + m * dt, np.abs(field_t) ** 2


def rms_duration(t: np.ndarray, flux: np.ndarray) -> float:
    """RMS width of a sampled intensity trace."""
    total = flux.sum()
    mean = np.sum(t * flux) / total
    return float(np.sqrt(np.sum((t - mean) ** 2 * flux) / total))


@dataclass(frozen=True)
class ImmunityCheck:
    passed: bool
    residual: float

    def __bool__(self):
        return self.passed


def dispersion_immunity_check(dispersion: DispersionProfile, tol: float = 0.0) -> ImmunityCheck:
    """Do both polarizations see the same (complex) roundtrip dispersion?

    Compared coefficient-wise on the composite polynomials; ``residual`` is the
    largest absolute coefficient difference.
    """
    plus, minus = dispersion.plus, dispersion.minus
    n = max(len(plus), len(minus))
    plus = np.array(plus + (0j,) * (n - len(plus)), dtype=complex)
    minus = np.array(minus + (0j,) * (n - len(minus)), dtype=complex)
    residual = float(np.max(np.abs(plus - minus), initial=0.0))
    return ImmunityCheck(residual <= tol, residual)


def gaussian_fringe(delta_t, *, total_photons, omega0, delta_omega, v, c):
    """Closed form of ``J_cross`` for a Gaussian spectrum without dispersion.

    ``(J/2) [1 - cos(8 v omega0 dt / c) exp(-2 (4 v delta_omega dt / c)^2)]``,
    arranged without cancellation near the null.
    """
    delta_t = np.asarray(delta_t, dtype=float)
    a = 8 * v * omega0 / c * delta_t
    b = 4 * v * delta_omega / c * delta_t
    envelope = np.exp(-2 * b * b)
    # 1 - cos(a) e = (1 - e) + e (1 - cos a) = -expm1(-2b^2) + 2 e sin^2(a/2)
    return total_photons / 2 * (-np.expm1(-2 * b * b) + 2 * envelope * np.sin(a / 2) ** 2)
