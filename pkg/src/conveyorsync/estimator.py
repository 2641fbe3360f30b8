"""Multi-pulse offset estimation: trial shifts, shot noise and null finding.

Alice adds a distinct constant ``T_k`` to her clock for each group of pulses,
so group ``k`` sees the effective offset ``true_offset - T_k``. The fringe
(classical) or dip (quantum) null therefore sits at ``T_k = true_offset``.
Counts are Poisson (classical, integrating detector) or binomial (quantum,
one pair per pulse slot), each drawn from a generator seeded by
``(seed, repetition, k)`` so any subset of repetitions can be recomputed or
run in parallel without changing a single count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .biphoton import BiphotonState, dip_asymptote, dip_scan
from .errors import GridTooCoarseError, NullSearchError
from .optics import DispersionProfile, FrequencyGrid, PulseSpectrum, fringe_scan

__all__ = [
    "ScanSchedule",
    "EstimationScenario",
    "EstimateReport",
    "observe_counts",
    "locate_null",
    "accuracy_model",
    "expected_counts",
    "run_experiment",
    "snr_of",
]

MODES = ("classical", "quantum")


@dataclass(frozen=True)
class ScanSchedule:
    """Trial shifts ``T_k`` (s, strictly increasing) and pulses sent per shift."""

    trial_shifts: tuple
    pulses_per_shift: int = 1
    seed: int = 0

    def __post_init__(self):
        shifts = np.asarray(self.trial_shifts, dtype=float)
        if shifts.ndim != 1 or shifts.size < 3:
            raise ValueError("need at least three trial shifts")
        if not np.all(np.isfinite(shifts)):
            raise ValueError("trial shifts must be finite")
        if not np.all(np.diff(shifts) > 0):
            raise ValueError("trial shifts must be strictly increasing")
        if int(self.pulses_per_shift) != self.pulses_per_shift or self.pulses_per_shift < 1:
            raise ValueError("pulses_per_shift must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "trial_shifts", tuple(float(x) for x in shifts))
        object.__setattr__(self, "pulses_per_shift", int(self.pulses_per_shift))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform(cls, start: float, stop: float, points: int, pulses_per_shift: int = 1, seed: int = 0) -> "ScanSchedule":
        return cls(tuple(np.linspace(start, stop, points)), pulses_per_shift, seed)

    @property
    def shifts(self) -> np.ndarray:
        return np.asarray(self.trial_shifts)

    @property
    def step(self) -> float:
        """Largest spacing between neighbouring trial shifts."""
        return float(np.diff(self.shifts).max())


@dataclass(frozen=True)
class EstimationScenario:
    """Ground truth and physics for one estimation experiment.

    ``spectrum`` is needed in classical mode, ``state`` in quantum mode.
    """

    true_offset: float
    drive: object
    spectrum: Optional[PulseSpectrum] = None
    state: Optional[BiphotonState] = None
    dispersion: DispersionProfile = field(default_factory=DispersionProfile)
    grid: FrequencyGrid = FrequencyGrid()

    def fringe_rate(self) -> float:
        """Angular rate of the classical fringes versus offset."""
        if self.spectrum is None:
            raise ValueError("classical mode needs a pulse spectrum")
        return abs(2 * self.drive.beta) * self.spectrum.omega0


@dataclass
class EstimateReport:
    estimated_offset: float
    true_offset: float
    rms_error: float
    snr: float
    mode: str
    predicted_accuracy: float
    bias: float
    repetitions: int
    estimates: np.ndarray
    counts_total: np.ndarray
    snr_definition: str

    @property
    def errors(self) -> np.ndarray:
        return self.estimates - self.true_offset

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "estimated_offset_s": self.estimated_offset,
            "true_offset_s": self.true_offset,
            "rms_error_s": self.rms_error,
            "bias_s": self.bias,
            "snr": self.snr,
            "snr_definition": self.snr_definition,
            "predicted_accuracy_s": self.predicted_accuracy,
            "empirical_over_predicted": self.rms_error / self.predicted_accuracy,
            "repetitions": self.repetitions,
        }


def _rng(seed: int, rep: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep, k]))


def observe_counts(mean: float, schedule: ScanSchedule, k: int, *, rep: int = 0, mode: str = "classical") -> int:
    """Shot-noise count for trial shift ``k`` of repetition ``rep``.

    Classical: ``mean`` is the expected photon number per pulse and the count
    is Poisson with mean ``pulses_per_shift * mean``. Quantum: ``mean`` is the
    coincidence probability and the count is Binomial(``pulses_per_shift``, mean).
    """
    if not mean >= 0:
        raise ValueError(f"mean must be non-negative, got {mean!r}")
    rng = _rng(schedule.seed, rep, k)
    n = schedule.pulses_per_shift
    if mode == "classical":
        return int(rng.poisson(n * mean))
    if mode == "quantum":
        if mean > 1:
            raise ValueError("coincidence probability exceeds 1")
        return int(rng.binomial(n, mean))
    raise ValueError(f"unknown mode {mode!r}")


def _observe_all(means: np.ndarray, schedule: ScanSchedule, rep: int, mode: str) -> np.ndarray:
    return np.array([observe_counts(m, schedule, k, rep=rep, mode=mode) for k, m in enumerate(means)], dtype=float)


def _vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through points ``i-1, i, i+1``; falls back to ``x[i]``."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if not a > 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def _fringe_fit(x: np.ndarray, y: np.ndarray, center: float, rate: float, window: int, iterations: int = 6):
    """Null nearest ``center`` of a fringe fitted by least squares.

    The model ``A + (C + C2 p^2) cos(p) + (S + S2 p^2) sin(p)`` with
    ``p = rate (x - center)`` is fitted to the ``2 window + 1`` samples (about
    two fringe periods) around ``center``, then re-centred on its null
    ``p0 = atan2(-S, -C)`` a few times. The ``p^2`` terms absorb the curvature
    of an envelope that is even about the null, so at the fixed point the
    envelope no longer pulls the estimate through the asymmetry of the sample
    positions. Returns ``(x0, A - sqrt(C^2 + S^2))``: the null and its depth.
    """
    step = float(np.min(np.diff(x)))
    width = 2 * window
    depth = math.inf
    for _ in range(iterations):
        i = _nearest_index(x, center)
        lo = max(0, min(i - width // 2, x.size - width - 1))
        hi = min(x.size, lo + width + 1)
        p = rate * (x[lo:hi] - center)
        cos, sin, p2 = np.cos(p), np.sin(p), p * p
        basis = np.stack([np.ones_like(p), cos, sin, p2 * cos, p2 * sin], axis=1)
        (a, c, s, _, _), *_ = np.linalg.lstsq(basis, y[lo:hi], rcond=None)
        r = math.hypot(c, s)
        depth = a - r
        if r == 0:
            break
        # a + c cos(p) + s sin(p) = a - r cos(p - p0)
        shift = math.atan2(-s, -c) / rate
        center += shift
        if abs(shift) <= 1e-9 * step:
            break
    return center, depth


def _null_depth(x: np.ndarray, y: np.ndarray, rate: float, window: int) -> np.ndarray:
    """Local fringe minimum ``A - sqrt(C^2 + S^2)`` along the scan.

    ``A + C cos(rate x) + S sin(rate x)`` is least-squares fitted to every run
    of ``window`` consecutive samples (about one fringe period). Unlike the raw
    lower envelope this does not depend on where the samples fall within a
    fringe, so neighbouring fringe orders can be told apart even when the
    envelope barely changes over one period.
    """
    window = min(max(window, 3), x.size)
    phase = rate * (x - x[0])
    basis = np.stack([np.ones_like(x), np.cos(phase), np.sin(phase)], axis=1)
    rows = np.lib.stride_tricks.sliding_window_view(basis, window, axis=0)  # (m, 3, window)
    vals = np.lib.stride_tricks.sliding_window_view(y, window)
    gram = np.einsum("mik,mjk->mij", rows, rows)
    rhs = np.einsum("mik,mk->mi", rows, vals)
    coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
    depth = coef[:, 0] - np.hypot(coef[:, 1], coef[:, 2])
    lead = (window - 1) // 2
    return np.concatenate((np.full(lead, depth[0]), depth, np.full(x.size - depth.size - lead, depth[-1])))


def _check_interior(i: int, n: int, what: str) -> None:
    if i <= 0 or i >= n - 1:
        raise NullSearchError(f"{what} lies at the edge of the trial-shift grid; widen the scan instead of extrapolating")


def _nearest_index(x: np.ndarray, value: float) -> int:
    i = int(np.clip(np.searchsorted(x, value), 1, x.size - 1))
    return i - 1 if value - x[i - 1] < x[i] - value else i


def locate_null(
    shifts: Sequence[float],
    counts: Sequence[float],
    *,
    mode: str = "classical",
    fringe_rate: Optional[float] = None,
    asymptote: Optional[float] = None,
    complement: Optional[Sequence[float]] = None,
    smoothing: int = 1,
) -> float:
    """Offset of the global null of a scanned curve.

    Classical mode needs ``fringe_rate`` (rad per second of offset). The coarse
    stage fits a cosine of known rate to every one-period run of samples,
    averages the fitted local minimum over one fringe period, and
    picks the deepest point of this envelope; the fine stage least-squares
    fits an envelope-modulated cosine to the two periods around the nearest
    fringe null,
    moves to a neighbouring fringe order while that one fits deeper, and
    returns the fitted null. Passing the complementary port's counts uses
    ``counts - complement``, whose null has the same location and twice the
    photons behind it.

    Quantum mode fits a parabola to ``log(asymptote - counts)`` around the
    (optionally smoothed) minimum, which is exact for a Gaussian dip.
    ``asymptote`` is the expected count far from the dip; without it the
    plain counts are used.
    """
    x = np.asarray(shifts, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ValueError("shifts and counts must be 1-D arrays of equal length >= 3")
    if not np.all(np.diff(x) > 0):
        raise ValueError("shifts must be strictly increasing")
    steps = np.diff(x)
    if mode == "classical":
        if fringe_rate is None or not fringe_rate > 0:
            raise ValueError("classical null search needs the fringe rate")
        period = 2 * math.pi / fringe_rate
        required = period / 4
        if steps.max() > required * (1 + 1e-12):
            raise GridTooCoarseError(float(steps.max()), required)
        if complement is not None:
            y = y - np.asarray(complement, dtype=float)
        per = max(3, int(round(period / steps.mean())))
        envelope = uniform_filter1d(_null_depth(x, y, fringe_rate, per), per, mode="nearest")
        coarse = int(np.argmin(envelope))
        _check_interior(coarse, x.size, "the envelope minimum")
        # the fringe null nearest the coarse pick, then hill-climb over fringe orders by fitted depth
        null, depth = _fringe_fit(x, y, float(x[coarse]), fringe_rate, per)
        for _ in range(x.size // per + 1):
            best = (null, depth)
            for k in (-1, 1):
                guess = null + k * period
                if x[0] < guess < x[-1]:
                    cand = _fringe_fit(x, y, guess, fringe_rate, per)
                    if cand[1] < best[1] and abs(cand[0] - guess) < period / 2:
                        best = cand
            if best[0] == null:
                break
            null, depth = best
        _check_interior(_nearest_index(x, null), x.size, "the fringe null")
        if not x[0] < null < x[-1]:
            raise NullSearchError("the fringe null lies outside the trial-shift grid; widen the scan")
        return float(null)
    if mode == "quantum":
        smoothing = max(1, int(smoothing))
        i = int(np.argmin(uniform_filter1d(y, smoothing, mode="nearest")))
        lo, hi = max(i - smoothing, 0), min(i + smoothing + 1, x.size)
        i = lo + int(np.argmin(y[lo:hi]))
        _check_interior(i, x.size, "the dip minimum")
        if asymptote is not None:
            depth = asymptote - y[i - 1:i + 2]
            if np.all(depth > 0):
                return _vertex(x[i - 1:i + 2], -np.log(depth), 1)
        return _vertex(x, y, i)
    raise ValueError(f"unknown mode {mode!r}")


def accuracy_model(mode: str, drive, source, snr: float) -> float:
    """Order-of-magnitude accuracy: ``c/(v omega0 sqrt(snr))`` or ``1/(sigma sqrt(snr))``.

    ``source`` is the :class:`PulseSpectrum` (classical) or the
    :class:`BiphotonState` (quantum). The quantum figure is the photon
    correlation-time scale; the error on the mirror offset itself is larger by
    the dip stretch factor ``~c/(4v)``, so ``empirical_over_predicted`` is only
    meaningful as a trend across SNR in that mode.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    if mode == "classical":
        return drive.c / (abs(drive.v) * source.omega0 * math.sqrt(snr))
    if mode == "quantum":
        return 1.0 / (source.sigma_q * math.sqrt(snr))
    raise ValueError(f"unknown mode {mode!r}")


def expected_counts(scenario: EstimationScenario, schedule: ScanSchedule, mode: str):
    """Per-pulse mean signal at every trial shift.

    Returns ``(cross, par)`` photon numbers in classical mode and
    ``(probability, None)`` in quantum mode.
    """
    offsets = scenario.true_offset - schedule.shifts
    if mode == "classical":
        if scenario.spectrum is None:
            raise ValueError("classical mode needs a pulse spectrum")
        _, cross, par = fringe_scan(
            scenario.spectrum, scenario.drive, scenario.dispersion, offsets, grid=scenario.grid, as_arrays=True
        )
        return np.clip(cross, 0, None), np.clip(par, 0, None)
    if mode == "quantum":
        if scenario.state is None:
            raise ValueError("quantum mode needs a bi-photon state")
        _, prob = dip_scan(scenario.state, scenario.drive, scenario.dispersion, offsets, grid=scenario.grid, as_arrays=True)
        return np.clip(prob, 0, 1), None
    raise ValueError(f"unknown mode {mode!r}")


def snr_of(scenario: EstimationScenario, schedule: ScanSchedule, mode: str, *, complement: bool = False) -> tuple[float, str]:
    """Power signal-to-noise ratio of a whole scan and its defining formula."""
    pulses = schedule.pulses_per_shift * len(schedule.trial_shifts)
    if mode == "classical":
        snr = pulses * scenario.spectrum.total_photons / 2 * (2 if complement else 1)
        text = "(signal/noise)^2 = N_pulses * J/2" + (" * 2 (both ports)" if complement else "")
        return snr, text
    p = dip_asymptote(scenario.state, scenario.drive, scenario.dispersion, grid=scenario.grid)
    return pulses * p / (1 - p), "(signal/noise)^2 = N_pairs * P_inf / (1 - P_inf)"


def run_experiment(
    scenario: EstimationScenario,
    schedule: ScanSchedule,
    mode: str,
    repetitions: int = 20,
    *,
    complement: bool = False,
    noiseless: bool = False,
    smoothing: int = 1,
) -> EstimateReport:
    """Monte-Carlo the whole scan ``repetitions`` times and score against truth."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    if complement and mode != "classical":
        raise ValueError("the complementary port is only available classically")
    cross, par = expected_counts(scenario, schedule, mode)
    n = schedule.pulses_per_shift
    kwargs = {"mode": mode, "smoothing": smoothing}
    if mode == "classical":
        kwargs["fringe_rate"] = scenario.fringe_rate()
    else:
        kwargs["asymptote"] = n * dip_asymptote(scenario.state, scenario.drive, scenario.dispersion, grid=scenario.grid)

    estimates = np.empty(repetitions)
    totals = np.empty(repetitions, dtype=np.int64)
    for rep in range(repetitions):
        if noiseless:
            y = n * cross
            comp = n * par if complement else None
        else:
            # the two ports of one repetition use disjoint seed streams
            y = _observe_all(cross, schedule, 2 * rep, mode)
            comp = _observe_all(par, schedule, 2 * rep + 1, mode) if complement else None
        estimates[rep] = locate_null(schedule.shifts, y, complement=comp, **kwargs)
        totals[rep] = int(round(y.sum() + (comp.sum() if comp is not None else 0)))

    err = estimates - scenario.true_offset
    snr, snr_text = snr_of(scenario, schedule, mode, complement=complement)
    source = scenario.spectrum if mode == "classical" else scenario.state
    return EstimateReport(
        estimated_offset=float(estimates.mean()),
        true_offset=float(scenario.true_offset),
        rms_error=float(np.sqrt(np.mean(err * err))),
        snr=float(snr),
        mode=mode,
        predicted_accuracy=accuracy_model(mode, scenario.drive, source, snr),
        bias=float(err.mean()),
        repetitions=repetitions,
        estimates=estimates,
        counts_total=totals,
        snr_definition=snr_text,
    )
