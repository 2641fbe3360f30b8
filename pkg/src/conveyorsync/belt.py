"""Abstract conveyor-belt synchronization protocol.

Alice pours sand onto a moving belt at points A and A' at a level proportional
to her clock reading, Bob removes sand at B proportionally to his. After the
transient, the amount of sand arriving at D (just past A') encodes the clock
offset. The "sand" is any signed signal quantity, so negative amounts are fine.

Every quantity here is accumulated in exact rational arithmetic and rounded to
float once on return. Identities such as ``Q_D1 + Q_D2 == 2 s (t0_b - t0_a)``
therefore hold bit-for-bit, not just to rounding.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvergenceError

__all__ = [
    "ClockPair",
    "BeltScenario",
    "BeltState",
    "RangingReading",
    "DifferentialReading",
    "FeedbackResult",
    "TrackingResult",
    "RampSchedule",
    "transient_end",
    "belt_state",
    "steady_state_q_d",
    "simulate_q_d",
    "ranging_q_d",
    "differential_q_d",
    "rate_mismatch_q_d",
    "rate_feedback",
    "track_rate",
    "periodic_ramp_schedule",
    "ramp_readout",
]

Level = Callable[[Fraction], Fraction]


def _q(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r}")
    return Fraction(value)


@dataclass(frozen=True)
class ClockPair:
    """Ground-truth clock offsets against the external reference time.

    A party whose offset is ``t0`` reads ``t - t0`` at external time ``t``.
    ``rate_b`` scales Bob's proportionality constant (s' = s * rate_b) and
    ``drift_b`` lets that multiplier drift linearly in external time.
    """

    t0_a: float
    t0_b: float
    rate_b: float = 1.0
    drift_b: float = 0.0

    def __post_init__(self):
        if not self.rate_b > 0:
            raise ValueError(f"rate_b must be positive, got {self.rate_b}")

    @property
    def offset(self) -> float:
        return float(_q(self.t0_b) - _q(self.t0_a))

    @property
    def perfect(self) -> bool:
        return self.rate_b == 1 and self.drift_b == 0


@dataclass(frozen=True)
class BeltScenario:
    """Belt geometry and the sand-rate constant ``s``.

    ``T`` is the A -> B transit time, ``T_prime`` the B -> A' transit time
    (defaults to ``T``); ``belt_speed`` is only needed to convert transit time
    into distance.
    """

    s: float
    T: float
    T_prime: Optional[float] = None
    belt_speed: Optional[float] = None

    def __post_init__(self):
        if self.T_prime is None:
            object.__setattr__(self, "T_prime", self.T)
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")
        if not (self.T >= 0 and self.T_prime >= 0):
            raise ValueError("transit times must be non-negative")

    @property
    def symmetric(self) -> bool:
        return self.T == self.T_prime

    def swapped(self) -> "BeltScenario":
        """The counter-propagating belt: transit legs exchanged."""
        return BeltScenario(self.s, self.T_prime, self.T, self.belt_speed)


def _linear_level(s: Fraction) -> Level:
    def level(reading: Fraction) -> Fraction:
        return s * reading if reading >= 0 else Fraction(0)

    return level


def _bob_constant(s: Fraction, clocks: ClockPair, when: Fraction) -> Fraction:
    return s * (_q(clocks.rate_b) + _q(clocks.drift_b) * when)


def _levels(scenario, level, s_alice=None):
    """Alice's level function and Bob's level at unit rate multiplier."""
    if level is not None:
        return level, level
    s0 = _q(scenario.s)
    return _linear_level(_q(s_alice) if s_alice is not None else s0), _linear_level(s0)


def _q_d_exact(scenario, clocks, t, *, s_alice=None, level=None, ranging=False):
    """Sand at D at external time ``t``, exactly.

    Three contributions pass D at time ``t``: Alice's deposit at A made at
    ``t - T - T'``, Bob's removal at B made at ``t - T'``, and Alice's deposit
    at A' made at ``t``. Each is zero before its party's start time.
    """
    t = _q(t)
    T, Tp = _q(scenario.T), _q(scenario.T_prime)
    t0a, t0b = _q(clocks.t0_a), _q(clocks.t0_b)
    alice, bob = _levels(scenario, level, s_alice)
    at_a = alice(t - T - Tp - t0a) / 2
    at_a_prime = alice(t - t0a) / 2
    if ranging:
        return at_a - at_a_prime
    when_b = t - Tp
    at_b = _bob_constant(Fraction(1), clocks, when_b) * bob(when_b - t0b)
    return at_a - at_b + at_a_prime


def _transient_end(scenario: BeltScenario, clocks: ClockPair) -> Fraction:
    T, Tp = _q(scenario.T), _q(scenario.T_prime)
    return T + Tp + max(_q(clocks.t0_a), _q(clocks.t0_b))


def _round_up(value: Fraction) -> float:
    out = float(value)
    return math.nextafter(out, math.inf) if out < value else out


def transient_end(scenario: BeltScenario, clocks: ClockPair) -> float:
    """External time after which all three contributions at D are active.

    Alice's oldest deposit needs ``t >= T + T' + t0_a``; Bob's removal needs
    ``t >= T' + t0_b``, which the bound below also covers. Rounded upwards, so
    any ``t >= transient_end(...)`` is post-transient.
    """
    return _round_up(_transient_end(scenario, clocks))


@dataclass(frozen=True)
class BeltState:
    """Snapshot of the belt at external time ``t``.

    Positions are measured as transit time from A: B sits at ``T`` and
    A'/D at ``T + T'``. The sand level is piecewise linear in position with
    kinks where a party's start time is being carried past.
    """

    scenario: BeltScenario
    clocks: ClockPair
    t: float
    level_fn: Optional[Level] = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return float(_q(self.scenario.T) + _q(self.scenario.T_prime))

    def level(self, position) -> float:
        """Sand carried at ``position`` (just downstream of any action there)."""
        u = _q(position)
        T, Tp = _q(self.scenario.T), _q(self.scenario.T_prime)
        if u < 0 or u > T + Tp:
            raise ValueError(f"position {float(u)} outside belt [0, {self.length}]")
        t = _q(self.t)
        t0a, t0b = _q(self.clocks.t0_a), _q(self.clocks.t0_b)
        alice, bob = _levels(self.scenario, self.level_fn)
        total = alice(t - u - t0a) / 2
        if u >= T:
            when_b = t - (u - T)
            total -= _bob_constant(Fraction(1), self.clocks, when_b) * bob(when_b - t0b)
        if u == T + Tp:
            total += alice(t - t0a) / 2
        return float(total)

    def breakpoints(self) -> list[float]:
        """Positions where the level profile has a kink."""
        T, Tp = _q(self.scenario.T), _q(self.scenario.T_prime)
        t = _q(self.t)
        t0a, t0b = _q(self.clocks.t0_a), _q(self.clocks.t0_b)
        points = {Fraction(0), T, T + Tp}
        start_a = t - t0a
        if 0 <= start_a <= T + Tp:
            points.add(start_a)
        start_b = T + (t - t0b)
        if T <= start_b <= T + Tp:
            points.add(start_b)
        return [float(p) for p in sorted(points)]

    @property
    def q_d(self) -> float:
        return self.level(self.length)


def belt_state(scenario: BeltScenario, clocks: ClockPair, t: float, schedule=None) -> BeltState:
    return BeltState(scenario, clocks, t, _schedule_level(schedule))


def steady_state_q_d(scenario: BeltScenario, clocks: ClockPair) -> float:
    """Post-transient sand at D for perfect clocks: ``s (t0_b - t0_a)``."""
    if not clocks.perfect:
        raise ValueError("steady_state_q_d needs rate_b == 1 and drift_b == 0; use rate_mismatch_q_d")
    if not scenario.symmetric:
        raise ValueError("steady_state_q_d needs T_prime == T; use differential_q_d")
    return float(_q(scenario.s) * (_q(clocks.t0_b) - _q(clocks.t0_a)))


def simulate_q_d(scenario: BeltScenario, clocks: ClockPair, t: float, schedule=None) -> float:
    """Time-resolved sand at D, including the start-up transient.

    ``schedule`` replaces the linear level ``s * reading`` by a
    :class:`RampSchedule`; Bob's constant is still scaled by ``rate_b``.
    """
    return float(_q_d_exact(scenario, clocks, t, level=_schedule_level(schedule)))


@dataclass(frozen=True)
class RangingReading:
    q_d: float
    transit_time: float
    distance: Optional[float]


def ranging_q_d(scenario: BeltScenario, clocks: ClockPair) -> RangingReading:
    """Ranging variant: Alice adds at A and removes at A', Bob is idle.

    The steady value is ``-s (T + T') / 2`` (``-s T`` on a symmetric belt), so
    the one-way transit time and distance follow without any clock reading.
    """
    t = _q(scenario.T) + _q(scenario.T_prime) + max(_q(clocks.t0_a), Fraction(0))
    q = _q_d_exact(scenario, clocks, t, ranging=True)
    transit = -q / _q(scenario.s)
    distance = None
    if scenario.belt_speed is not None:
        distance = float(_q(scenario.belt_speed) * transit)
    return RangingReading(float(q), float(transit), distance)


@dataclass(frozen=True)
class DifferentialReading:
    q_d1: float
    q_d2: float
    total: float

    @property
    def offset_times_s(self) -> float:
        """Half the sum, ``s (t0_b - t0_a)``."""
        return self.total / 2


def differential_q_d(scenario: BeltScenario, clocks: ClockPair) -> DifferentialReading:
    """Two counter-propagating belts; their sum cancels the T/T' asymmetry."""
    t = _transient_end(scenario, clocks)
    q1 = _q_d_exact(scenario, clocks, t)
    q2 = _q_d_exact(scenario.swapped(), clocks, t)
    return DifferentialReading(float(q1), float(q2), float(q1 + q2))


def rate_mismatch_q_d(scenario: BeltScenario, clocks: ClockPair, t: float) -> float:
    """Post-transient sand at D when Bob's constant is ``s' = s * rate_b``.

    Equals ``(s - s')(t - T) + s' t0_b - s t0_a``; the t-dependent part is what
    a rate-feedback loop nulls.
    """
    if clocks.drift_b != 0:
        raise ValueError("rate_mismatch_q_d assumes drift-free clocks; use simulate_q_d")
    if not scenario.symmetric:
        raise ValueError("rate_mismatch_q_d needs T_prime == T")
    s = _q(scenario.s)
    sp = s * _q(clocks.rate_b)
    return float((s - sp) * (_q(t) - _q(scenario.T)) + sp * _q(clocks.t0_b) - s * _q(clocks.t0_a))


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """OLS slope and intercept at x = 0, fitted on centered abscissae."""
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return slope, float(ym - slope * xm)


@dataclass(frozen=True)
class FeedbackResult:
    """Outcome of the rate-feedback loop.

    ``residual_constant`` is the intercept of the first fit, ``s' t0_b - s t0_a``
    with Alice's initial constant. ``offset`` is the clock offset read from
    the converged (rate-matched) intercept.
    """

    rate_ratio: float
    alice_constant: float
    residual_constant: float
    offset: float
    iterations: int
    slopes: tuple


def rate_feedback(
    scenario: BeltScenario,
    clocks: ClockPair,
    times: Sequence[float],
    *,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> FeedbackResult:
    """Adjust Alice's constant until Q_D stops changing with time.

    Each iteration samples Q_D at ``times``, fits ``Q = m (t - T) + C`` and
    subtracts the slope ``m`` from Alice's constant. Stops once
    ``|m| <= tol * s``.
    """
    times = np.asarray(times, dtype=float)
    if np.unique(times).size < 2:
        raise ValueError("need at least two distinct sample times")
    start = transient_end(scenario, clocks)
    if times.min() < start:
        raise ValueError(f"sample times must be post-transient (>= {start})")
    s0 = _q(scenario.s)
    T = float(scenario.T)
    s_alice = s0
    slopes = []
    residual = None
    for iteration in range(1, max_iter + 1):
        samples = np.array([float(_q_d_exact(scenario, clocks, t, s_alice=s_alice)) for t in times])
        slope, intercept = _fit_line(times - T, samples)
        slopes.append(slope)
        if residual is None:
            residual = intercept
        if abs(slope) <= tol * float(s0):
            return FeedbackResult(
                rate_ratio=float(s_alice / s0),
                alice_constant=float(s_alice),
                residual_constant=residual,
                offset=intercept / float(s_alice),
                iterations=iteration,
                slopes=tuple(slopes),
            )
        s_alice = s_alice - _q(slope)
    raise ConvergenceError(
        f"rate feedback did not converge in {max_iter} iterations (last slope {slopes[-1]:.3e})",
        last_value=slopes[-1],
    )


@dataclass(frozen=True)
class TrackingResult:
    window_centers: np.ndarray
    slopes: np.ndarray
    alice_constants: np.ndarray


def track_rate(
    scenario: BeltScenario,
    clocks: ClockPair,
    first_window: float,
    window_length: float,
    windows: int,
    samples_per_window: int = 8,
) -> TrackingResult:
    """Per-window feedback for a slowly drifting Bob rate.

    Each window is fitted once and its slope removed from Alice's constant
    before the next window. With drift the residual slope per window is
    about ``2 s drift_b window_length``.
    """
    s_alice = _q(scenario.s)
    T = float(scenario.T)
    centers, slopes, constants = [], [], []
    for w in range(windows):
        t_lo = first_window + w * window_length
        times = np.linspace(t_lo, t_lo + window_length, samples_per_window, endpoint=False)
        samples = np.array([float(_q_d_exact(scenario, clocks, t, s_alice=s_alice)) for t in times])
        slope, _ = _fit_line(times - T, samples)
        centers.append(times.mean())
        slopes.append(slope)
        constants.append(float(s_alice))
        s_alice -= _q(slope)
    return TrackingResult(np.array(centers), np.array(slopes), np.array(constants))


@dataclass(frozen=True)
class RampSchedule:
    """Periodic level schedule replacing the ever-growing linear ramp.

    ``restart`` is a sawtooth that drops back to zero every ``period``;
    ``reverse`` is a triangle whose slope alternates between ``+s`` and ``-s``.
    Readings before the party's start (negative) give zero.
    """

    period: float
    s: float
    mode: str = "reverse"

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.mode not in ("restart", "reverse"):
            raise ValueError(f"mode must be 'restart' or 'reverse', got {self.mode!r}")

    def exact_level(self, reading: Fraction) -> Fraction:
        if reading < 0:
            return Fraction(0)
        P = _q(self.period)
        s = _q(self.s)
        if self.mode == "restart":
            return s * (reading % P)
        phase = reading % (2 * P)
        return s * phase if phase < P else s * (2 * P - phase)

    def level(self, reading: float) -> float:
        return float(self.exact_level(_q(reading)))

    def slope_sign(self, reading: float) -> int:
        if self.mode == "restart":
            return 1
        phase = _q(reading) % (2 * _q(self.period))
        return 1 if phase < _q(self.period) else -1

    def turnarounds(self, lo: float, hi: float) -> list[float]:
        """Clock readings in ``[lo, hi]`` where the schedule resets or reverses."""
        P = _q(self.period)
        k = math.ceil(_q(lo) / P)
        out = []
        while k * P <= _q(hi):
            out.append(float(k * P))
            k += 1
        return out


def _schedule_level(schedule):
    if schedule is None:
        return None
    return schedule.exact_level


def periodic_ramp_schedule(
    period: float,
    s: float,
    mode: str = "reverse",
    *,
    roundtrip: Optional[float] = None,
    offset_bound: Optional[float] = None,
) -> RampSchedule:
    """Build a restart/reverse ramp; warns when the period is not long enough.

    The period should be much longer than the roundtrip ``2T`` and than the
    clock offset; "much" is taken as a factor of ten.
    """
    schedule = RampSchedule(period, s, mode)
    for name, scale in (("roundtrip time", roundtrip), ("clock offset bound", offset_bound)):
        if scale is not None and period < 10 * abs(scale):
            warnings.warn(
                f"ramp period {period} is not much longer than the {name} {abs(scale)}",
                RuntimeWarning,
                stacklevel=2,
            )
    return schedule


def ramp_readout(
    scenario: BeltScenario,
    clocks: ClockPair,
    schedule: RampSchedule,
    t: float,
    offset_bound: float = 0.0,
) -> Optional[float]:
    """Plateau value ``s (t0_b - t0_a)`` read at ``t``, or ``None`` near a turnaround.

    Alice can only use her own clock, so a reading is rejected when a
    turnaround falls within one roundtrip (plus ``offset_bound``) before her
    current reading. On falling segments the sand at D has the opposite sign
    and is flipped back.
    """
    if _q(t) < _transient_end(scenario, clocks):
        return None
    reading = float(_q(t) - _q(clocks.t0_a))
    span = float(_q(scenario.T) + _q(scenario.T_prime))
    if schedule.turnarounds(reading - span - offset_bound, reading + offset_bound):
        return None
    q = simulate_q_d(scenario, clocks, t, schedule=schedule)
    return schedule.slope_sign(reading) * q
