"""Multi-pulse estimation: shot noise, null finding, accuracy scaling."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conveyorsync.biphoton import BiphotonState
from conveyorsync.errors import GridTooCoarseError, NullSearchError
from conveyorsync.estimator import (
    EstimationScenario,
    ScanSchedule,
    accuracy_model,
    expected_counts,
    locate_null,
    observe_counts,
    run_experiment,
    snr_of,
)
from conveyorsync.optics import DelayDrive, DispersionProfile, PulseSpectrum

C = 299_792_458.0
OMEGA0, DOMEGA = 1e14, 1e13
V = 1e9 * C / (8 * OMEGA0)
PERIOD = 2 * np.pi / 1e9
DIP_WIDTH = C / (4 * V * DOMEGA)
DRIVE = DelayDrive(V, C)
STATE = BiphotonState(OMEGA0, DOMEGA)


def classical(true_offset, J=1e4, dispersion=DispersionProfile()):
    return EstimationScenario(true_offset, DRIVE, spectrum=PulseSpectrum(OMEGA0, DOMEGA, J), dispersion=dispersion)


def quantum(true_offset, dispersion=DispersionProfile()):
    return EstimationScenario(true_offset, DRIVE, state=STATE, dispersion=dispersion)


def fringe_schedule(pulses=1, seed=7, centre=0.0):
    return ScanSchedule.uniform(centre - 6e-8, centre + 6e-8, 1001, pulses, seed)


def dip_schedule(pulses=1000, seed=7, centre=0.0):
    return ScanSchedule.uniform(centre - 3 * DIP_WIDTH, centre + 3 * DIP_WIDTH, 61, pulses, seed)


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ValueError, match="three"):
            ScanSchedule((0.0, 1.0))
        with pytest.raises(ValueError, match="increasing"):
            ScanSchedule((0.0, 2.0, 1.0))
        with pytest.raises(ValueError, match="pulses"):
            ScanSchedule((0.0, 1.0, 2.0), 0)
        with pytest.raises(ValueError, match="64-bit"):
            ScanSchedule((0.0, 1.0, 2.0), 1, 2 ** 64)

    def test_uniform(self):
        s = ScanSchedule.uniform(-1.0, 1.0, 5)
        np.testing.assert_array_equal(s.shifts, [-1, -0.5, 0, 0.5, 1])
        assert s.step == 0.5


class TestObserveCounts:
    sched = ScanSchedule((0.0, 1.0, 2.0), 1, 99)

    def test_zero_mean(self):
        assert all(observe_counts(0.0, self.sched, k, rep=r) == 0 for k in range(3) for r in range(50))

    def test_poisson_mean(self):
        draws = np.array([observe_counts(1e6, self.sched, 0, rep=r) for r in range(1000)])
        # 4 standard errors of the sample mean
        assert abs(draws.mean() - 1e6) <= 4 * math.sqrt(1e6 / 1000)
        assert draws.var() == pytest.approx(1e6, rel=0.15)

    def test_binomial(self):
        sched = ScanSchedule((0.0, 1.0, 2.0), 1000, 5)
        draws = np.array([observe_counts(0.3, sched, 1, rep=r, mode="quantum") for r in range(500)])
        assert draws.max() <= 1000
        assert abs(draws.mean() - 300) <= 4 * math.sqrt(1000 * 0.3 * 0.7 / 500)

    def test_deterministic(self):
        a = [observe_counts(12.5, self.sched, k, rep=3) for k in range(3)]
        b = [observe_counts(12.5, self.sched, k, rep=3) for k in range(3)]
        assert a == b
        assert a != [observe_counts(12.5, ScanSchedule((0.0, 1.0, 2.0), 1, 100), k, rep=3) for k in range(3)]

    def test_errors(self):
        with pytest.raises(ValueError, match="non-negative"):
            observe_counts(-1.0, self.sched, 0)
        with pytest.raises(ValueError):
            observe_counts(1.5, self.sched, 0, mode="quantum")
        with pytest.raises(ValueError):
            observe_counts(1.0, self.sched, 0, mode="thermal")


class TestLocateNull:
    @pytest.mark.parametrize("truth", [0.0, 0.37 * PERIOD, -1.3e-9, 2.1e-8])
    def test_noiseless_classical(self, truth):
        report = run_experiment(classical(truth), fringe_schedule(), "classical", 1, noiseless=True)
        assert abs(report.estimated_offset - truth) <= 1e-12

    @pytest.mark.parametrize("truth", [0.0, 0.123 * DIP_WIDTH, -0.71 * DIP_WIDTH])
    def test_noiseless_quantum(self, truth):
        report = run_experiment(quantum(truth), dip_schedule(), "quantum", 1, noiseless=True)
        assert abs(report.estimated_offset - truth) <= 1e-3 * DIP_WIDTH

    def test_too_coarse(self):
        x = np.linspace(-1e-8, 1e-8, 8)  # step 2.9e-9 s > period / 4
        with pytest.raises(GridTooCoarseError) as info:
            locate_null(x, np.ones_like(x), fringe_rate=1e9)
        assert info.value.required == pytest.approx(PERIOD / 4)
        assert "step of at most" in str(info.value)

    def test_offset_outside_grid(self):
        sched = ScanSchedule.uniform(-3 * DIP_WIDTH, -1.5 * DIP_WIDTH, 31, 1000)
        with pytest.raises(NullSearchError, match="edge"):
            run_experiment(quantum(0.0), sched, "quantum", 1, noiseless=True)
        sched = ScanSchedule.uniform(2e-8, 8e-8, 801)
        with pytest.raises(NullSearchError, match="edge"):
            run_experiment(classical(0.0), sched, "classical", 1, noiseless=True)

    def test_needs_rate(self):
        with pytest.raises(ValueError, match="fringe rate"):
            locate_null([0, 1, 2], [1, 0, 1])

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            locate_null([0, 1, 2], [1, 0], mode="quantum")
        with pytest.raises(ValueError):
            locate_null([0, 2, 1], [1, 0, 1], mode="quantum")
        with pytest.raises(ValueError):
            locate_null([0, 1, 2], [1, 0, 1], mode="psychic")

    def test_parabola_exact(self):
        x = np.linspace(-1, 1, 21)
        assert locate_null(x, (x - 0.123) ** 2, mode="quantum") == pytest.approx(0.123, abs=1e-12)

    def test_log_parabola_exact_for_gaussian_dip(self):
        x = np.linspace(-3, 3, 31)
        y = 0.5 - 0.5 * np.exp(-2 * (x - 0.211) ** 2)
        assert locate_null(x, y, mode="quantum", asymptote=0.5) == pytest.approx(0.211, abs=1e-12)

    def test_cosine_fine_stage_exact(self):
        rate = 1.7
        x = np.linspace(-20, 20, 401)
        y = 1 - np.cos(rate * (x - 0.4)) * np.exp(-((x - 0.4) / 15) ** 2)
        assert locate_null(x, y, fringe_rate=rate) == pytest.approx(0.4, abs=1e-3)


class TestAccuracyModel:
    def test_examples(self):
        drive = DelayDrive(C / 1e6, C)
        assert accuracy_model("classical", drive, PulseSpectrum(1e15, 1e13), 100) == pytest.approx(1e-10)
        assert accuracy_model("quantum", drive, BiphotonState(1e15, 1e13), 100) == pytest.approx(1e-14)

    @settings(max_examples=100)
    @given(ratio=st.floats(1e-8, 1e-2), omega0=st.floats(1e13, 1e16), frac=st.floats(1e-4, 0.5))
    def test_crossover(self, ratio, omega0, frac):
        delta = frac * omega0
        drive = DelayDrive(ratio * C, C)
        cl = accuracy_model("classical", drive, PulseSpectrum(omega0, delta, 1.0), 1e4) if frac <= 0.1 else None
        if cl is None:
            return
        qu = accuracy_model("quantum", drive, BiphotonState(omega0, delta), 1e4)
        if not math.isclose(ratio, frac, rel_tol=1e-9):
            assert (cl < qu) == (ratio > frac)

    def test_bad_snr(self):
        with pytest.raises(ValueError):
            accuracy_model("classical", DRIVE, PulseSpectrum(OMEGA0, DOMEGA), 0.0)


class TestRunExperiment:
    def test_deterministic(self):
        a = run_experiment(classical(1.1e-9, J=100), fringe_schedule(seed=3), "classical", 5)
        b = run_experiment(classical(1.1e-9, J=100), fringe_schedule(seed=3), "classical", 5)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        np.testing.assert_array_equal(a.counts_total, b.counts_total)
        assert a.to_dict() == b.to_dict()

    def test_quadrupling_photons_halves_error(self):
        rms = [run_experiment(classical(0.37 * PERIOD, J=J), fringe_schedule(seed=11), "classical", 20).rms_error
               for J in (1e3, 4e3)]
        assert 0.5 / 1.5 <= rms[1] / rms[0] <= 0.5 * 1.5

    @pytest.mark.parametrize("mode", ["classical", "quantum"])
    def test_unbiased(self, mode):
        if mode == "classical":
            report = run_experiment(classical(0.2 * PERIOD, J=300), fringe_schedule(seed=5), mode, 40)
        else:
            report = run_experiment(quantum(0.2 * DIP_WIDTH), dip_schedule(500, seed=5), mode, 40)
        assert report.rms_error >= 0
        assert abs(report.bias) <= 3 * report.rms_error / math.sqrt(report.repetitions)

    def test_grid_shift_equivariance(self):
        shift = 3.7e-9
        a = run_experiment(classical(1e-9, J=500), fringe_schedule(seed=9), "classical", 10)
        b = run_experiment(classical(1e-9 + shift, J=500), fringe_schedule(seed=9, centre=shift), "classical", 10)
        np.testing.assert_allclose(b.errors, a.errors, atol=1e-16)

    def test_complement_doubles_snr(self):
        base = run_experiment(classical(0.1 * PERIOD, J=200), fringe_schedule(seed=4), "classical", 30)
        both = run_experiment(classical(0.1 * PERIOD, J=200), fringe_schedule(seed=4), "classical", 30, complement=True)
        assert both.snr == 2 * base.snr
        assert both.rms_error < base.rms_error
        assert "both ports" in both.snr_definition

    def test_complement_only_classical(self):
        with pytest.raises(ValueError, match="complementary"):
            run_experiment(quantum(0.0), dip_schedule(), "quantum", 1, complement=True)

    def test_even_dispersion_does_not_hurt_quantum(self):
        profile = DispersionProfile(plus_to=[0.7, 0, 9 / DOMEGA ** 2])
        plain = run_experiment(quantum(0.1 * DIP_WIDTH), dip_schedule(2000, seed=21), "quantum", 20)
        disp = run_experiment(quantum(0.1 * DIP_WIDTH, profile), dip_schedule(2000, seed=21), "quantum", 20)
        assert disp.rms_error == pytest.approx(plain.rms_error, rel=0.2)

    def test_noiseless_limit(self):
        report = run_experiment(classical(0.37 * PERIOD, J=1e12), fringe_schedule(seed=1), "classical", 3)
        assert report.rms_error < 1e-13

    def test_report(self):
        report = run_experiment(quantum(0.0), dip_schedule(100), "quantum", 3)
        d = report.to_dict()
        assert d["mode"] == "quantum"
        assert d["snr"] == pytest.approx(61 * 100 * 0.5 / 0.5)
        assert d["empirical_over_predicted"] == report.rms_error / report.predicted_accuracy
        assert report.counts_total.shape == (3,)

    def test_scenario_checks(self):
        with pytest.raises(ValueError, match="spectrum"):
            expected_counts(quantum(0.0), dip_schedule(), "classical")
        with pytest.raises(ValueError, match="bi-photon"):
            expected_counts(EstimationScenario(0.0, DRIVE), dip_schedule(), "quantum")
        with pytest.raises(ValueError):
            run_experiment(quantum(0.0), dip_schedule(), "quantum", 0)

    def test_snr_definitions(self):
        snr, text = snr_of(classical(0.0, J=50), fringe_schedule(), "classical")
        assert snr == 1001 * 25 and "J/2" in text
