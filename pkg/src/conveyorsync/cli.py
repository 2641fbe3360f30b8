"""Command-line scenario runner.

    conveyorsync run --config scenario.toml --out results/ [--mode-override MODE] [--seed N]

Exit status: 0 on success, 2 for configuration problems, 3 when a numerical
routine refuses to produce a trustworthy number. Outputs carry a provenance
header (tool version, SHA-256 of the config file, seed, mode) and no
timestamps, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .belt import BeltScenario, ClockPair, differential_q_d, ranging_q_d, simulate_q_d, transient_end
from .biphoton import BiphotonState, dip_scan
from .config import MODES, ScenarioConfig, complex_list, load, trial_shifts
from .errors import ConfigError, NumericalError
from .estimator import EstimationScenario, ScanSchedule, run_experiment
from .optics import DelayDrive, DispersionProfile, FrequencyGrid, PulseSpectrum, fringe_scan
from .relativity import RelativisticDrive

log = logging.getLogger("conveyorsync")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fmt(x) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(x))


def _clocks(cfg: ScenarioConfig) -> ClockPair:
    c = cfg.section("clocks")
    return ClockPair(c["t0_a"], c["t0_b"], c.get("rate_b", 1.0), c.get("drift_b", 0.0))


def _belt(cfg: ScenarioConfig) -> BeltScenario:
    b = cfg.section("belt")
    return BeltScenario(b["s"], b["T"], b.get("T_prime"), b.get("belt_speed"))


def _drive(cfg: ScenarioConfig):
    d = cfg.section("drive")
    if d.get("relativistic", False):
        return RelativisticDrive(d["v"], d["c"], d.get("L", 0.0))
    try:
        return DelayDrive(d["v"], d["c"], d.get("L", 0.0))
    except ValueError as exc:
        raise ConfigError("drive.relativistic", f"{exc}; set relativistic = true") from None


def _spectrum(cfg: ScenarioConfig) -> PulseSpectrum:
    sp = cfg.section("spectrum")
    return PulseSpectrum(
        sp["omega0"],
        sp["delta_omega"],
        sp.get("total_photons", 1.0),
        sp.get("shape", "gaussian"),
        sp.get("table_omega"),
        sp.get("table_power"),
        sp.get("table_phase"),
    )


def _state(cfg: ScenarioConfig) -> BiphotonState:
    bp = cfg.section("biphoton")
    omega0 = bp.get("omega0", cfg.get("spectrum", "omega0"))
    return BiphotonState(omega0, bp["sigma_q"], bp.get("T_c", math.inf))


def _dispersion(cfg: ScenarioConfig) -> DispersionProfile:
    d = cfg.sections.get("dispersion", {})
    return DispersionProfile(
        *(complex_list(f"dispersion.{k}", d.get(k, [])) for k in ("plus_to", "plus_from", "minus_to", "minus_from")),
        valid_half_width=d.get("valid_half_width"),
    )


def _grid(cfg: ScenarioConfig) -> FrequencyGrid:
    g = cfg.sections.get("grid", {})
    try:
        return FrequencyGrid(g.get("points", FrequencyGrid.points), g.get("half_width", FrequencyGrid.half_width))
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None


def _offsets(cfg: ScenarioConfig) -> np.ndarray:
    sc = cfg.section("scan")
    return np.linspace(sc["offset_min"], sc["offset_max"], sc["points"])


def _provenance(cfg: ScenarioConfig, seed: int) -> dict:
    return {
        "tool": f"conveyorsync {__version__}",
        "config_sha256": cfg.sha256,
        "seed": seed,
        "mode": cfg.mode,
    }


def _check_finite(values, what: str) -> None:
    if not np.all(np.isfinite(np.asarray(values, dtype=float))):
        raise NumericalError(f"{what} contains non-finite values")


def _write_csv(path: Path, provenance: dict, header: list, rows) -> None:
    lines = [f"# {k}: {v}" for k, v in provenance.items()]
    lines.append(",".join(header))
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, provenance: dict, payload: dict) -> None:
    for key, value in payload.items():
        if isinstance(value, float) and not math.isfinite(value):
            raise NumericalError(f"report field {key} is not finite")
    doc = {"provenance": provenance, "result": payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_belt(cfg, out, prov):
    scenario, clocks = _belt(cfg), _clocks(cfg)
    t = cfg.get("belt", "t")
    if t is None:
        t = transient_end(scenario, clocks) + scenario.T
    q = simulate_q_d(scenario, clocks, t)
    _write_json(out / "report.json", prov, {
        "t": float(t),
        "q_d": q,
        "offset_estimate_s": q / scenario.s,
        "transient_end": transient_end(scenario, clocks),
    })


def _run_range(cfg, out, prov):
    reading = ranging_q_d(_belt(cfg), _clocks(cfg))
    _write_json(out / "report.json", prov, {
        "q_d": reading.q_d,
        "transit_time_s": reading.transit_time,
        "distance_m": reading.distance,
    })


def _run_differential(cfg, out, prov):
    scenario = _belt(cfg)
    reading = differential_q_d(scenario, _clocks(cfg))
    _write_json(out / "report.json", prov, {
        "q_d1": reading.q_d1,
        "q_d2": reading.q_d2,
        "total": reading.total,
        "offset_estimate_s": reading.offset_times_s / scenario.s,
    })


def _run_fringe(cfg, out, prov):
    offsets, cross, par = fringe_scan(
        _spectrum(cfg), _drive(cfg), _dispersion(cfg), _offsets(cfg), grid=_grid(cfg), as_arrays=True
    )
    _check_finite(np.concatenate([cross, par]), "fringe scan")
    rows = ((_fmt(o), _fmt(a), _fmt(b)) for o, a, b in zip(offsets, cross, par))
    _write_csv(out / "fringe.csv", prov, ["offset_s", "j_cross", "j_par"], rows)


def _run_dip(cfg, out, prov):
    offsets, prob = dip_scan(_state(cfg), _drive(cfg), _dispersion(cfg), _offsets(cfg), grid=_grid(cfg), as_arrays=True)
    _check_finite(prob, "dip scan")
    rows = ((_fmt(o), _fmt(p)) for o, p in zip(offsets, prob))
    _write_csv(out / "dip.csv", prov, ["offset_s", "p_coinc"], rows)


def _run_estimate(cfg, out, prov, seed):
    e = cfg.section("estimate")
    mode = e.get("mode", "classical")
    clocks = _clocks(cfg)
    truth = e.get("true_offset", clocks.offset)
    scenario = EstimationScenario(
        truth,
        _drive(cfg),
        spectrum=_spectrum(cfg) if mode == "classical" else None,
        state=_state(cfg) if mode == "quantum" else None,
        dispersion=_dispersion(cfg),
        grid=_grid(cfg),
    )
    schedule = ScanSchedule(tuple(trial_shifts(e["trial_shifts"])), e.get("pulses_per_shift", 1), seed)
    report = run_experiment(scenario, schedule, mode, e.get("repetitions", 20), complement=e.get("complement", False))
    _check_finite(report.estimates, "estimates")
    _write_json(out / "report.json", prov, report.to_dict())
    rows = (
        (str(i), _fmt(est), _fmt(est - truth), str(int(n)))
        for i, (est, n) in enumerate(zip(report.estimates, report.counts_total))
    )
    _write_csv(out / "repetitions.csv", prov, ["rep", "estimate_s", "error_s", "counts_total"], rows)


def run(config_path, out_dir, *, mode_override=None, seed=None) -> int:
    """Run one scenario; returns the process exit status."""
    try:
        cfg = load(config_path)
        if mode_override is not None:
            cfg = cfg.with_mode(mode_override)
        if seed is None:
            seed = cfg.get("estimate", "seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("--seed", "must fit in an unsigned 64-bit integer")
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError("--out", f"cannot create {out}: {exc.strerror}") from None
        prov = _provenance(cfg, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            if cfg.mode == "belt":
                _run_belt(cfg, out, prov)
            elif cfg.mode == "range":
                _run_range(cfg, out, prov)
            elif cfg.mode == "differential":
                _run_differential(cfg, out, prov)
            elif cfg.mode == "fringe":
                _run_fringe(cfg, out, prov)
            elif cfg.mode == "dip":
                _run_dip(cfg, out, prov)
            else:
                _run_estimate(cfg, out, prov, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # domain constructors reject inconsistent parameter bundles with ValueError
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("wrote %s outputs to %s", cfg.mode, out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conveyorsync", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario and write its outputs")
    p.add_argument("--config", required=True, help="scenario TOML file")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--mode-override", choices=MODES, help="run this mode instead of the config's")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit), overrides estimate.seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run(args.config, args.out, mode_override=args.mode_override, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
