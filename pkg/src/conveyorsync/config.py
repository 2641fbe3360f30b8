"""Scenario configuration: TOML file -> validated, typed sections.

Every field is SI (s, rad/s, m/s, m). Sections a mode does not use may be
omitted; sections it does use must be complete. Unknown sections or keys are
rejected so that a typo never silently falls back to a default. Complex
dispersion coefficients are written either as plain numbers or as
``[re, im]`` pairs.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

MODES = ("belt", "range", "differential", "fringe", "dip", "estimate")

# section -> {key: required?}
_SCHEMA = {
    "clocks": {"t0_a": True, "t0_b": True, "rate_b": False, "drift_b": False},
    "belt": {"s": True, "T": True, "T_prime": False, "belt_speed": False, "t": False},
    "drive": {"v": True, "c": True, "L": False, "relativistic": False},
    "spectrum": {"omega0": True, "delta_omega": True, "total_photons": False, "shape": False,
                 "table_omega": False, "table_power": False, "table_phase": False},
    "dispersion": {"plus_to": False, "plus_from": False, "minus_to": False, "minus_from": False,
                   "valid_half_width": False},
    "biphoton": {"sigma_q": True, "T_c": False, "omega0": False},
    "scan": {"offset_min": True, "offset_max": True, "points": True},
    "estimate": {"mode": False, "trial_shifts": True, "pulses_per_shift": False, "repetitions": False,
                 "seed": False, "complement": False, "true_offset": False},
    "grid": {"points": False, "half_width": False},
}

_NEEDS = {
    "belt": ("clocks", "belt"),
    "range": ("clocks", "belt"),
    "differential": ("clocks", "belt"),
    "fringe": ("drive", "spectrum", "scan"),
    "dip": ("drive", "biphoton", "scan"),
    "estimate": ("clocks", "drive", "estimate"),
}


@dataclass
class ScenarioConfig:
    mode: str
    sections: dict
    sha256: str
    source: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        try:
            return self.sections[name]
        except KeyError:
            raise ConfigError(name, f"section [{name}] is required in {self.mode} mode") from None

    def get(self, name: str, key: str, default: Any = None) -> Any:
        return self.sections.get(name, {}).get(key, default)

    def with_mode(self, mode: str) -> "ScenarioConfig":
        cfg = ScenarioConfig(mode, self.sections, self.sha256, self.source, self.extra)
        validate(cfg)
        return cfg


def _number(path: str, value, *, positive=False, nonneg=False, integer=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if nonneg and not value >= 0:
        raise ConfigError(path, f"must be non-negative, got {value!r}")
    return value


def complex_list(path: str, value) -> tuple:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of coefficients")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, list):
            if len(item) != 2:
                raise ConfigError(f"{path}[{i}]", "complex coefficients are [re, im] pairs")
            out.append(complex(_number(f"{path}[{i}]", item[0]), _number(f"{path}[{i}]", item[1])))
        else:
            out.append(complex(_number(f"{path}[{i}]", item)))
    return tuple(out)


def _number_list(path: str, value, min_len: int = 1) -> list:
    if not isinstance(value, list) or len(value) < min_len:
        raise ConfigError(path, f"expected a list of at least {min_len} numbers")
    return [_number(f"{path}[{i}]", v) for i, v in enumerate(value)]


def _check_section(name: str, table) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(name, "expected a table")
    schema = _SCHEMA[name]
    for key in table:
        if key not in schema:
            raise ConfigError(f"{name}.{key}", "unknown field")
    return dict(table)


def _require(cfg: ScenarioConfig, name: str) -> dict:
    table = cfg.section(name)
    for key, required in _SCHEMA[name].items():
        if required and key not in table:
            raise ConfigError(f"{name}.{key}", f"required in {cfg.mode} mode")
    return table


def validate(cfg: ScenarioConfig) -> None:
    """Type- and range-check everything the configured mode will read."""
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    for name in _NEEDS[cfg.mode]:
        _require(cfg, name)
    if cfg.mode == "dip" and "omega0" not in cfg.sections["biphoton"]:
        if "omega0" not in cfg.sections.get("spectrum", {}):
            raise ConfigError("biphoton.omega0", "required in dip mode (or give spectrum.omega0)")
    if cfg.mode == "estimate":
        est_mode = cfg.get("estimate", "mode", "classical")
        if est_mode not in ("classical", "quantum"):
            raise ConfigError("estimate.mode", f"must be 'classical' or 'quantum', got {est_mode!r}")
        needed = "spectrum" if est_mode == "classical" else "biphoton"
        _require(cfg, needed)
        if est_mode == "quantum" and "omega0" not in cfg.sections["biphoton"] and "omega0" not in cfg.sections.get("spectrum", {}):
            raise ConfigError("biphoton.omega0", "required for quantum estimation (or give spectrum.omega0)")

    s = cfg.sections
    if "clocks" in s:
        c = s["clocks"]
        for key in ("t0_a", "t0_b", "drift_b"):
            if key in c:
                _number(f"clocks.{key}", c[key])
        if "rate_b" in c:
            _number("clocks.rate_b", c["rate_b"], positive=True)
    if "belt" in s:
        b = s["belt"]
        _number("belt.s", b.get("s", 1.0), positive=True)
        for key in ("T", "T_prime", "t"):
            if key in b:
                _number(f"belt.{key}", b[key], nonneg=True)
        if "belt_speed" in b:
            _number("belt.belt_speed", b["belt_speed"], positive=True)
    if "drive" in s:
        d = s["drive"]
        _number("drive.v", d.get("v", 1.0), positive=True)
        _number("drive.c", d.get("c", 1.0), positive=True)
        if "L" in d:
            _number("drive.L", d["L"], nonneg=True)
        if "relativistic" in d and not isinstance(d["relativistic"], bool):
            raise ConfigError("drive.relativistic", "expected true or false")
        if "v" in d and "c" in d and not d["v"] < d["c"]:
            raise ConfigError("drive.v", "must be below drive.c")
    if "spectrum" in s:
        sp = s["spectrum"]
        for key in ("omega0", "delta_omega"):
            if key in sp:
                _number(f"spectrum.{key}", sp[key], positive=True)
        if "total_photons" in sp:
            _number("spectrum.total_photons", sp["total_photons"], nonneg=True)
        shape = sp.get("shape", "gaussian")
        if shape not in ("gaussian", "tabulated"):
            raise ConfigError("spectrum.shape", f"must be 'gaussian' or 'tabulated', got {shape!r}")
        if shape == "tabulated":
            for key in ("table_omega", "table_power"):
                if key not in sp:
                    raise ConfigError(f"spectrum.{key}", "required for a tabulated spectrum")
            n = len(_number_list("spectrum.table_omega", sp["table_omega"], 2))
            if len(_number_list("spectrum.table_power", sp["table_power"], 2)) != n:
                raise ConfigError("spectrum.table_power", "must have the same length as table_omega")
            if "table_phase" in sp and len(_number_list("spectrum.table_phase", sp["table_phase"], 2)) != n:
                raise ConfigError("spectrum.table_phase", "must have the same length as table_omega")
    if "dispersion" in s:
        for key in ("plus_to", "plus_from", "minus_to", "minus_from"):
            if key in s["dispersion"]:
                complex_list(f"dispersion.{key}", s["dispersion"][key])
        if "valid_half_width" in s["dispersion"]:
            _number("dispersion.valid_half_width", s["dispersion"]["valid_half_width"], positive=True)
    if "biphoton" in s:
        bp = s["biphoton"]
        for key in ("sigma_q", "T_c", "omega0"):
            if key in bp:
                _number(f"biphoton.{key}", bp[key], positive=True)
    if "scan" in s:
        sc = s["scan"]
        lo = _number("scan.offset_min", sc.get("offset_min", 0.0))
        hi = _number("scan.offset_max", sc.get("offset_max", 1.0))
        pts = _number("scan.points", sc.get("points", 2), positive=True, integer=True)
        if cfg.mode in ("fringe", "dip"):
            if not hi > lo:
                raise ConfigError("scan.offset_max", "must exceed scan.offset_min")
            if pts < 2:
                raise ConfigError("scan.points", "need at least two points")
    if "estimate" in s:
        e = s["estimate"]
        if "trial_shifts" in e:
            trial_shifts(e["trial_shifts"])
        if "pulses_per_shift" in e:
            _number("estimate.pulses_per_shift", e["pulses_per_shift"], positive=True, integer=True)
        if "repetitions" in e:
            _number("estimate.repetitions", e["repetitions"], positive=True, integer=True)
        if "seed" in e:
            seed = _number("estimate.seed", e["seed"], nonneg=True, integer=True)
            if seed >= 2 ** 64:
                raise ConfigError("estimate.seed", "must fit in an unsigned 64-bit integer")
        if "complement" in e and not isinstance(e["complement"], bool):
            raise ConfigError("estimate.complement", "expected true or false")
        if "true_offset" in e:
            _number("estimate.true_offset", e["true_offset"])
    if "grid" in s:
        g = s["grid"]
        if "points" in g:
            _number("grid.points", g["points"], positive=True, integer=True)
        if "half_width" in g:
            _number("grid.half_width", g["half_width"], positive=True)


def trial_shifts(spec) -> list:
    """Explicit list, or ``{start, stop, points}`` for a uniform grid."""
    path = "estimate.trial_shifts"
    if isinstance(spec, list):
        values = _number_list(path, spec, 3)
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(path, "must be strictly increasing")
        return values
    if isinstance(spec, dict):
        for key in ("start", "stop", "points"):
            if key not in spec:
                raise ConfigError(f"{path}.{key}", "required")
        for key in spec:
            if key not in ("start", "stop", "points"):
                raise ConfigError(f"{path}.{key}", "unknown field")
        start = _number(f"{path}.start", spec["start"])
        stop = _number(f"{path}.stop", spec["stop"])
        points = _number(f"{path}.points", spec["points"], positive=True, integer=True)
        if points < 3 or not stop > start:
            raise ConfigError(path, "need stop > start and at least three points")
        return np.linspace(start, stop, points).tolist()
    raise ConfigError(path, "expected a list or a {start, stop, points} table")


def parse(data: bytes, source: Optional[str] = None) -> ScenarioConfig:
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"not valid TOML: {exc}") from None
    mode = raw.pop("mode", None)
    if mode is None:
        raise ConfigError("mode", "required")
    if not isinstance(mode, str):
        raise ConfigError("mode", "expected a string")
    sections = {}
    for name, table in raw.items():
        if name not in _SCHEMA:
            raise ConfigError(name, "unknown section")
        sections[name] = _check_section(name, table)
    cfg = ScenarioConfig(mode, sections, hashlib.sha256(data).hexdigest(), source)
    validate(cfg)
    return cfg


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return parse(data, str(path))
