"""INI run configuration: parsing, validation and defaults.

A run file has up to five sections::

    [device]       DeviceParams fields (GHz, 1/us, us)
    [integrator]   IntegratorCfg fields
    [experiment]   type = <experiment name> plus that experiment's keys
    [output]       dir = <path>
    [run]          seed = <int>

Only ``[experiment]`` with a ``type`` is required; everything else falls
back to the default device and integrator.  See ``configs/example.ini``.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field

from .device import DeviceParams, ParameterError
from .lindblad import IntegratorCfg

ENV_OUTPUT_DIR = "QRESET_OUTPUT_DIR"

EXPERIMENTS = ("spectroscopy", "rabi", "reset-trace", "trigger-scan", "readout-demo", "thermal-pop")


class ConfigError(ValueError):
    pass


# per-experiment keys: name -> (kind, default); kind in float/int/bool/str/floats/opt_float
_RESET_KEYS = {
    "mismatch": ("float", 0.0),
    "x_over_rotation": ("float", 0.0),
    "f0g1_duration": ("float", 120.0),
    "f0g1_ramp": ("float", 5.0),
    "f0g1_amplitude": ("opt_float", None),
    "f0g1_stark_shift": ("float", 0.0),
    "ef_pulse_duration": ("float", 75.0),
    "use_ideal_x": ("bool", True),
    "idle_after": ("float", 2000.0),
}

EXPERIMENT_KEYS: dict[str, dict[str, tuple[str, object]]] = {
    "spectroscopy": {
        "amplitudes": ("floats", [-0.3, -0.2, -0.1, 0.1, 0.2, 0.3]),
        "freq_start": ("float", 2.600),
        "freq_stop": ("float", 2.645),
        "freq_points": ("int", 91),
        "probe_duration": ("float", 10_000.0),
        "ramp": ("float", 0.0),
    },
    "rabi": {
        "amplitude": ("opt_float", None),
        "freq_offset": ("opt_float", None),
        "duration_start": ("float", 10.0),
        "duration_stop": ("float", 800.0),
        "duration_step": ("float", 1.0),
        "ramp": ("float", 5.0),
        "target_duration": ("float", 120.0),
    },
    "reset-trace": dict(_RESET_KEYS),
    "trigger-scan": {
        "rates": ("floats", [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 90.0]),
        "with_reset": ("bool", True),
        "rounds": ("int", 30),
        "readout_duration": ("float", 5000.0),
        **_RESET_KEYS,
        "mismatch": ("float", 29e-6),
        "x_over_rotation": ("float", 0.01),
    },
    "readout-demo": {
        "separation": ("float", 4.34),
        "blob_sigma": ("float", 1.0),
        "shots": ("int", 2000),
    },
    "thermal-pop": {
        "angle_points": ("int", 41),
    },
}


@dataclass
class RunConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    integrator: IntegratorCfg = field(default_factory=IntegratorCfg)
    experiment: str = "reset-trace"
    params: dict = field(default_factory=dict)
    output_dir: str = "results"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"device": self.device.to_dict(),
                "integrator": dataclasses.asdict(self.integrator),
                "experiment": {"type": self.experiment, **self.params},
                "output": {"dir": self.output_dir},
                "run": {"seed": self.seed}}


def _convert(section: str, key: str, raw: str, kind: str):
    where = f"{section}.{key}"
    raw = raw.strip()
    try:
        if kind == "float":
            value = float(raw)
            if math.isnan(value):
                raise ValueError
            return value
        if kind == "opt_float":
            return None if raw.lower() in ("", "none", "auto") else _convert(section, key, raw, "float")
        if kind == "int":
            return int(raw)
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "floats":
            items = [s for s in raw.replace("\n", ",").split(",") if s.strip()]
            if not items:
                raise ValueError
            return [float(s) for s in items]
        if kind == "str":
            return raw
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.replace('_', ' ')}, got {raw!r}") from None
    raise AssertionError(kind)


def _dataclass_kinds(cls) -> dict[str, str]:
    kinds = {}
    for f in dataclasses.fields(cls):
        t = str(f.type)
        if "bool" in t:
            kinds[f.name] = "bool"
        elif "int" in t and "None" in t:
            kinds[f.name] = "opt_int"
        elif "int" in t:
            kinds[f.name] = "int"
        elif "float" in t and "None" in t:
            kinds[f.name] = "opt_float"
        elif "float" in t:
            kinds[f.name] = "float"
        else:
            kinds[f.name] = "str"
    return kinds


def _section_values(cp: configparser.ConfigParser, section: str, kinds: dict[str, str]) -> dict:
    out = {}
    if not cp.has_section(section):
        return out
    for key, raw in cp.items(section):
        if key not in kinds:
            raise ConfigError(f"{section}.{key}: unknown key (allowed: {', '.join(sorted(kinds))})")
        kind = kinds[key]
        if kind == "opt_int":
            out[key] = None if raw.strip().lower() in ("", "none") else _convert(section, key, raw, "int")
        else:
            out[key] = _convert(section, key, raw, kind)
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate an INI run description.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, type mismatches and
        parameter-range violations; the message names the offending key.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - {"device", "integrator", "experiment", "output", "run"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    if not cp.has_section("experiment") or not cp.get("experiment", "type", fallback="").strip():
        raise ConfigError("experiment: missing [experiment] block with a 'type' key "
                          f"(one of {', '.join(EXPERIMENTS)})")
    exp_type = cp.get("experiment", "type").strip()
    if exp_type not in EXPERIMENTS:
        raise ConfigError(f"experiment.type: unknown experiment {exp_type!r} (one of {', '.join(EXPERIMENTS)})")

    dev_values = _section_values(cp, "device", _dataclass_kinds(DeviceParams))
    try:
        device = DeviceParams(**dev_values)
    except ParameterError as exc:
        raise ConfigError(f"device: {exc}") from None

    int_values = _section_values(cp, "integrator", _dataclass_kinds(IntegratorCfg))
    try:
        integrator = IntegratorCfg(**int_values)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None

    spec = EXPERIMENT_KEYS[exp_type]
    kinds = {k: kind for k, (kind, _) in spec.items()}
    kinds["type"] = "str"
    given = _section_values(cp, "experiment", kinds)
    given.pop("type")
    params = {k: default for k, (_, default) in spec.items()}
    params.update(given)
    _validate_experiment(exp_type, params)

    output = _section_values(cp, "output", {"dir": "str"})
    run = _section_values(cp, "run", {"seed": "int"})
    out_dir = output.get("dir") or os.environ.get(ENV_OUTPUT_DIR) or "results"
    return RunConfig(device, integrator, exp_type, params, out_dir, run.get("seed", 0))


def _validate_experiment(kind: str, q: dict) -> None:
    def need(cond, key, rule):
        if not cond:
            raise ConfigError(f"experiment.{key}: {rule}, got {q[key]!r}")

    if kind == "spectroscopy":
        need(q["freq_stop"] > q["freq_start"], "freq_stop", "must exceed freq_start")
        need(q["freq_points"] >= 5, "freq_points", "must be >= 5")
        need(q["probe_duration"] > 0, "probe_duration", "must be > 0")
        need(len({abs(a) for a in q["amplitudes"] if a != 0}) >= 2 and len(set(q["amplitudes"])) >= 3,
             "amplitudes", "need at least 3 distinct values with 2 distinct nonzero magnitudes")
    elif kind == "rabi":
        need(q["duration_stop"] > q["duration_start"] >= 2 * q["ramp"], "duration_start",
             "must satisfy 2*ramp <= duration_start < duration_stop")
        need(q["duration_step"] > 0, "duration_step", "must be > 0")
        if q["amplitude"] is not None:
            need(q["amplitude"] > 0, "amplitude", "must be > 0")
    elif kind in ("reset-trace", "trigger-scan"):
        need(q["f0g1_duration"] > 0, "f0g1_duration", "must be > 0")
        need(0 <= 2 * q["f0g1_ramp"] <= q["f0g1_duration"], "f0g1_ramp", "must satisfy 0 <= 2*ramp <= f0g1_duration")
        need(q["ef_pulse_duration"] > 0, "ef_pulse_duration", "must be > 0")
        need(q["idle_after"] >= 0, "idle_after", "must be >= 0")
        if q["f0g1_amplitude"] is not None:
            need(q["f0g1_amplitude"] > 0, "f0g1_amplitude", "must be > 0")
        if kind == "trigger-scan":
            need(all(r > 0 for r in q["rates"]), "rates", "must all be > 0 kHz")
            need(q["rounds"] >= 1, "rounds", "must be >= 1")
            need(q["readout_duration"] >= 0, "readout_duration", "must be >= 0")
    elif kind == "readout-demo":
        need(q["separation"] > 0, "separation", "must be > 0")
        need(q["blob_sigma"] > 0, "blob_sigma", "must be > 0")
        need(q["shots"] > 0, "shots", "must be > 0")
    elif kind == "thermal-pop":
        need(q["angle_points"] >= 5, "angle_points", "must be >= 5")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text)


def default_config(experiment: str) -> RunConfig:
    return parse_config(f"[experiment]\ntype = {experiment}\n")
