"""Command-line front end: ``qreset <experiment> [--config F] [--seed N] [--out D] [--dt H]``.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 integrator or calibration non-convergence, 4 analysis failure (no
minimum or failed fit).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import experiments as ex
from .config import EXPERIMENTS, ConfigError, RunConfig, load_config, parse_config
from .device import ParameterError
from .fitting import FitError, NoMinimumError
from .lindblad import NonConvergenceError
from .pulses import ResetConfig, ScheduleError
from .readout import ReadoutModel
from .results import write_result

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_ANALYSIS = 0, 1, 2, 3, 4


def _reset_config(q: dict) -> ResetConfig:
    return ResetConfig(ef_pulse_duration=q["ef_pulse_duration"], f0g1_amplitude=q["f0g1_amplitude"],
                       f0g1_duration=q["f0g1_duration"], f0g1_ramp=q["f0g1_ramp"],
                       f0g1_stark_shift=q["f0g1_stark_shift"], use_ideal_x=q["use_ideal_x"],
                       x_over_rotation=q["x_over_rotation"], idle_after=q["idle_after"])


def _trace_diagnostics(trace) -> dict:
    return {"trace_error": trace.trace_error, "hermiticity_error": trace.hermiticity_error,
            "min_eigenvalue": trace.min_eigenvalue}


def _run_spectroscopy(cfg: RunConfig):
    q = cfg.params
    freqs = np.linspace(q["freq_start"], q["freq_stop"], q["freq_points"])
    smap = ex.spectroscopy_scan(cfg.device, q["amplitudes"], freqs, q["probe_duration"],
                                ramp=q["ramp"], cfg=cfg.integrator)
    fit = ex.fit_spectroscopy(smap)
    line = (f"spectroscopy: resonance at zero amplitude {fit.resonance_at_zero:.6f} GHz, "
            f"quadratic coefficient {fit.quadratic.params['c2']:.4g} GHz/GHz^2")
    return smap.to_csv(), {"fit": fit.to_dict()}, line


def _run_rabi(cfg: RunConfig):
    q = cfg.params
    p = cfg.device
    amp, offset, cal = q["amplitude"], q["freq_offset"], None
    if amp is None:
        cal = ex.calibrate_reset(p, q["target_duration"], q["ramp"], cfg=cfg.integrator)
        amp = cal.amplitude
        if offset is None:
            offset = cal.stark_shift
    if offset is None:
        offset = ex.find_f0g1_resonance(p, amp)
    durations = np.arange(q["duration_start"], q["duration_stop"] + 0.5 * q["duration_step"], q["duration_step"])
    r = ex.time_rabi(p, amp, offset, durations, ramp=q["ramp"], cfg=cfg.integrator)
    summary = {"amplitude_ghz": amp, "freq_offset_ghz": offset, "t_opt_ns": r.t_opt,
               "residual": r.residual, "rabi_rate_per_us": r.rabi_rate,
               "fit": None if r.fit is None else r.fit.to_dict(),
               "calibration": None if cal is None else cal.to_dict()}
    line = (f"rabi: t_opt {r.t_opt:.2f} ns, residual {100 * r.residual:.3f}%, "
            f"Rabi rate {r.rabi_rate:.3f} /us")
    return r.to_csv(), summary, line


def _run_reset_trace(cfg: RunConfig):
    q = cfg.params
    rcfg = _reset_config(q)
    res = ex.reset_trace(cfg.device, rcfg, q["mismatch"], integ=cfg.integrator,
                         calibrate=q["f0g1_amplitude"] is None)
    summary = {"residual": res.residual, "mismatch_ghz": q["mismatch"],
               "schedule": res.schedule.describe(),
               "calibration": None if res.calibration is None else res.calibration.to_dict(),
               "diagnostics": {"pulsed": _trace_diagnostics(res.pulsed),
                               "free_decay": _trace_diagnostics(res.free_decay)}}
    line = f"reset-trace: residual {100 * res.residual:.3f}% (mismatch {1e6 * q['mismatch']:.1f} kHz)"
    return res.to_csv(), summary, line


def _run_trigger_scan(cfg: RunConfig):
    q = cfg.params
    rcfg = _reset_config(q)
    res = ex.trigger_rate_experiment(cfg.device, q["rates"], q["with_reset"], q["rounds"], rcfg,
                                     q["mismatch"], q["x_over_rotation"], q["readout_duration"],
                                     integ=cfg.integrator)
    summary = {"rates_khz": res.rates_khz, "population": res.population, "with_reset": res.with_reset}
    pops = ", ".join(f"{r:g} kHz: {100 * v:.2f}%" for r, v in zip(res.rates_khz, res.population))
    return res.to_csv(), summary, f"trigger-scan ({'reset' if q['with_reset'] else 'no reset'}): {pops}"


def _run_readout_demo(cfg: RunConfig):
    q = cfg.params
    model = ReadoutModel.with_separation(q["separation"], q["blob_sigma"], seed=cfg.seed)
    res = ex.readout_demo(model, q["shots"])
    summary = {"fidelity": res.fidelity, "normal": res.boundary.normal, "offset": res.boundary.offset,
               "shots_per_class": res.n_shots, "iq_centers": model.iq_centers}
    return res.to_csv(), summary, f"readout-demo: assignment fidelity {100 * res.fidelity:.2f}%"


def _run_thermal_pop(cfg: RunConfig):
    q = cfg.params
    angles = np.linspace(0.0, 4.0 * np.pi, q["angle_points"])
    res = ex.thermal_population_measurement(cfg.device, angles)
    summary = {"estimate": res.estimate, "configured": cfg.device.p_thermal_e,
               "amplitude_thermal": res.amplitude_thermal, "amplitude_pi": res.amplitude_pi}
    return res.to_csv(), summary, f"thermal-pop: estimated p_e {100 * res.estimate:.3f}%"


DISPATCH = {
    "spectroscopy": _run_spectroscopy,
    "rabi": _run_rabi,
    "reset-trace": _run_reset_trace,
    "trigger-scan": _run_trigger_scan,
    "readout-demo": _run_readout_demo,
    "thermal-pop": _run_thermal_pop,
}


def run(cfg: RunConfig, stamp: str | None = None) -> int:
    """Execute ``cfg``, write its CSV + JSON and print a one-line summary."""
    try:
        csv_text, summary, line = DISPATCH[cfg.experiment](cfg)
    except (ConfigError, ParameterError, ScheduleError, ex.TimingError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (NoMinimumError, FitError) as exc:
        print(f"analysis failure: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    summary = {"experiment": cfg.experiment, "config": cfg.to_dict(), "seed": cfg.seed, **summary}
    csv_path, json_path = write_result(cfg.output_dir, cfg.experiment, csv_text, summary, stamp)
    print(f"{line}  [{csv_path}]")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qreset", description="Pulsed qubit-reset simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*EXPERIMENTS, "validate"):
        sp = sub.add_parser(name, help="check a config file" if name == "validate" else f"run {name}")
        sp.add_argument("--config", help="INI run file")
        sp.add_argument("--seed", type=int, help="override [run] seed")
        sp.add_argument("--out", help="override output directory")
        sp.add_argument("--dt", type=float, help="override integrator step (ns)")
    return parser


def _resolve(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config) if args.command == "validate" else _load_for(args.config, args.command)
    elif args.command == "validate":
        raise ConfigError("validate needs --config")
    else:
        cfg = parse_config(f"[experiment]\ntype = {args.command}\n")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.dt is not None:
        try:
            cfg.integrator = dataclasses.replace(cfg.integrator, dt=args.dt)
        except ValueError as exc:
            raise ConfigError(f"--dt: {exc}") from None
    return cfg


def _load_for(path: str, command: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    if "[experiment]" not in text:
        text += f"\n[experiment]\ntype = {command}\n"
    cfg = parse_config(text)
    if cfg.experiment != command:
        raise ConfigError(f"experiment.type: config describes {cfg.experiment!r} but the command is {command!r}")
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.experiment} config is valid")
        return EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
