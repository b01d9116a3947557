"""Virtual experiments: calibration scans, reset traces and trigger-rate runs.

Every experiment starts from a fully specified device and returns plain
dataclasses with numpy arrays; file output lives in :mod:`qreset.results`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .device import (NS_PER_US, TWO_PI, DeviceParams, DriveSpec, bare_frequencies, build_hamiltonian,
                     carrier_frequency, derived_frequencies, effective_coupling)
from .fitting import FitResult, fit_damped_sinusoid, fit_lorentzian, fit_quadratic, first_minimum
from .lindblad import (IntegratorCfg, NonConvergenceError, TimeTrace, _generator, _rotation_super, evolve,
                       pulse_duration_sweep, schedule_superoperator)
from .pulses import (Envelope, IdealRotation, Idle, Pulse, ResetConfig, Schedule,
                     estimate_f0g1_amplitude, reset_sequence)
from .quantum import HilbertSpec, basis_dm, populations, thermal_state
from .readout import (LinearBoundary, PopulationEstimate, ReadoutModel, ShotSet,
                      assignment_fidelity, population_estimate, readout_shots, train_classifier)


class TimingError(ValueError):
    pass


class CalibrationError(NonConvergenceError):
    pass


def free_decay_params(p: DeviceParams) -> DeviceParams:
    """Device used for undriven epochs: qubit and resonator decoupled.

    The quoted T1 values are measured lifetimes that already contain any
    resonator-induced decay; keeping the coupling during long free epochs
    would count that channel twice.
    """
    return p.replace(g_coupling=0.0)


def excited_population(rho: np.ndarray, spec: HilbertSpec) -> float:
    """``1 - p_g`` of the transmon marginal."""
    return float(1.0 - populations(rho, spec)[0][0])


def prepared_f0(spec: HilbertSpec) -> np.ndarray:
    return basis_dm(2, 0, spec)


# --- ac-Stark calibration -------------------------------------------------------

def _f0g1_gap(p: DeviceParams, amplitude: float, shift: float, spec: HilbertSpec) -> float:
    nominal = derived_frequencies(p).omega_f0g1
    H = build_hamiltonian(p, DriveSpec(nominal, amplitude, 0.0, shift), None, spec)
    evals, evecs = np.linalg.eigh(H)
    weight = (np.abs(evecs[spec.index(2, 0)]) ** 2 + np.abs(evecs[spec.index(0, 1)]) ** 2)
    i, j = np.argsort(weight)[-2:]
    return abs(evals[i] - evals[j]) / TWO_PI


def find_f0g1_resonance(p: DeviceParams, amplitude: float, spec: HilbertSpec = HilbertSpec(),
                        window: float = 0.12, coarse_step: float = 2e-4) -> float:
    """Drive-frequency shift (GHz) that makes ``|f0>`` and ``|g1>`` degenerate.

    Found as the minimum splitting of the two dressed states carrying the
    ``{f0, g1}`` weight (closed system), i.e. the ac-Stark-compensated
    f0g1 frequency is ``omega_f0g1 + shift``.
    """
    shifts = np.arange(-window, 0.25 * window + coarse_step / 2, coarse_step)
    gaps = np.array([_f0g1_gap(p, amplitude, s, spec) for s in shifts])
    k = int(np.argmin(gaps))
    lo, hi = shifts[max(k - 1, 0)], shifts[min(k + 1, len(shifts) - 1)]
    res = minimize_scalar(lambda s: _f0g1_gap(p, amplitude, s, spec), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-11})
    return float(res.x)


@dataclass
class EffectiveModelComparison:
    amplitudes: np.ndarray
    full_frequency: np.ndarray       # GHz, closed-system f0 <-> g1 oscillation frequency
    effective_frequency: np.ndarray  # GHz, 2|g~| at the Hamiltonian's own parameters
    measured_frequency: np.ndarray   # GHz, 2|g~| at the quoted (dressed) frequencies

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.full_frequency / self.effective_frequency - 1.0)

    @property
    def relative_error_measured(self) -> np.ndarray:
        return np.abs(self.full_frequency / self.measured_frequency - 1.0)


def effective_model_comparison(p: DeviceParams, amplitudes,
                               spec: HilbertSpec = HilbertSpec()) -> EffectiveModelComparison:
    """Closed-system f0 <-> g1 oscillation frequency against ``2|g~|``.

    On the Stark-compensated line the population swaps at the splitting
    of the two dressed states, which is exact for the full Hamiltonian.
    The effective coupling is evaluated twice: with the bare parameters
    that define the Hamiltonian (the perturbative comparison) and with the
    quoted transition frequencies.
    """
    amplitudes = np.asarray(amplitudes, float)
    wge, alpha, wr = bare_frequencies(p)
    bare = p.replace(omega_ge=wge, alpha=alpha, omega_r=wr, dressed_frequencies=False)
    full, eff, meas = [], [], []
    for a in amplitudes:
        shift = find_f0g1_resonance(p, a, spec)
        full.append(_f0g1_gap(p, a, shift, spec))
        eff.append(2.0 * abs(effective_coupling(bare, a)))
        meas.append(2.0 * abs(effective_coupling(p, a)))
    return EffectiveModelComparison(amplitudes, np.array(full), np.array(eff), np.array(meas))


# --- spectroscopy ---------------------------------------------------------------------

@dataclass
class SpectroscopyMap:
    amplitudes: np.ndarray       # GHz, signed: negative means phase pi
    frequencies: np.ndarray      # GHz, absolute drive frequency
    qubit_population: np.ndarray  # (n_amp, n_freq), 1 - p_g after the probe
    probe_duration: float = 10_000.0

    def to_csv(self) -> str:
        lines = ["amplitude_ghz,frequency_ghz,excited_population"]
        for i, a in enumerate(self.amplitudes):
            for j, f in enumerate(self.frequencies):
                lines.append(f"{a:.12g},{f:.12g},{self.qubit_population[i, j]:.12g}")
        return "\n".join(lines) + "\n"


@dataclass
class SpectroscopyFit:
    amplitudes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    line_fits: list
    quadratic: FitResult

    @property
    def resonance_at_zero(self) -> float:
        return self.quadratic.params["c0"]

    def to_dict(self) -> dict:
        return {"amplitudes": self.amplitudes.tolist(), "centers": self.centers.tolist(),
                "widths": self.widths.tolist(), "quadratic": self.quadratic.to_dict(),
                "resonance_at_zero_ghz": self.resonance_at_zero}


def spectroscopy_scan(p: DeviceParams, amps, freqs, probe_duration: float = 10_000.0,
                      spec: HilbertSpec = HilbertSpec(), ramp: float = 0.0,
                      cfg: IntegratorCfg = IntegratorCfg()) -> SpectroscopyMap:
    """Qubit population after a long f0g1 probe, over an amplitude x frequency grid.

    The transmon starts in ``|f>`` (ideal g->e and e->f pi pulses) and the
    probe is a square pulse of ``probe_duration`` ns.  Negative amplitudes
    are applied with phase pi.
    """
    amps = np.asarray(amps, float)
    freqs = np.asarray(freqs, float)
    nominal = carrier_frequency(p, "f0g1")
    prep = Schedule.sequential(IdealRotation("ge"), IdealRotation("ef"))
    rho_f = evolve(basis_dm(0, 0, spec), prep, p, spec, IntegratorCfg(sample_every=None)).final_state
    out = np.empty((amps.size, freqs.size))
    final_only = replace(cfg, sample_every=None, convergence_check=False)
    for i, a in enumerate(amps):
        for j, f in enumerate(freqs):
            pulse = Pulse(Envelope("square", probe_duration, ramp=ramp), abs(a),
                          math.pi if a < 0 else 0.0, "f0g1", f - nominal)
            trace = evolve(rho_f, Schedule((pulse,)), p, spec, final_only)
            out[i, j] = trace.excited[-1]
    return SpectroscopyMap(amps, freqs, out, probe_duration)


def fit_spectroscopy(smap: SpectroscopyMap, min_amplitude: float = 0.0) -> SpectroscopyFit:
    """Lorentzian per amplitude row, then a quadratic of centre vs amplitude.

    Rows with ``|amplitude| <= min_amplitude`` (no visible line) are skipped.
    """
    keep, centers, widths, fits = [], [], [], []
    for i, a in enumerate(smap.amplitudes):
        if abs(a) <= min_amplitude:
            continue
        res = fit_lorentzian(smap.frequencies, smap.qubit_population[i])
        keep.append(a)
        centers.append(res.params["center"])
        widths.append(res.params["width"])
        fits.append(res)
    keep = np.array(keep)
    centers = np.array(centers)
    quad = fit_quadratic(keep, centers)
    return SpectroscopyFit(keep, centers, np.array(widths), fits, quad)


# --- time-resolved Rabi --------------------------------------------------------------------

@dataclass
class RabiResult:
    durations: np.ndarray
    excited: np.ndarray          # 1 - p_g at the end of each pulse
    f_population: np.ndarray
    t_opt: float
    residual: float
    fit: FitResult | None
    amplitude: float
    freq_offset: float

    @property
    def rabi_rate(self) -> float:
        """Fitted oscillation frequency of the qubit population (1/us)."""
        return float("nan") if self.fit is None else self.fit.params["freq_per_us"]

    def to_csv(self) -> str:
        lines = ["duration_ns,excited_population,p_f"]
        for t, y, f in zip(self.durations, self.excited, self.f_population):
            lines.append(f"{t:.12g},{y:.12g},{f:.12g}")
        return "\n".join(lines) + "\n"


def time_rabi(p: DeviceParams, amp: float, freq_offset: float, durations,
              spec: HilbertSpec = HilbertSpec(), ramp: float = 5.0,
              cfg: IntegratorCfg = IntegratorCfg(), fit: bool = True,
              window: float | None = 6.0) -> RabiResult:
    """Qubit population vs f0g1 pulse length from ``|f0>``.

    ``freq_offset`` is relative to the nominal f0g1 frequency (Stark
    compensation plus any mismatch).  The first minimum of ``1 - p_g`` is
    the optimal reset duration; ``window`` (ns) sets the smoothing used to
    locate it under the fast micromotion ripple (see :func:`first_minimum`).

    Raises
    ------
    NoMinimumError
        When the transfer is overdamped and the population never turns up.
    """
    durations = np.asarray(durations, float)
    pulse = Pulse(Envelope("square", float(durations.max()), ramp=ramp), amp, 0.0, "f0g1", freq_offset)
    states = pulse_duration_sweep(prepared_f0(spec), pulse, durations, p, spec, cfg)
    tpops = np.array([populations(r, spec)[0] for r in states])
    excited = 1.0 - tpops[:, 0]
    t_opt, residual = first_minimum(durations, excited, window)
    fit_res = fit_damped_sinusoid(durations, excited) if fit and durations.size >= 10 else None
    return RabiResult(durations, excited, tpops[:, 2], t_opt, residual, fit_res, amp, freq_offset)


@dataclass
class ResetCalibration:
    amplitude: float
    stark_shift: float
    t_opt: float
    residual_at_minimum: float
    iterations: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def calibrate_reset(p: DeviceParams, duration: float = 120.0, ramp: float = 5.0,
                    spec: HilbertSpec = HilbertSpec(), cfg: IntegratorCfg = IntegratorCfg(),
                    tol: float = 0.02, max_iter: int = 20) -> ResetCalibration:
    """Find the f0g1 amplitude whose first transfer minimum falls at ``duration``.

    Each iteration re-centres the drive on the ac-Stark-shifted line and
    rescales the amplitude by the ratio of effective pulse areas.
    """
    amp = estimate_f0g1_amplitude(p, duration, ramp)
    grid = np.arange(max(2 * ramp, 0.5 * duration), 1.6 * duration, 0.25)
    prev = None
    for it in range(1, max_iter + 1):
        shift = find_f0g1_resonance(p, amp, spec)
        r = time_rabi(p, amp, shift, grid, spec, ramp, cfg, fit=False)
        if abs(r.t_opt - duration) < tol:
            return ResetCalibration(amp, shift, r.t_opt, r.residual, it)
        if prev is not None and prev[1] != r.t_opt:
            # secant on t_opt(amp)
            slope = (r.t_opt - prev[1]) / (amp - prev[0])
            prev, amp = (amp, r.t_opt), amp + (duration - r.t_opt) / slope
        else:
            prev, amp = (amp, r.t_opt), amp * (r.t_opt - ramp) / (duration - ramp)
    raise CalibrationError(f"reset calibration did not converge; last t_opt={r.t_opt:.3f} ns")


# --- reset trace ----------------------------------------------------------------------------

@dataclass
class ResetTraceResult:
    pulsed: TimeTrace
    free_decay: TimeTrace
    difference: np.ndarray       # pulsed minus free excited population on pulsed.times
    residual: float
    config: ResetConfig
    schedule: Schedule
    calibration: ResetCalibration | None = None

    @property
    def times(self) -> np.ndarray:
        return self.pulsed.times

    def to_csv(self) -> str:
        free = np.interp(self.times, self.free_decay.times, self.free_decay.excited)
        lines = ["t_ns,pulsed_excited,free_excited,difference"]
        for t, a, b, d in zip(self.times, self.pulsed.excited, free, self.difference):
            lines.append(f"{t:.12g},{a:.12g},{b:.12g},{d:.12g}")
        return "\n".join(lines) + "\n"


def calibrated_reset_config(p: DeviceParams, cfg: ResetConfig = ResetConfig(),
                            spec: HilbertSpec = HilbertSpec(),
                            integ: IntegratorCfg = IntegratorCfg()) -> tuple[ResetConfig, ResetCalibration]:
    cal = calibrate_reset(p, cfg.f0g1_duration, cfg.f0g1_ramp, spec, integ)
    return cfg.replace(f0g1_amplitude=cal.amplitude, f0g1_stark_shift=cal.stark_shift), cal


def reset_trace(p: DeviceParams, cfg: ResetConfig = ResetConfig(), mismatch: float = 0.0,
                spec: HilbertSpec = HilbertSpec(), integ: IntegratorCfg = IntegratorCfg(),
                calibrate: bool = True) -> ResetTraceResult:
    """Pulsed reset of ``|e>`` against free decay over the same window.

    With ``calibrate`` the f0g1 amplitude and Stark shift are calibrated
    first (overriding the values in ``cfg``); ``mismatch`` (GHz) is then
    added to the calibrated drive frequency.  The trace starts after the
    e->f shelving rotation.  The free-decay reference evolves the
    decoupled device (see :func:`free_decay_params`).
    """
    cal = None
    if calibrate:
        cfg, cal = calibrated_reset_config(p, cfg, spec, integ)
    cfg = cfg.replace(f0g1_freq_offset=mismatch)
    schedule = reset_sequence(p, cfg)
    rho_e = basis_dm(1, 0, spec)
    pulsed = evolve(rho_e, schedule, p, spec, integ)
    free = evolve(rho_e, Schedule((Idle(schedule.dynamic_duration),)), free_decay_params(p), spec, integ)
    diff = pulsed.excited - np.interp(pulsed.times, free.times, free.excited)
    return ResetTraceResult(pulsed, free, diff, float(pulsed.excited[-1]), cfg, schedule, cal)


# --- trigger-rate experiment --------------------------------------------------------------

@dataclass
class TriggerScanResult:
    rates_khz: np.ndarray
    population: np.ndarray           # steady-state excited population at readout
    round_populations: np.ndarray    # (n_rates, rounds)
    with_reset: bool

    def to_csv(self) -> str:
        lines = ["rate_khz,excited_population"]
        for r, v in zip(self.rates_khz, self.population):
            lines.append(f"{r:.12g},{v:.12g}")
        return "\n".join(lines) + "\n"


class _RoundMap:
    """Superoperator bookkeeping for repeated experiment rounds."""

    def __init__(self, p: DeviceParams, spec: HilbertSpec):
        self.p, self.spec = p, spec
        self.L0 = _generator(free_decay_params(p), spec, p.omega_ge, True).L0
        self.rho_th = thermal_state(spec, p.p_thermal_e)
        self.ground = basis_dm(0, 0, spec)
        self._cache: dict[float, np.ndarray] = {}

    def free(self, rho: np.ndarray, t: float) -> np.ndarray:
        """T1 decay for ``t`` ns, then relaxation toward the thermal floor."""
        if t <= 0:
            return rho
        key = round(t, 6)
        if key not in self._cache:
            self._cache[key] = expm(self.L0 * t)
        d = self.spec.dim
        rho = (self._cache[key] @ rho.reshape(-1)).reshape(d, d)
        w = math.exp(-t / (self.p.t1_eg * NS_PER_US))
        return rho + (1.0 - w) * (self.rho_th - self.ground)

    @staticmethod
    def project(rho: np.ndarray) -> np.ndarray:
        return np.diag(np.diag(rho))


def trigger_rate_experiment(p: DeviceParams, rates_khz, with_reset: bool, rounds: int = 30,
                            reset_cfg: ResetConfig | None = None, mismatch: float = 0.0,
                            x_over_rotation: float = 0.0, readout_duration: float = 5000.0,
                            spec: HilbertSpec = HilbertSpec(),
                            integ: IntegratorCfg = IntegratorCfg()) -> TriggerScanResult:
    """Steady-state qubit population at readout for a range of trigger rates.

    Each round pairs two triggered experiments ``1/R`` apart: the first
    applies an ideal ``X_pi^{g->e}`` and a readout; the second optionally
    runs the reset sequence and then reads out, and its population is the
    one reported.  Readouts project onto the energy basis and last
    ``readout_duration`` ns of free decay.  Free decay is followed by an
    analytic relaxation toward ``p_thermal_e`` at rate ``1/T1_eg``.

    ``mismatch`` and ``x_over_rotation`` are injected into the reset pulses;
    an uncalibrated ``reset_cfg`` (amplitude ``None``) is calibrated first.
    """
    rates = np.asarray(rates_khz, float)
    if np.any(rates <= 0):
        raise ValueError("trigger rates must be positive")
    rmap = _RoundMap(p, spec)
    reset_S = None
    reset_len = 0.0
    reset_dyn = 0.0
    if with_reset:
        cfg = reset_cfg or ResetConfig()
        if cfg.f0g1_amplitude is None:
            cfg, _ = calibrated_reset_config(p, cfg, spec, integ)
        cfg = cfg.replace(f0g1_freq_offset=mismatch, x_over_rotation=x_over_rotation)
        sched = reset_sequence(p, cfg)
        reset_S, _ = schedule_superoperator(sched, p, spec, integ)
        reset_len = sched.duration
        reset_dyn = sched.dynamic_duration
    pi_ge = _rotation_super(IdealRotation("ge"), spec)
    d = spec.dim

    out = np.empty(rates.size)
    per_round = np.empty((rates.size, rounds))
    for i, rate in enumerate(rates):
        period = 1e6 / rate  # ns
        if period < reset_len + readout_duration:
            raise TimingError(f"1/R = {period:.0f} ns is shorter than the {reset_len + readout_duration:.0f} ns"
                              " reset + readout sequence")
        rho = rmap.rho_th.copy()
        for k in range(rounds):
            # experiment 1: pi pulse, readout, wait
            rho = (pi_ge @ rho.reshape(-1)).reshape(d, d)
            rho = rmap.free(rmap.project(rho), readout_duration)
            rho = rmap.free(rho, period - readout_duration)
            # experiment 2: optional reset, then readout
            if with_reset:
                rho = (reset_S @ rho.reshape(-1)).reshape(d, d)
                w = math.exp(-reset_dyn / (p.t1_eg * NS_PER_US))
                rho = rho + (1.0 - w) * (rmap.rho_th - rmap.ground)
            rho = rmap.project(rho)
            per_round[i, k] = excited_population(rho, spec)
            rho = rmap.free(rho, readout_duration)
            rho = rmap.free(rho, period - readout_duration - reset_len)
        out[i] = per_round[i, -1]
    return TriggerScanResult(rates, out, per_round, with_reset)


# --- thermal population ---------------------------------------------------------------------

@dataclass
class ThermalPopResult:
    estimate: float
    amplitude_thermal: float
    amplitude_pi: float
    angles: np.ndarray
    signal_thermal: np.ndarray
    signal_pi: np.ndarray

    def to_csv(self) -> str:
        lines = ["angle_rad,p_e_thermal_prep,p_e_pi_prep"]
        for a, s, q in zip(self.angles, self.signal_thermal, self.signal_pi):
            lines.append(f"{a:.12g},{s:.12g},{q:.12g}")
        return "\n".join(lines) + "\n"


def _cosine_amplitude(angles: np.ndarray, y: np.ndarray) -> float:
    A = np.column_stack([np.ones_like(angles), np.cos(angles), np.sin(angles)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1])


def thermal_population_measurement(p: DeviceParams, angles=None,
                                   spec: HilbertSpec = HilbertSpec()) -> ThermalPopResult:
    """Estimate ``p_e`` from e<->f Rabi amplitudes with and without a g->e pi pulse.

    The ``|e>`` population under an e-f rotation by ``beta`` oscillates as
    ``cos(beta)`` with amplitude ``(p_e - p_f)/2`` from the thermal state and
    ``(p_g - p_f)/2`` after a g-e pi pulse.  For a Boltzmann ladder
    ``p_k ∝ x**k`` the ratio is ``r = x / (1 + x)``, so ``x = r / (1 - r)``.
    """
    angles = np.linspace(0, 4 * np.pi, 41) if angles is None else np.asarray(angles, float)
    rho_th = thermal_state(spec, p.p_thermal_e)
    pi = _rotation_super(IdealRotation("ge"), spec)
    d = spec.dim
    rho_pi = (pi @ rho_th.reshape(-1)).reshape(d, d)
    sig_th, sig_pi = [], []
    for beta in angles:
        R = _rotation_super(IdealRotation("ef", beta), spec)
        for rho, sink in ((rho_th, sig_th), (rho_pi, sig_pi)):
            out = (R @ rho.reshape(-1)).reshape(d, d)
            sink.append(populations(out, spec)[0][1])
    sig_th, sig_pi = np.array(sig_th), np.array(sig_pi)
    a_th = _cosine_amplitude(angles, sig_th)
    a_pi = _cosine_amplitude(angles, sig_pi)
    r = a_th / a_pi if a_pi != 0 else 0.0
    x = r / (1.0 - r)
    estimate = x / np.sum(x ** np.arange(spec.n_transmon))
    return ThermalPopResult(float(estimate), a_th, a_pi, angles, sig_th, sig_pi)


# --- readout ------------------------------------------------------------------------------------

@dataclass
class ReadoutDemoResult:
    boundary: LinearBoundary
    fidelity: float
    calibration: ShotSet
    n_shots: int

    def to_csv(self) -> str:
        lines = ["i,q,label,called_excited"]
        calls = self.boundary.is_excited(self.calibration.points)
        for (i, q), lab, c in zip(self.calibration.points, self.calibration.true_label, calls):
            lines.append(f"{i:.12g},{q:.12g},{lab},{int(c)}")
        return "\n".join(lines) + "\n"


def readout_demo(model: ReadoutModel = ReadoutModel(), n_shots: int = 2000) -> ReadoutDemoResult:
    """Train the g/f discriminator on calibration shots and report its fidelity."""
    rng = np.random.default_rng(model.seed)
    shots_g = readout_shots([1.0, 0.0, 0.0], model, n_shots, rng)
    shots_f = readout_shots([0.0, 0.0, 1.0], model, n_shots, rng)
    b = train_classifier(shots_g, shots_f)
    cal = ShotSet.concat(shots_g, shots_f)
    return ReadoutDemoResult(b, assignment_fidelity(b, cal), cal, n_shots)


def measured_population(pops, boundary: LinearBoundary, model: ReadoutModel, n_shots: int = 2000,
                        seed: int = 1, repetitions: int = 200) -> PopulationEstimate:
    """Classify emulated shots of the populations ``pops`` (g, e, f, ...)."""
    rng = np.random.default_rng(seed)
    shots = readout_shots(pops, model, n_shots, rng)
    return population_estimate(boundary, shots, repetitions, seed)
