"""Fixed-step master-equation integration of a pulse schedule.

Each segment is simulated in the rotating frame of its own carrier; the
density matrix is carried across frame changes with the exact unitary
``exp(i dw t N)`` (``N`` the total excitation number), so a schedule mixing
ge, ef and f0g1 pulses composes deterministically.

Two stepping methods share one step grid, aligned to every segment and
envelope breakpoint:

``"expm"`` (default)
    exact Liouvillian exponential on constant-envelope pieces and
    fourth-order commutator Magnus steps (two per grid step) on ramps and
    gaussians.
``"rk4"``
    classical Runge-Kutta on the density matrix.  The rotating-frame
    spectrum reaches ~90 rad/ns at ``omega_d = omega_f0g1``, so this needs
    ``dt`` of a few ps to stay stable and accurate; it is kept as an
    independent cross-check of the exponential stepper.

Vectorization is row-major: ``vec(A X B) = (A kron B.T) vec(X)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .device import TWO_PI, DeviceParams, carrier_frequency, collapse_operators, hamiltonian_parts
from .pulses import IdealRotation, Idle, Pulse, Schedule
from .quantum import HilbertSpec, check_density_matrix, density_matrix_errors, excitation_number

SQRT3 = math.sqrt(3.0)
# Magnus sub-steps per grid step on time-dependent pieces; the rotating
# frame spectrum reaches ~90 rad/ns, so a full 0.05 ns step leaves ~1e-6 error
MAGNUS_SUBSTEPS = 2


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorCfg:
    dt: float = 0.05
    sample_every: int | None = 20
    convergence_check: bool = False
    convergence_tol: float = 1e-6
    method: str = "expm"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.sample_every is not None and self.sample_every < 1:
            raise ValueError(f"sample_every must be >= 1 or None, got {self.sample_every}")
        if self.method not in ("expm", "rk4"):
            raise ValueError(f"method must be 'expm' or 'rk4', got {self.method!r}")


@dataclass
class TimeTrace:
    """Sampled level populations from one integration."""

    times: np.ndarray
    transmon_pops: np.ndarray      # (n_samples, n_transmon)
    resonator_pops: np.ndarray     # (n_samples, n_resonator)
    trace_errors: np.ndarray       # |Tr rho - 1| per sample
    hermiticity_error: float
    min_eigenvalue: float
    final_state: np.ndarray = field(repr=False)
    final_frame: float = 0.0
    spec: HilbertSpec = HilbertSpec()

    @property
    def trace_error(self) -> float:
        return float(np.max(self.trace_errors))

    @property
    def excited(self) -> np.ndarray:
        """Total transmon excitation ``1 - p_g`` per sample."""
        return 1.0 - self.transmon_pops[:, 0]

    def columns(self) -> list[str]:
        return (["t_ns"] + [f"p_{s}" for s in self.spec.transmon_labels()]
                + [f"r{k}" for k in range(self.spec.n_resonator)] + ["trace_err"])

    def to_csv(self, path=None) -> str:
        """Write ``t_ns,p_g,p_e,p_f,p_h,r0,r1,r2,trace_err`` rows; returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for i, t in enumerate(self.times):
            row = [t, *self.transmon_pops[i], *self.resonator_pops[i], self.trace_errors[i]]
            writer.writerow([f"{v:.12g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


# --- superoperators -------------------------------------------------------------

def _commutator_super(H: np.ndarray) -> np.ndarray:
    eye = np.eye(H.shape[0])
    return -1j * (np.kron(H, eye) - np.kron(eye, H.T))


def _dissipator_super(collapses) -> np.ndarray:
    d = collapses[0].shape[0] if collapses else 0
    eye = np.eye(d)
    D = np.zeros((d * d, d * d), dtype=complex)
    for L in collapses:
        LdL = L.conj().T @ L
        D += np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)
    return D


def liouvillian(H: np.ndarray, collapses=()) -> np.ndarray:
    """Row-major Liouvillian superoperator of ``H`` and jump operators."""
    L = _commutator_super(np.asarray(H))
    if collapses:
        L = L + _dissipator_super([np.asarray(c) for c in collapses])
    return L


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, collapses=()) -> np.ndarray:
    """``-i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)``."""
    rho = np.asarray(rho)
    H = np.asarray(H)
    if rho.shape != H.shape or rho.ndim != 2:
        raise ValueError(f"shape mismatch: rho {rho.shape}, H {H.shape}")
    out = -1j * (H @ rho - rho @ H)
    for L in collapses:
        L = np.asarray(L)
        if L.shape != rho.shape:
            raise ValueError(f"collapse operator shape {L.shape} does not match rho {rho.shape}")
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


@lru_cache(maxsize=64)
def _dissipator_cached(p: DeviceParams, spec: HilbertSpec) -> np.ndarray:
    return _dissipator_super(collapse_operators(p, spec))


class _Generator:
    """``L(Omega) = L0 + Re(Omega) Dx + Im(Omega) Dy`` in one rotating frame."""

    def __init__(self, p: DeviceParams, spec: HilbertSpec, omega_d: float, dissipative: bool = True):
        H0, Hx, Hy = hamiltonian_parts(p, omega_d, spec)
        self.H0, self.Hx, self.Hy = H0, Hx, Hy
        self.collapses = collapse_operators(p, spec) if dissipative else []
        self.L0 = _commutator_super(H0)
        if dissipative:
            self.L0 = self.L0 + _dissipator_cached(p, spec)
        self.Dx = _commutator_super(Hx)
        self.Dy = _commutator_super(Hy)

    def __call__(self, omega: complex) -> np.ndarray:
        return self.L0 + omega.real * self.Dx + omega.imag * self.Dy

    def hamiltonian(self, omega: complex) -> np.ndarray:
        return self.H0 + omega.real * self.Hx + omega.imag * self.Hy


@lru_cache(maxsize=128)
def _generator(p: DeviceParams, spec: HilbertSpec, omega_d: float, dissipative: bool) -> _Generator:
    return _Generator(p, spec, omega_d, dissipative)


def _rotation_super(seg: IdealRotation, spec: HilbertSpec) -> np.ndarray:
    lo = 0 if seg.subspace == "ge" else 1
    beta = seg.effective_angle
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    u = np.eye(spec.n_transmon, dtype=complex)
    # exp(-i beta/2 (cos phi sx + sin phi sy)) on {lo, lo+1}
    u[lo, lo] = c
    u[lo + 1, lo + 1] = c
    u[lo, lo + 1] = -1j * s * np.exp(-1j * seg.phase)
    u[lo + 1, lo] = -1j * s * np.exp(1j * seg.phase)
    U = np.kron(u, np.eye(spec.n_resonator))
    return np.kron(U, U.conj())


# --- frames -----------------------------------------------------------------------

def segment_frames(schedule: Schedule, p: DeviceParams, initial_frame: float | None = None):
    """Rotating-frame frequency (GHz) and dynamic start time (ns) of each segment.

    Idle segments inherit the preceding frame; a leading idle uses the
    first carrier in the schedule (ge if none).
    """
    frames, starts = [], []
    first = initial_frame
    if first is None:
        for seg in schedule.segments:
            if isinstance(seg, Pulse):
                first = seg.frequency(p)
                break
            if isinstance(seg, IdealRotation):
                first = carrier_frequency(p, seg.subspace)
                break
        else:
            first = p.omega_ge
    current, t = first, 0.0
    for seg in schedule.segments:
        if isinstance(seg, Pulse):
            current = seg.frequency(p)
        elif isinstance(seg, IdealRotation):
            current = carrier_frequency(p, seg.subspace)
        frames.append(current)
        starts.append(t)
        t += seg.dynamic_duration
    return np.array(frames), np.array(starts), first


def frame_phase_bookkeeping(schedule: Schedule, p: DeviceParams,
                            reference: float | None = None) -> np.ndarray:
    """Accumulated frame phase ``2 pi (w_seg - w_ref) t_start`` of each segment (rad).

    ``reference`` defaults to the first segment's frame.  The change of
    frame entering segment ``k`` is ``exp(i (phi_k - phi'_{k-1}) N)`` where
    ``phi'_{k-1}`` is the previous frame's offset evaluated at ``t_start``.
    """
    frames, starts, first = segment_frames(schedule, p)
    ref = first if reference is None else reference
    return TWO_PI * (frames - ref) * starts


# --- stepping ----------------------------------------------------------------------

class _Stepper:
    def __init__(self, p, spec, cfg: IntegratorCfg, refine: int, dissipative: bool,
                 record: bool, state: np.ndarray):
        self.p, self.spec, self.cfg = p, spec, cfg
        self.refine = refine
        self.dissipative = dissipative
        self.record = record and cfg.sample_every is not None
        self.sample_every = (cfg.sample_every or 1) * refine
        self.state = state            # (d*d, k) columns
        self.t = 0.0
        self.step_count = 0
        self.samples_t: list[float] = []
        self.samples_rho: list[np.ndarray] = []
        self.number = excitation_number(spec)
        if self.record:
            self._sample()

    def _sample(self):
        d = self.spec.dim
        self.samples_t.append(self.t)
        self.samples_rho.append(self.state[:, 0].reshape(d, d).copy())

    def change_frame(self, dw: float):
        if dw == 0.0:
            return
        theta = TWO_PI * dw * self.t
        phase = np.exp(1j * theta * (self.number[:, None] - self.number[None, :])).reshape(-1)
        self.state = phase[:, None] * self.state

    def apply(self, S: np.ndarray):
        self.state = S @ self.state

    def _n_steps(self, duration: float) -> int:
        return self.refine * max(1, math.ceil(duration / self.cfg.dt - 1e-9))

    def _advance(self, h: float, n: int, step_fn, constant_super=None):
        """Advance ``n`` steps of size ``h``; sample on the global grid."""
        done = 0
        cache: dict[int, np.ndarray] = {}
        while done < n:
            if self.record:
                to_sample = self.sample_every - (self.step_count % self.sample_every)
                m = min(to_sample, n - done)
            else:
                m = n - done
            if constant_super is not None and self.cfg.method == "expm":
                if m not in cache:
                    cache[m] = expm(constant_super * (h * m))
                self.state = cache[m] @ self.state
                self.t += h * m
            else:
                for j in range(m):
                    self.state = step_fn(self.state, self.t + 0.0, h)
                    self.t += h
            done += m
            self.step_count += m
            if self.record and self.step_count % self.sample_every == 0:
                self._sample()

    def run_constant(self, gen: _Generator, omega: complex, duration: float):
        if duration <= 0:
            return
        n = self._n_steps(duration)
        h = duration / n
        if self.cfg.method == "expm":
            self._advance(h, n, None, constant_super=gen(omega))
        else:
            H = gen.hamiltonian(omega)
            self._advance(h, n, self._rk4_step(lambda t: H, gen.collapses))

    def run_varying(self, gen: _Generator, envelope, duration: float):
        """``envelope(t_local) -> complex`` over a piece starting now."""
        n = self._n_steps(duration)
        h = duration / n
        t0 = self.t
        if self.cfg.method == "expm":
            c1, c2 = 0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0

            def step(state, t, h):
                hs = h / MAGNUS_SUBSTEPS
                for k in range(MAGNUS_SUBSTEPS):
                    tl = t - t0 + k * hs
                    A1 = gen(envelope(tl + c1 * hs))
                    A2 = gen(envelope(tl + c2 * hs))
                    Om = 0.5 * hs * (A1 + A2) + (SQRT3 / 12.0) * hs * hs * (A2 @ A1 - A1 @ A2)
                    state = expm(Om) @ state
                return state
            self._advance(h, n, step)
        else:
            self._advance(h, n, self._rk4_step(lambda t: gen.hamiltonian(envelope(t - t0)),
                                               gen.collapses))

    def _rk4_step(self, H_of_t, collapses):
        d = self.spec.dim

        def f(t, rho):
            return lindblad_rhs(rho, H_of_t(t), collapses)

        def step(state, t, h):
            cols = []
            for c in range(state.shape[1]):
                rho = state[:, c].reshape(d, d)
                k1 = f(t, rho)
                k2 = f(t + h / 2, rho + h / 2 * k1)
                k3 = f(t + h / 2, rho + h / 2 * k2)
                k4 = f(t + h, rho + h * k3)
                cols.append((rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)).reshape(-1))
            return np.stack(cols, axis=1)
        return step


def _run(state, schedule, p, spec, cfg, initial_frame, refine, dissipative, record):
    frames, _, first = segment_frames(schedule, p, initial_frame)
    st = _Stepper(p, spec, cfg, refine, dissipative, record, state)
    current = first
    for seg, frame in zip(schedule.segments, frames):
        st.change_frame(frame - current)
        current = frame
        if isinstance(seg, IdealRotation):
            st.apply(_rotation_super(seg, spec))
            continue
        gen = _generator(p, spec, float(frame), dissipative)
        if isinstance(seg, Idle):
            st.run_constant(gen, 0j, seg.duration)
            continue
        phase = np.exp(1j * seg.phase)
        for a, b, constant in seg.envelope.pieces():
            if constant:
                st.run_constant(gen, seg.amplitude * phase, b - a)
            else:
                def env(tl, a=a, seg=seg):
                    return complex(seg.amplitude * seg.envelope.shape(a + tl) * phase)
                st.run_varying(gen, env, b - a)
    if record and cfg.sample_every is not None and (not st.samples_t or st.samples_t[-1] < st.t):
        st._sample()
    return st, current


def _trace_from_samples(st: _Stepper, spec: HilbertSpec, final_frame: float) -> TimeTrace:
    d = spec.dim
    final = st.state[:, 0].reshape(d, d)
    rhos = st.samples_rho or [final]
    times = np.array(st.samples_t or [st.t])
    tpops = np.empty((len(rhos), spec.n_transmon))
    rpops = np.empty((len(rhos), spec.n_resonator))
    terr = np.empty(len(rhos))
    herm, mineig = 0.0, math.inf
    for i, rho in enumerate(rhos):
        diag = np.real(np.diagonal(rho)).reshape(spec.n_transmon, spec.n_resonator)
        tpops[i] = diag.sum(axis=1)
        rpops[i] = diag.sum(axis=0)
        te, he, me = density_matrix_errors(rho)
        terr[i] = te
        herm = max(herm, he)
        mineig = min(mineig, me)
    return TimeTrace(times, tpops, rpops, terr, herm, mineig, final.copy(), float(final_frame), spec)


def evolve(rho0: np.ndarray, schedule: Schedule, p: DeviceParams,
           spec: HilbertSpec = HilbertSpec(), cfg: IntegratorCfg = IntegratorCfg(),
           initial_frame: float | None = None, dissipative: bool = True) -> TimeTrace:
    """Integrate the master equation through ``schedule``.

    Parameters
    ----------
    rho0 : ndarray
        Initial density matrix, expressed in ``initial_frame``.
    schedule : Schedule
    p : DeviceParams
    spec : HilbertSpec
    cfg : IntegratorCfg
        With ``sample_every=None`` only the initial and final states are
        reported.  With ``convergence_check`` the run is repeated at
        ``dt/2`` and :class:`NonConvergenceError` is raised if any sampled
        population moves by more than ``convergence_tol``.
    initial_frame : float, optional
        Frame (GHz) of ``rho0``; defaults to the first segment's carrier.
        Irrelevant for diagonal initial states.
    dissipative : bool
        Drop all collapse operators when False.

    Returns
    -------
    TimeTrace
        Sample times are on the dynamic clock: ideal rotations take no time.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    check_density_matrix(rho0, spec)
    state = rho0.reshape(-1, 1).copy()
    st, frame = _run(state, schedule, p, spec, cfg, initial_frame, 1, dissipative, True)
    if cfg.sample_every is None:
        st.samples_t.insert(0, 0.0)
        st.samples_rho.insert(0, rho0.copy())
        st._sample()
    trace = _trace_from_samples(st, spec, frame)
    if cfg.convergence_check:
        fine, _ = _run(rho0.reshape(-1, 1).copy(), schedule, p, spec, cfg, initial_frame, 2,
                       dissipative, True)
        if cfg.sample_every is None:
            fine.samples_t.insert(0, 0.0)
            fine.samples_rho.insert(0, rho0.copy())
            fine._sample()
        fine_trace = _trace_from_samples(fine, spec, frame)
        if fine_trace.times.shape != trace.times.shape:
            raise NonConvergenceError("dt-halved run produced a different sample grid")
        diff = max(np.max(np.abs(fine_trace.transmon_pops - trace.transmon_pops)),
                   np.max(np.abs(fine_trace.resonator_pops - trace.resonator_pops)))
        if diff > cfg.convergence_tol:
            raise NonConvergenceError(
                f"halving dt changed populations by {diff:.3g} (> {cfg.convergence_tol:.3g})")
    return trace


def schedule_superoperator(schedule: Schedule, p: DeviceParams, spec: HilbertSpec = HilbertSpec(),
                           cfg: IntegratorCfg = IntegratorCfg(), initial_frame: float | None = None,
                           dissipative: bool = True) -> tuple[np.ndarray, float]:
    """Propagator ``S`` with ``vec(rho_final) = S vec(rho0)``, and the final frame (GHz)."""
    d2 = spec.dim ** 2
    st, frame = _run(np.eye(d2, dtype=complex), schedule, p, spec, cfg, initial_frame, 1,
                     dissipative, False)
    return st.state, frame


def apply_superoperator(S: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (S @ rho.reshape(-1)).reshape(d, d)


def pulse_duration_sweep(rho0: np.ndarray, pulse: Pulse, durations, p: DeviceParams,
                         spec: HilbertSpec = HilbertSpec(), cfg: IntegratorCfg = IntegratorCfg(),
                         dissipative: bool = True) -> list[np.ndarray]:
    """Final states of ``pulse`` truncated/extended to each total duration.

    The pulse must be square; its ramps are kept fixed and only the plateau
    changes, so the ramp propagators are computed once.  Every duration
    must be at least twice the ramp length.  States are returned in the
    pulse frame, in the order of ``durations``.
    """
    env = pulse.envelope
    if env.kind != "square":
        raise ValueError("duration sweeps need a square envelope")
    durations = np.asarray(durations, float)
    ramp = env.ramp
    if np.any(durations < 2 * ramp - 1e-9):
        raise ValueError(f"every duration must be >= 2*ramp = {2 * ramp} ns")
    rho0 = np.asarray(rho0, dtype=complex)
    check_density_matrix(rho0, spec)
    gen = _generator(p, spec, float(pulse.frequency(p)), dissipative)
    omega = pulse.amplitude * np.exp(1j * pulse.phase)
    d2 = spec.dim ** 2

    def ramp_super(rising: bool) -> np.ndarray:
        st = _Stepper(p, spec, cfg, 1, dissipative, False, np.eye(d2, dtype=complex))
        if rising:
            st.run_varying(gen, lambda tl: complex(omega * tl / ramp), ramp)
        else:
            st.run_varying(gen, lambda tl: complex(omega * (1.0 - tl / ramp)), ramp)
        return st.state

    S_up = ramp_super(True) if ramp > 0 else np.eye(d2, dtype=complex)
    S_down = ramp_super(False) if ramp > 0 else np.eye(d2, dtype=complex)
    L = gen(omega)
    order = np.argsort(durations, kind="stable")
    out: list[np.ndarray | None] = [None] * len(durations)
    v = S_up @ rho0.reshape(-1)
    plateau_done = 0.0
    cache: dict[float, np.ndarray] = {}
    for i in order:
        plateau = max(durations[i] - 2 * ramp, 0.0)
        step = round(plateau - plateau_done, 9)
        if step > 0:
            if step not in cache:
                cache[step] = expm(L * step)
            v = cache[step] @ v
            plateau_done = plateau
        out[i] = (S_down @ v).reshape(spec.dim, spec.dim)
    return out
