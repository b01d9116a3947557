import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qreset.device import DeviceParams, collapse_operators, derived_frequencies
from qreset.lindblad import (IntegratorCfg, NonConvergenceError, apply_superoperator, evolve,
                             frame_phase_bookkeeping, lindblad_rhs, liouvillian, pulse_duration_sweep,
                             schedule_superoperator, segment_frames)
from qreset.pulses import Envelope, IdealRotation, Idle, Pulse, ResetConfig, Schedule, reset_sequence
from qreset.quantum import HilbertSpec, basis_dm, check_density_matrix

SPEC = HilbertSpec()
P = DeviceParams()
DECOUPLED = DeviceParams(g_coupling=0.0, dressed_frequencies=False)
COARSE = IntegratorCfg(dt=1000.0, sample_every=1)


def _random_rho(seed, d):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = M @ M.conj().T
    return rho / np.trace(rho)


# --- right-hand side -------------------------------------------------------------

def test_rhs_two_level_decay():
    gamma = 0.3
    L = math.sqrt(gamma) * np.array([[0, 1], [0, 0]], dtype=complex)
    rho = np.diag([0.0, 1.0]).astype(complex)
    assert np.allclose(lindblad_rhs(rho, np.zeros((2, 2)), [L]), np.diag([gamma, -gamma]))


def test_rhs_pure_hamiltonian():
    H = np.array([[0, 1], [1, 0]], dtype=complex)
    rho = np.diag([1.0, 0.0]).astype(complex)
    assert np.allclose(lindblad_rhs(rho, H), [[0, 1j], [-1j, 0]])


def test_rhs_shape_errors():
    with pytest.raises(ValueError):
        lindblad_rhs(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        lindblad_rhs(np.eye(2), np.eye(2), [np.eye(3)])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_rhs_trace_free_and_hermitian(seed):
    rho = _random_rho(seed, 12)
    rng = np.random.default_rng(seed + 1)
    A = rng.normal(size=(12, 12))
    H = A + A.T
    out = lindblad_rhs(rho, H, collapse_operators(P, SPEC))
    assert abs(np.trace(out)) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_liouvillian_matches_rhs(seed):
    d = 4
    rho = _random_rho(seed, d)
    rng = np.random.default_rng(seed + 7)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = A + A.conj().T
    Ls = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(2)]
    vec = liouvillian(H, Ls) @ rho.reshape(-1)
    assert np.allclose(vec.reshape(d, d), lindblad_rhs(rho, H, Ls), atol=1e-12)


def test_integrator_cfg_validation():
    with pytest.raises(ValueError):
        IntegratorCfg(dt=0.0)
    with pytest.raises(ValueError):
        IntegratorCfg(sample_every=0)
    with pytest.raises(ValueError):
        IntegratorCfg(method="euler")


def test_evolve_rejects_invalid_state():
    with pytest.raises(ValueError):
        evolve(2 * basis_dm(0, 0, SPEC), Schedule.sequential(Idle(10.0)), P)


# --- analytic relaxation oracles ---------------------------------------------------

def test_e_decay_exponential():
    t1 = P.t1_eg * 1000
    tr = evolve(basis_dm(1, 0, SPEC), Schedule.sequential(Idle(3 * t1)), DECOUPLED, cfg=COARSE)
    expected = np.exp(-tr.times / t1)
    assert np.max(np.abs(tr.transmon_pops[:, 1] - expected) / expected) < 1e-6
    assert tr.times[-1] == pytest.approx(3 * t1)


def test_f_cascade():
    ge, gf = 1 / (P.t1_eg * 1000), 1 / (P.t1_fe * 1000)
    tr = evolve(basis_dm(2, 0, SPEC), Schedule.sequential(Idle(3 / gf)), DECOUPLED, cfg=COARSE)
    t = tr.times
    pf = np.exp(-gf * t)
    pe = gf / (ge - gf) * (np.exp(-gf * t) - np.exp(-ge * t))
    assert np.max(np.abs(tr.transmon_pops[:, 2] - pf) / pf) < 1e-6
    assert np.max(np.abs(tr.transmon_pops[1:, 1] - pe[1:]) / pe[1:]) < 1e-6


def test_resonator_photon_decay():
    kappa = P.kappa_r / 1000
    cfg = IntegratorCfg(dt=10.0, sample_every=1)
    tr = evolve(basis_dm(0, 1, SPEC), Schedule.sequential(Idle(3 / kappa)), DECOUPLED, cfg=cfg)
    expected = np.exp(-kappa * tr.times)
    assert np.max(np.abs(tr.resonator_pops[:, 1] - expected) / expected) < 1e-6


def test_two_photon_decay():
    kappa = P.kappa_r / 1000
    cfg = IntegratorCfg(dt=10.0, sample_every=1)
    tr = evolve(basis_dm(0, 2, SPEC), Schedule.sequential(Idle(2 / kappa)), DECOUPLED, cfg=cfg)
    t = tr.times
    # n=2 empties at 2 kappa and feeds n=1
    assert np.allclose(tr.resonator_pops[:, 2], np.exp(-2 * kappa * t), rtol=1e-6)
    assert np.allclose(tr.resonator_pops[:, 1], 2 * (np.exp(-kappa * t) - np.exp(-2 * kappa * t)), atol=1e-9)


# --- coherent oracles ---------------------------------------------------------------

def test_weak_resonant_drive_rabi():
    amp, T = 0.004, 125.0  # 2 pi amp T = pi
    pulse = Pulse(Envelope("square", T), amp, carrier="ge")
    tr = evolve(basis_dm(0, 0, SPEC), Schedule.sequential(pulse), DECOUPLED,
                cfg=IntegratorCfg(dt=0.05, sample_every=20), dissipative=False)
    expected = np.sin(math.pi * amp * tr.times) ** 2
    assert np.max(np.abs(tr.transmon_pops[:, 1] - expected)) < 5e-4
    assert tr.transmon_pops[-1, 1] > 0.999


def test_ideal_rotation_swaps_populations():
    s = Schedule.sequential(IdealRotation("ef"))
    tr = evolve(basis_dm(1, 0, SPEC), s, P, cfg=IntegratorCfg(sample_every=None))
    assert tr.transmon_pops[-1, 2] == pytest.approx(1.0, abs=1e-12)


def test_frame_change_bookkeeping_is_invisible():
    # a zero-angle ef rotation switches the frame for the second half of the idle
    half = IdealRotation("ge", math.pi / 2)
    probe = Pulse(Envelope("square", 20.0, ramp=2.0), 0.01, phase=0.3, carrier="ge")
    cfg = IntegratorCfg(dt=0.05, sample_every=None)
    plain = Schedule.sequential(half, Idle(10.0), probe)
    switched = Schedule.sequential(half, Idle(5.0), IdealRotation("ef", 0.0), Idle(5.0), probe)
    a = evolve(basis_dm(0, 0, SPEC), plain, P, cfg=cfg).final_state
    b = evolve(basis_dm(0, 0, SPEC), switched, P, cfg=cfg).final_state
    assert np.max(np.abs(a - b)) < 1e-9


def test_frame_phase_bookkeeping_values():
    s = reset_sequence(P, ResetConfig(f0g1_amplitude=0.65))
    frames, starts, first = segment_frames(s, P)
    f = derived_frequencies(P)
    assert np.allclose(frames, [f.omega_ef, f.omega_f0g1, f.omega_f0g1])
    assert np.allclose(starts, [0.0, 0.0, 120.0])
    phases = frame_phase_bookkeeping(s, P)
    assert np.allclose(phases, 2 * math.pi * (frames - f.omega_ef) * starts)


def test_rk4_cross_check():
    pulse = Pulse(Envelope("square", 20.0, ramp=5.0), 0.65, carrier="f0g1", freq_offset=-0.0266)
    s = Schedule.sequential(pulse)
    rho0 = basis_dm(2, 0, SPEC)
    a = evolve(rho0, s, P, cfg=IntegratorCfg(dt=0.05, sample_every=None)).final_state
    b = evolve(rho0, s, P, cfg=IntegratorCfg(dt=0.002, sample_every=None, method="rk4")).final_state
    assert np.max(np.abs(np.diag(a).real - np.diag(b).real)) < 1e-6
    # coherences rotate at up to ~90 rad/ns in this frame and converge more slowly
    assert np.max(np.abs(a - b)) < 1e-5


def test_dt_halving_convergence():
    pulse = Pulse(Envelope("square", 60.0, ramp=5.0), 0.65, carrier="f0g1", freq_offset=-0.0266)
    s = Schedule.sequential(pulse, Idle(50.0))
    cfg = IntegratorCfg(dt=0.05, sample_every=20, convergence_check=True, convergence_tol=1e-6)
    tr = evolve(basis_dm(2, 0, SPEC), s, P, cfg=cfg)
    assert tr.trace_error < 1e-10
    strict = IntegratorCfg(dt=1.0, sample_every=5, convergence_check=True, convergence_tol=1e-14)
    with pytest.raises(NonConvergenceError):
        evolve(basis_dm(2, 0, SPEC), s, P, cfg=strict)


def test_reset_sequence_keeps_physical_state():
    s = reset_sequence(P, ResetConfig(f0g1_amplitude=0.654, f0g1_stark_shift=-0.0266, idle_after=200.0))
    tr = evolve(basis_dm(1, 0, SPEC), s, P, cfg=IntegratorCfg(sample_every=100))
    assert tr.trace_error < 1e-10
    assert tr.hermiticity_error < 1e-10
    assert tr.min_eigenvalue > -1e-10
    check_density_matrix(tr.final_state, SPEC)
    # most of the excitation has left through the resonator
    assert tr.excited[-1] < 0.02


def test_schedule_superoperator_matches_evolve():
    s = Schedule.sequential(IdealRotation("ef"), Pulse(Envelope("square", 30.0, ramp=5.0), 0.65,
                                                          carrier="f0g1"), Idle(20.0))
    rho0 = basis_dm(1, 0, SPEC)
    S, frame = schedule_superoperator(s, P)
    tr = evolve(rho0, s, P, cfg=IntegratorCfg(sample_every=None))
    assert np.allclose(apply_superoperator(S, rho0), tr.final_state, atol=1e-12)
    assert frame == pytest.approx(tr.final_frame)


def test_pulse_duration_sweep_matches_evolve():
    base = Pulse(Envelope("square", 40.0, ramp=5.0), 0.65, carrier="f0g1", freq_offset=-0.0266)
    durations = [30.0, 10.0, 40.0]
    rho0 = basis_dm(2, 0, SPEC)
    swept = pulse_duration_sweep(rho0, base, durations, P)
    for T, rho in zip(durations, swept):
        pulse = Pulse(Envelope("square", T, ramp=5.0), 0.65, carrier="f0g1", freq_offset=-0.0266)
        ref = evolve(rho0, Schedule.sequential(pulse), P, cfg=IntegratorCfg(sample_every=None)).final_state
        assert np.max(np.abs(rho - ref)) < 1e-10
    with pytest.raises(ValueError):
        pulse_duration_sweep(rho0, base, [8.0], P)
    with pytest.raises(ValueError):
        pulse_duration_sweep(rho0, Pulse(Envelope("gaussian", 40.0), 0.1), [40.0], P)


def test_time_trace_csv():
    tr = evolve(basis_dm(1, 0, SPEC), Schedule.sequential(Idle(100.0)), P, cfg=IntegratorCfg(dt=10.0, sample_every=5))
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t_ns,p_g,p_e,p_f,p_h,r0,r1,r2,trace_err"
    assert len(lines) == 1 + len(tr.times) == 4
