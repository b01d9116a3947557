import math

import numpy as np
import pytest
from scipy.linalg import expm

from qreset.device import DeviceParams, DriveSpec, build_hamiltonian, derived_frequencies
from qreset.experiments import (TimingError, effective_model_comparison, find_f0g1_resonance,
                                fit_spectroscopy, free_decay_params, measured_population, readout_demo,
                                spectroscopy_scan, thermal_population_measurement, time_rabi,
                                trigger_rate_experiment)
from qreset.fitting import NoMinimumError
from qreset.quantum import HilbertSpec, basis_ket
from qreset.readout import ReadoutModel

SPEC = HilbertSpec()
P = DeviceParams()


def test_free_decay_params_decouple():
    q = free_decay_params(P)
    assert q.g_coupling == 0.0
    assert (q.omega_ge, q.t1_eg, q.kappa_r) == (P.omega_ge, P.t1_eg, P.kappa_r)


def test_stark_shift_quadratic_at_small_amplitude():
    s1 = find_f0g1_resonance(P, 0.01)
    s2 = find_f0g1_resonance(P, 0.02)
    assert s1 < 0
    assert s2 / s1 == pytest.approx(4.0, rel=0.01)


def test_effective_model_against_time_domain():
    amp = 0.02
    cmp = effective_model_comparison(P, [amp])
    shift = find_f0g1_resonance(P, amp)
    H = build_hamiltonian(P, DriveSpec(derived_frequencies(P).omega_f0g1, amp, 0.0, shift), spec=SPEC)
    psi0 = basis_ket(2, 0, SPEC)
    period = 1.0 / cmp.full_frequency[0]
    times = np.linspace(0, 1.5 * period, 601)
    U = expm(-1j * H * (times[1] - times[0]))
    pf, psi = [], psi0.astype(complex)
    for _ in times:
        pf.append(abs(psi[SPEC.index(2, 0)]) ** 2)
        psi = U @ psi
    pf = np.array(pf)
    # first return of the f0 population marks one oscillation period
    k = np.argmax(pf[len(times) // 2:]) + len(times) // 2
    assert times[k] == pytest.approx(period, rel=0.01)
    assert pf.min() < 0.01


def test_effective_model_accuracy():
    cmp = effective_model_comparison(P, [0.02, 0.01, 0.005])
    assert np.all(cmp.relative_error < 0.05)
    assert np.all(cmp.relative_error_measured < 0.05)


def test_spectroscopy_zero_amplitude_is_free_decay():
    q = free_decay_params(P)
    T = 2000.0
    smap = spectroscopy_scan(q, [0.0], [2.63, 2.64], probe_duration=T)
    ge, gf = 1 / (q.t1_eg * 1000), 1 / (q.t1_fe * 1000)
    pf = math.exp(-gf * T)
    pe = gf / (ge - gf) * (math.exp(-gf * T) - math.exp(-ge * T))
    assert np.allclose(smap.qubit_population, pf + pe, rtol=1e-6)
    assert smap.to_csv().splitlines()[0] == "amplitude_ghz,frequency_ghz,excited_population"


def test_spectroscopy_small_grid():
    amps = [-0.2, 0.1, 0.2]
    freqs = np.linspace(2.625, 2.645, 41)
    smap = spectroscopy_scan(P, amps, freqs, probe_duration=2000.0)
    fit = fit_spectroscopy(smap)
    # the line moves down with |amplitude| and sits symmetric in the sign of the drive
    assert fit.centers[1] > fit.centers[2]
    assert fit.centers[0] == pytest.approx(fit.centers[2], abs=2e-4)
    assert fit.resonance_at_zero == pytest.approx(2.640, abs=1e-3)


def test_time_rabi_overdamped_raises():
    with pytest.raises(NoMinimumError):
        time_rabi(P, 0.02, find_f0g1_resonance(P, 0.02), np.arange(10.0, 800.0, 5.0))


def test_time_rabi_calibrated(calibration):
    r = time_rabi(P, calibration.amplitude, calibration.stark_shift, np.arange(10.0, 800.0, 1.0))
    assert r.t_opt == pytest.approx(120.0, abs=1.0)
    assert 0.0 < r.residual < 0.02
    assert r.rabi_rate == pytest.approx(4.7, rel=0.05)
    assert r.to_csv().count("\n") == len(r.durations) + 1


def test_calibration_hits_target(calibration):
    assert calibration.t_opt == pytest.approx(120.0, abs=0.02)
    assert calibration.stark_shift < 0
    assert 110.0 <= calibration.t_opt <= 170.0


def test_reset_trace_free_decay_oracle(ideal_reset):
    free = ideal_reset.free_decay
    expected = np.exp(-free.times / (P.t1_eg * 1000))
    assert np.max(np.abs(free.excited - expected) / expected) < 1e-6
    assert ideal_reset.difference[-1] < 0
    assert ideal_reset.to_csv().splitlines()[0] == "t_ns,pulsed_excited,free_excited,difference"


def test_trigger_timing_error():
    with pytest.raises(TimingError):
        trigger_rate_experiment(P, [1000.0], with_reset=False)
    with pytest.raises(ValueError):
        trigger_rate_experiment(P, [0.0], with_reset=False)


def test_trigger_slow_limit_is_thermal():
    res = trigger_rate_experiment(P, [0.05], with_reset=False, rounds=5)
    assert res.population[0] == pytest.approx(P.p_thermal_e, abs=5e-4)


def test_trigger_no_reset_monotone_in_rate():
    res = trigger_rate_experiment(P, [2.0, 10.0, 50.0], with_reset=False)
    assert np.all(np.diff(res.population) > 0)
    assert res.round_populations.shape == (3, 30)


@pytest.mark.parametrize("p_e,tol", [(0.015, 0.001), (0.10, 0.005)])
def test_thermal_estimator(p_e, tol):
    res = thermal_population_measurement(P.replace(p_thermal_e=p_e))
    assert res.estimate == pytest.approx(p_e, abs=tol)


def test_thermal_estimator_zero():
    res = thermal_population_measurement(P.replace(p_thermal_e=0.0))
    assert res.estimate == 0.0
    assert res.amplitude_thermal == pytest.approx(0.0, abs=1e-15)


def test_readout_demo_deterministic():
    a = readout_demo(ReadoutModel(seed=3))
    b = readout_demo(ReadoutModel(seed=3))
    assert a.to_csv() == b.to_csv()
    assert a.fidelity == pytest.approx(0.985, abs=0.007)


def test_measured_population():
    demo = readout_demo(ReadoutModel())
    low = measured_population([0.99, 0.0, 0.01], demo.boundary, ReadoutModel(), n_shots=20000)
    high = measured_population([0.8, 0.0, 0.2], demo.boundary, ReadoutModel(), n_shots=20000)
    assert low.value < high.value
    assert low.p25 <= low.value <= low.p75
