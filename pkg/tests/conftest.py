"""Shared fixtures: expensive calibrations run once per session."""

import pytest

from qreset.device import DeviceParams
from qreset.experiments import calibrate_reset, reset_trace
from qreset.pulses import ResetConfig

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def device():
    return DeviceParams()


@pytest.fixture(scope="session")
def calibration(device):
    return calibrate_reset(device, 120.0, 5.0)


@pytest.fixture(scope="session")
def calibrated_cfg(calibration):
    return ResetConfig(f0g1_amplitude=calibration.amplitude, f0g1_stark_shift=calibration.stark_shift)


@pytest.fixture(scope="session")
def ideal_reset(device, calibrated_cfg):
    return reset_trace(device, calibrated_cfg, 0.0, calibrate=False)


@pytest.fixture(scope="session")
def mismatched_reset(device, calibrated_cfg):
    return reset_trace(device, calibrated_cfg, 29e-6, calibrate=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
