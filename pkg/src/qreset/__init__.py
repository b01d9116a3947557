"""Deterministic simulator of pulsed qubit reset through a lossy readout resonator."""

from .device import DeviceParams, DriveSpec, build_hamiltonian, effective_coupling
from .experiments import (calibrate_reset, reset_trace, spectroscopy_scan, thermal_population_measurement,
                          time_rabi, trigger_rate_experiment)
from .lindblad import IntegratorCfg, TimeTrace, evolve
from .pulses import Envelope, IdealRotation, Idle, Pulse, ResetConfig, Schedule, reset_sequence
from .quantum import HilbertSpec, thermal_state

__version__ = "0.1.0"

__all__ = [
    "DeviceParams", "DriveSpec", "build_hamiltonian", "effective_coupling",
    "calibrate_reset", "reset_trace", "spectroscopy_scan", "thermal_population_measurement",
    "time_rabi", "trigger_rate_experiment",
    "IntegratorCfg", "TimeTrace", "evolve",
    "Envelope", "IdealRotation", "Idle", "Pulse", "ResetConfig", "Schedule", "reset_sequence",
    "HilbertSpec", "thermal_state",
]
