"""Transmon-resonator device parameters, Hamiltonian and collapse operators.

Units
-----
Inputs are kept in laboratory units: frequencies in GHz (ordinary, not
angular), decay rates in 1/us and lifetimes in us.  Everything handed to the
integrator is converted once to angular units on a nanosecond clock
(rad/ns for Hamiltonians, 1/sqrt(ns) for jump operators).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import fsolve

from .quantum import (HilbertSpec, basis_ket, dagger, embed, excitation_number,
                      resonator_lowering, transmon_lowering)

TWO_PI = 2.0 * math.pi
NS_PER_US = 1000.0
SINGULARITY_GHZ = 1e-6


class ParameterError(ValueError):
    """Invalid physical parameter; the message names the offending field."""


class ResonanceSingularityError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the transmon-resonator device.

    Defaults are the measured values of the fixed-frequency device the reset
    protocol was demonstrated on.  ``dressed_frequencies`` marks
    ``omega_ge``, ``alpha`` and ``omega_r`` as measured (dressed) transition
    frequencies; the Hamiltonian then uses bare values solved so that its
    undriven spectrum reproduces them.
    """

    omega_ge: float = 4.904        # GHz
    alpha: float = -0.330          # GHz
    omega_r: float = 6.838         # GHz
    g_coupling: float = 0.067      # GHz
    kappa_r: float = 4.26          # 1/us
    t1_eg: float = 44.2            # us
    t1_fe: float = 26.1            # us
    t1_hf: float | None = None     # us, defaults to t1_fe / sqrt(3)
    p_thermal_e: float = 0.015
    dressed_frequencies: bool = True

    def __post_init__(self):
        if self.t1_hf is None:
            object.__setattr__(self, "t1_hf", self.t1_fe / math.sqrt(3.0))
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "dressed_frequencies":
                if not isinstance(value, bool):
                    raise ParameterError(f"dressed_frequencies must be a bool, got {value!r}")
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{f.name} must be a number, got {value!r}")
            if not math.isfinite(value) and not (f.name.startswith("t1_") and value > 0):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
        if not self.alpha < 0:
            raise ParameterError(f"alpha must be negative (transmon anharmonicity), got {self.alpha}")
        if not self.omega_r > self.omega_ge:
            raise ParameterError(
                f"omega_r must exceed omega_ge, got omega_r={self.omega_r}, omega_ge={self.omega_ge}")
        if self.omega_ge <= 0:
            raise ParameterError(f"omega_ge must be positive, got {self.omega_ge}")
        if self.g_coupling < 0:
            raise ParameterError(f"g_coupling must be >= 0, got {self.g_coupling}")
        if not self.kappa_r > 0:
            raise ParameterError(f"kappa_r must be positive, got {self.kappa_r}")
        for name in ("t1_eg", "t1_fe", "t1_hf"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.p_thermal_e < 0.5:
            raise ParameterError(f"p_thermal_e must lie in [0, 0.5), got {self.p_thermal_e}")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "DeviceParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DriveSpec:
    """Single-tone drive through the transmon charge line.

    ``omega_d`` is the nominal drive frequency and ``detuning_offset`` a
    deliberate shift added on top of it (both GHz).
    """

    omega_d: float
    amplitude: float = 0.0
    phase: float = 0.0
    detuning_offset: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ParameterError(f"amplitude must be >= 0, got {self.amplitude}")

    @property
    def frequency(self) -> float:
        return self.omega_d + self.detuning_offset

    @property
    def envelope(self) -> complex:
        return self.amplitude * np.exp(1j * self.phase)


class DerivedFrequencies(NamedTuple):
    omega_ef: float
    omega_f0g1: float
    delta: float


def derived_frequencies(p: DeviceParams) -> DerivedFrequencies:
    """Transition frequencies implied by ``p`` (GHz).

    ``delta`` is the resonator-qubit detuning ``omega_r - omega_ge``.
    """
    omega_ef = p.omega_ge + p.alpha
    return DerivedFrequencies(omega_ef, p.omega_ge + omega_ef - p.omega_r, p.omega_r - p.omega_ge)


def carrier_frequency(p: DeviceParams, carrier: str) -> float:
    freqs = derived_frequencies(p)
    table = {"ge": p.omega_ge, "ef": freqs.omega_ef, "f0g1": freqs.omega_f0g1}
    try:
        return table[carrier]
    except KeyError:
        raise ValueError(f"unknown carrier {carrier!r}; expected one of {sorted(table)}") from None


# --- Hamiltonian -----------------------------------------------------------

@lru_cache(maxsize=None)
def _ladder_ops(spec: HilbertSpec):
    b = transmon_lowering(spec)
    a = resonator_lowering(spec)
    bd, ad = dagger(b), dagger(a)
    return b, a, bd @ b, ad @ a, bd @ bd @ b @ b, bd @ a + b @ ad


def _static_hamiltonian(omega_ge, alpha, omega_r, g, spec: HilbertSpec) -> np.ndarray:
    """Undriven Hamiltonian in the lab frame, rad/ns."""
    _, _, nq, nr, kerr, exchange = _ladder_ops(spec)
    return TWO_PI * (omega_r * nr + omega_ge * nq + 0.5 * alpha * kerr + g * exchange)


def _dressed_transitions(omega_ge, alpha, omega_r, g, spec: HilbertSpec) -> np.ndarray:
    H = _static_hamiltonian(omega_ge, alpha, omega_r, g, spec) / TWO_PI
    evals, evecs = np.linalg.eigh(H)
    energy = {}
    for q, r in ((0, 0), (1, 0), (2, 0), (0, 1)):
        overlap = np.abs(evecs.conj().T @ basis_ket(q, r, spec)) ** 2
        energy[(q, r)] = evals[np.argmax(overlap)]
    return np.array([
        energy[(1, 0)] - energy[(0, 0)],
        energy[(2, 0)] - energy[(1, 0)],
        energy[(0, 1)] - energy[(0, 0)],
    ])


@lru_cache(maxsize=256)
def bare_frequencies(p: DeviceParams, spec: HilbertSpec = HilbertSpec()) -> tuple[float, float, float]:
    """Bare ``(omega_ge, alpha, omega_r)`` entering the Hamiltonian (GHz).

    When ``p.dressed_frequencies`` is set, solves for bare values whose
    dressed ge, ef and resonator transitions equal the measured ones.
    """
    if not p.dressed_frequencies or p.g_coupling == 0.0:
        return p.omega_ge, p.alpha, p.omega_r
    target = np.array([p.omega_ge, p.omega_ge + p.alpha, p.omega_r])

    def mismatch(x):
        wge, alpha, wr = x
        return _dressed_transitions(wge, alpha, wr, p.g_coupling, spec) - target

    x, info, ier, msg = fsolve(mismatch, [p.omega_ge, p.alpha, p.omega_r],
                               xtol=1e-13, full_output=True)
    if ier != 1 or np.max(np.abs(mismatch(x))) > 1e-9:
        raise ParameterError(f"could not infer bare frequencies from dressed ones: {msg}")
    return float(x[0]), float(x[1]), float(x[2])


def hamiltonian_parts(p: DeviceParams, omega_d: float,
                      spec: HilbertSpec = HilbertSpec()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``H = H0 + Re(Omega) Hx + Im(Omega) Hy`` in the frame at ``omega_d``.

    ``omega_d`` in GHz; returned matrices in rad/ns, with ``Omega`` to be
    supplied in GHz (the 2*pi is folded into ``Hx`` and ``Hy``).
    """
    wge, alpha, wr = bare_frequencies(p, spec)
    b, _, _, _, _, _ = _ladder_ops(spec)
    H0 = _static_hamiltonian(wge, alpha, wr, p.g_coupling, spec)
    H0 = H0 - TWO_PI * omega_d * np.diag(excitation_number(spec))
    bd = dagger(b)
    Hx = 0.5 * TWO_PI * (bd + b)
    Hy = 0.5j * TWO_PI * (bd - b)
    return H0, Hx, Hy


def build_hamiltonian(p: DeviceParams, d: DriveSpec, envelope_value: complex | None = None,
                      spec: HilbertSpec = HilbertSpec()) -> np.ndarray:
    """Rotating-frame Hamiltonian of the driven transmon-resonator system.

    ``delta_r a^dag a + delta_q b^dag b + alpha/2 b^dag b^dag b b
    + g (b^dag a + b a^dag) + (Omega b^dag + Omega^* b) / 2``

    Parameters
    ----------
    p : DeviceParams
    d : DriveSpec
        Sets the frame; its ``envelope`` is used when ``envelope_value`` is None.
    envelope_value : complex, optional
        Instantaneous complex drive amplitude ``Omega(t)`` in GHz.
    spec : HilbertSpec

    Returns
    -------
    ndarray
        Hermitian matrix in rad/ns.
    """
    omega = d.envelope if envelope_value is None else complex(envelope_value)
    if not np.isfinite(omega):
        raise ValueError(f"envelope value must be finite, got {omega}")
    H0, Hx, Hy = hamiltonian_parts(p, d.frequency, spec)
    return H0 + omega.real * Hx + omega.imag * Hy


# --- effective f0 <-> g1 model ---------------------------------------------

def _qubit_resonator_detuning(p: DeviceParams) -> float:
    # qubit-minus-resonator convention; see effective_coupling
    detuning = p.omega_ge - p.omega_r
    for value, label in ((detuning, "omega_ge - omega_r"), (detuning + p.alpha, "omega_ge - omega_r + alpha")):
        if abs(value) < SINGULARITY_GHZ:
            raise ResonanceSingularityError(f"{label} = {value:.3g} GHz is too close to zero")
    return detuning


def effective_coupling(p: DeviceParams, omega_drive_amp: float) -> float:
    """Drive-induced f0 <-> g1 coupling ``g alpha Omega / (sqrt(2) D (D + alpha))``.

    ``D = omega_ge - omega_r`` is taken qubit-minus-resonator, the sign
    convention under which this second-order result agrees with the full
    Hamiltonian (and with the measured dispersive shift).  Arguments and
    result in GHz; the sign of ``Omega`` is preserved.
    """
    D = _qubit_resonator_detuning(p)
    return p.g_coupling * p.alpha * omega_drive_amp / (math.sqrt(2.0) * D * (D + p.alpha))


def amplitude_for_rabi_rate(p: DeviceParams, rate_per_us: float) -> float:
    """Drive amplitude (GHz) whose f0 <-> g1 oscillation frequency ``2|g~|`` is ``rate_per_us``."""
    per_unit = abs(effective_coupling(p, 1.0))
    return rate_per_us / NS_PER_US / (2.0 * per_unit)


def effective_hamiltonian(delta_f0: float, g_tilde: float) -> np.ndarray:
    """Two-level Hamiltonian in the ``{|f0>, |g1>}`` basis (same units as inputs)."""
    return np.array([[delta_f0, g_tilde], [np.conj(g_tilde), 0.0]], dtype=complex)


def dispersive_shift(p: DeviceParams) -> float:
    """Transmon dispersive shift ``chi = g^2 alpha / (D (D + alpha))`` in GHz."""
    D = _qubit_resonator_detuning(p)
    return p.g_coupling ** 2 * p.alpha / (D * (D + p.alpha))


# --- dissipation -------------------------------------------------------------

def _inverse_sqrt_lifetime(t1_us: float) -> float:
    if math.isinf(t1_us):
        return 0.0
    return 1.0 / math.sqrt(t1_us * NS_PER_US)


def collapse_operators(p: DeviceParams, spec: HilbertSpec = HilbertSpec()) -> list[np.ndarray]:
    """``[L_r, L_q]`` in 1/sqrt(ns).

    ``L_r = sqrt(kappa_r) a`` and ``L_q`` is one combined ladder operator
    ``|g><e|/sqrt(T1_eg) + |e><f|/sqrt(T1_fe) + |f><h|/sqrt(T1_hf)``.
    Transmon levels above ``h`` (if any) reuse ``T1_hf`` scaled harmonically.
    """
    L_r = math.sqrt(p.kappa_r / NS_PER_US) * resonator_lowering(spec)
    rates = [_inverse_sqrt_lifetime(p.t1_eg), _inverse_sqrt_lifetime(p.t1_fe),
             _inverse_sqrt_lifetime(p.t1_hf)]
    lq = np.zeros((spec.n_transmon, spec.n_transmon), dtype=complex)
    for k in range(spec.n_transmon - 1):
        if k < len(rates):
            lq[k, k + 1] = rates[k]
        else:
            lq[k, k + 1] = rates[-1] * math.sqrt((k + 1) / 3.0)
    return [L_r, embed(lq, "transmon", spec)]
