"""Pulse envelopes and the two-pulse reset schedule.

Times are in ns and amplitudes in GHz (the drive term is ``Omega/2 b^dag +
h.c.`` so a resonant square pulse rotates by ``2*pi*Omega0*T`` radians).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np
from scipy.integrate import quad

from .device import (NS_PER_US, TWO_PI, DeviceParams, carrier_frequency,
                     effective_coupling)

CARRIERS = ("ge", "ef", "f0g1")
SUBSPACES = ("ge", "ef")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    """Real, unit-peak pulse shape on ``[0, duration]``.

    ``square`` may carry linear rise/fall ramps of length ``ramp`` inside the
    duration.  ``gaussian`` is centred, truncated at +-2 sigma from the
    centre and not baseline-subtracted.
    """

    kind: str = "square"
    duration: float = 100.0
    sigma: float | None = None
    ramp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("square", "gaussian"):
            raise ScheduleError(f"envelope kind must be 'square' or 'gaussian', got {self.kind!r}")
        if not self.duration > 0:
            raise ScheduleError(f"envelope duration must be > 0, got {self.duration}")
        if self.kind == "gaussian":
            if self.sigma is None:
                object.__setattr__(self, "sigma", self.duration / 4.0)
            if not self.sigma > 0 or 4.0 * self.sigma > self.duration * (1 + 1e-12):
                raise ScheduleError(f"gaussian needs 0 < 4*sigma <= duration, got sigma={self.sigma}")
        if self.ramp < 0 or 2.0 * self.ramp > self.duration * (1 + 1e-12):
            raise ScheduleError(f"ramp must satisfy 0 <= 2*ramp <= duration, got {self.ramp}")

    def shape(self, t):
        """Envelope value at pulse-local time(s) ``t``; zero outside the support."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.duration)
        if self.kind == "gaussian":
            centre = 0.5 * self.duration
            vals = np.where(np.abs(t - centre) <= 2.0 * self.sigma,
                            np.exp(-0.5 * ((t - centre) / self.sigma) ** 2), 0.0)
        elif self.ramp > 0:
            # subnormal ramps overflow to inf, which the clip maps to 1
            with np.errstate(over="ignore"):
                rise = np.clip(t / self.ramp, 0.0, 1.0)
                fall = np.clip((self.duration - t) / self.ramp, 0.0, 1.0)
            vals = np.minimum(rise, fall)
        else:
            vals = np.ones_like(t)
        return np.where(inside, vals, 0.0)

    def pieces(self) -> list[tuple[float, float, bool]]:
        """Split the support into ``(t0, t1, is_constant)`` intervals."""
        if self.kind == "gaussian":
            return [(0.0, self.duration, False)]
        if self.ramp == 0:
            return [(0.0, self.duration, True)]
        out = [(0.0, self.ramp, False)]
        if self.duration - 2 * self.ramp > 1e-12:
            out.append((self.ramp, self.duration - self.ramp, True))
        out.append((self.duration - self.ramp, self.duration, False))
        return out

    def area(self) -> float:
        """Integral of the unit-peak shape (ns), by adaptive quadrature."""
        breaks = sorted({t for piece in self.pieces() for t in piece[:2]})
        total = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            val, _ = quad(lambda t: float(self.shape(t)), a, b, epsabs=0.0, epsrel=1e-12, limit=200)
            total += val
        return total


@dataclass(frozen=True)
class Pulse:
    """Microwave pulse on one of the protocol's carriers.

    The drive frequency is the carrier's nominal frequency plus
    ``freq_offset`` (GHz), which holds both ac-Stark compensation and any
    deliberate mismatch.
    """

    envelope: Envelope
    amplitude: float
    phase: float = 0.0
    carrier: str = "ge"
    freq_offset: float = 0.0
    start: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ScheduleError(f"pulse amplitude must be >= 0, got {self.amplitude}")
        if self.carrier not in CARRIERS:
            raise ScheduleError(f"carrier must be one of {CARRIERS}, got {self.carrier!r}")

    @property
    def duration(self) -> float:
        return self.envelope.duration

    dynamic_duration = duration

    def frequency(self, p: DeviceParams) -> float:
        return carrier_frequency(p, self.carrier) + self.freq_offset


@dataclass(frozen=True)
class IdealRotation:
    """Instantaneous rotation within the ``ge`` or ``ef`` transmon subspace.

    ``duration`` is bookkeeping only (used for round timing); the dynamics
    treat the rotation as taking zero time.
    """

    subspace: str = "ef"
    angle: float = math.pi
    phase: float = 0.0
    over_rotation_error: float = 0.0
    duration: float = 0.0
    start: float = 0.0

    def __post_init__(self):
        if self.subspace not in SUBSPACES:
            raise ScheduleError(f"subspace must be one of {SUBSPACES}, got {self.subspace!r}")
        if self.duration < 0:
            raise ScheduleError(f"bookkeeping duration must be >= 0, got {self.duration}")

    @property
    def effective_angle(self) -> float:
        return self.angle * (1.0 + self.over_rotation_error)

    @property
    def carrier(self) -> str:
        return self.subspace

    dynamic_duration = 0.0


@dataclass(frozen=True)
class Idle:
    duration: float
    start: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ScheduleError(f"idle duration must be >= 0, got {self.duration}")

    @property
    def dynamic_duration(self) -> float:
        return self.duration


Segment = Union[Pulse, IdealRotation, Idle]


@dataclass(frozen=True)
class Schedule:
    """Time-ordered, non-overlapping sequence of segments."""

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        end = -math.inf
        for seg in segs:
            if not isinstance(seg, (Pulse, IdealRotation, Idle)):
                raise ScheduleError(f"unsupported segment {seg!r}")
            if seg.start < end - 1e-9:
                raise ScheduleError(f"segment starting at {seg.start} ns overlaps previous ending at {end} ns")
            end = seg.start + seg.duration

    @classmethod
    def sequential(cls, *segments: Segment, start: float = 0.0) -> "Schedule":
        """Place ``segments`` back to back from ``start``."""
        placed = []
        t = start
        for seg in segments:
            placed.append(replace(seg, start=t))
            t += seg.duration
        return cls(tuple(placed))

    def then(self, *segments: Segment) -> "Schedule":
        return Schedule.sequential(*self.segments, *segments,
                                   start=self.segments[0].start if self.segments else 0.0)

    @property
    def duration(self) -> float:
        """Bookkeeping duration (ideal rotations count with their attached duration)."""
        return sum(seg.duration for seg in self.segments)

    @property
    def dynamic_duration(self) -> float:
        return sum(seg.dynamic_duration for seg in self.segments)

    def describe(self) -> list[dict]:
        """Human-readable, JSON-serializable segment list."""
        out = []
        for seg in self.segments:
            d = {"type": type(seg).__name__}
            d.update(asdict(seg))
            out.append(d)
        return out


def rotation_angle(p: Pulse) -> float:
    """Rotation angle ``2*pi * integral Omega0(t) dt`` of a resonant pulse (rad)."""
    return TWO_PI * p.amplitude * p.envelope.area()


def sample_envelope(p: Pulse, t) -> complex | np.ndarray:
    """Complex envelope ``Omega0(t) exp(i phi)`` in GHz at absolute time(s) ``t``."""
    value = p.amplitude * p.envelope.shape(np.asarray(t, dtype=float) - p.start) * np.exp(1j * p.phase)
    return complex(value) if np.ndim(value) == 0 else value


def amplitude_for_angle(envelope: Envelope, angle: float) -> float:
    """Resonant-drive amplitude (GHz) producing rotation ``angle`` with ``envelope``."""
    return angle / (TWO_PI * envelope.area())


def awg_to_amplitude(voltage, c: float, omega_sat: float | None = None):
    """Map AWG output voltage to drive amplitude ``Omega``.

    Linear ``c * V`` unless ``omega_sat`` is given, in which case the
    amplifier compression is emulated by ``omega_sat * tanh(c V / omega_sat)``.
    """
    v = np.asarray(voltage, dtype=float)
    out = c * v if omega_sat is None else omega_sat * np.tanh(c * v / omega_sat)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ResetConfig:
    """Knobs of the reset sequence: shelving pulse, f0g1 pulse, idle.

    ``f0g1_amplitude=None`` asks for an effective-model estimate of the
    amplitude that puts the first transfer minimum at ``f0g1_duration``; the
    virtual experiments refine this against the full model.
    ``f0g1_stark_shift`` is the calibrated shift of the f0g1 line and
    ``f0g1_freq_offset`` a deliberate mismatch on top of it (both GHz).
    """

    ef_pulse_duration: float = 75.0
    f0g1_amplitude: float | None = None
    f0g1_duration: float = 120.0
    f0g1_ramp: float = 5.0
    f0g1_stark_shift: float = 0.0
    f0g1_freq_offset: float = 0.0
    use_ideal_x: bool = True
    x_over_rotation: float = 0.0
    idle_after: float = 2000.0

    def __post_init__(self):
        for name in ("ef_pulse_duration", "f0g1_duration"):
            if not getattr(self, name) > 0:
                raise ScheduleError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.idle_after < 0:
            raise ScheduleError(f"idle_after must be >= 0, got {self.idle_after}")
        if self.f0g1_amplitude is not None and self.f0g1_amplitude < 0:
            raise ScheduleError(f"f0g1_amplitude must be >= 0, got {self.f0g1_amplitude}")
        if self.f0g1_ramp < 0 or 2 * self.f0g1_ramp > self.f0g1_duration:
            raise ScheduleError(f"f0g1_ramp must satisfy 0 <= 2*ramp <= duration, got {self.f0g1_ramp}")

    def replace(self, **changes) -> "ResetConfig":
        return replace(self, **changes)


def estimate_f0g1_amplitude(p: DeviceParams, duration: float, ramp: float = 0.0) -> float:
    """Effective-model amplitude placing the first ``|f0>`` zero at ``duration``.

    In the two-level ``{f0, g1}`` model with ``g1`` decaying at ``kappa_r``
    the ``|f0>`` amplitude is ``exp(-k t)(cos(nu t) + k/nu sin(nu t))`` with
    ``k = kappa_r/4`` and ``nu = sqrt(g~^2 - k^2)``; it first vanishes at
    ``nu t = pi - atan(nu/k)``.  Linear ramps count for half their length.
    """
    t_eff = duration - ramp
    if t_eff <= 0:
        raise ScheduleError("pulse too short for its ramps")
    k = p.kappa_r / NS_PER_US / 4.0

    def zero_time(nu):
        return (math.pi - math.atan2(nu, k)) / nu

    lo, hi = 1e-9, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if zero_time(mid) > t_eff:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    g_tilde = math.sqrt(nu ** 2 + k ** 2) / TWO_PI
    return g_tilde / abs(effective_coupling(p, 1.0))


def reset_sequence(p: DeviceParams, cfg: ResetConfig = ResetConfig()) -> Schedule:
    """Shelve ``|e>`` to ``|f>``, swap ``|f0>`` to ``|g1>``, then idle.

    The shelving pulse is an :class:`IdealRotation` (with optional
    over-rotation) or, when ``cfg.use_ideal_x`` is false, a gaussian pulse
    with ``sigma = duration/4``.
    """
    if cfg.use_ideal_x:
        shelve = IdealRotation("ef", math.pi, 0.0, cfg.x_over_rotation, duration=cfg.ef_pulse_duration)
    else:
        env = Envelope("gaussian", cfg.ef_pulse_duration)
        # the e-f matrix element of b^dag is sqrt(2)
        amp = amplitude_for_angle(env, math.pi * (1.0 + cfg.x_over_rotation)) / math.sqrt(2.0)
        shelve = Pulse(env, amp, 0.0, "ef")
    amplitude = cfg.f0g1_amplitude
    if amplitude is None:
        amplitude = estimate_f0g1_amplitude(p, cfg.f0g1_duration, cfg.f0g1_ramp)
    swap = Pulse(Envelope("square", cfg.f0g1_duration, ramp=cfg.f0g1_ramp), amplitude, 0.0, "f0g1",
                 cfg.f0g1_stark_shift + cfg.f0g1_freq_offset)
    segments = [shelve, swap]
    if cfg.idle_after > 0:
        segments.append(Idle(cfg.idle_after))
    return Schedule.sequential(*segments)
