"""Least-squares fits used by the calibration and analysis flows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

MAX_ITER = 200
GTOL = 1e-10


class FitError(ValueError):
    pass


class NoMinimumError(ValueError):
    pass


@dataclass
class FitResult:
    params: dict[str, float]
    covariance: np.ndarray = field(repr=False)
    residual_rms: float
    converged: bool
    n_iter: int = 0

    def __getitem__(self, key):
        return self.params[key]

    def stderr(self, key) -> float:
        i = list(self.params).index(key)
        return float(np.sqrt(abs(self.covariance[i, i])))

    def to_dict(self) -> dict:
        return {"params": dict(self.params), "residual_rms": self.residual_rms,
                "converged": self.converged, "n_iter": self.n_iter,
                "stderr": {k: self.stderr(k) for k in self.params}}


def _covariance(jac: np.ndarray, resid: np.ndarray) -> np.ndarray:
    n, k = jac.shape
    dof = max(n - k, 1)
    s2 = float(resid @ resid) / dof
    try:
        return np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        return np.full((k, k), np.nan)


def _lm_fit(names, model, jacobian, x, y, p0) -> FitResult:
    def resid(theta):
        return model(x, *theta) - y

    def jac(theta):
        return jacobian(x, *theta)

    try:
        sol = least_squares(resid, p0, jac=jac, method="lm", max_nfev=MAX_ITER * (len(p0) + 1),
                            gtol=GTOL, xtol=1e-12, ftol=1e-12)
    except (ValueError, np.linalg.LinAlgError):
        r = resid(np.asarray(p0, float))
        return FitResult(dict(zip(names, map(float, p0))), np.full((len(p0),) * 2, np.nan),
                         float(np.sqrt(np.mean(r ** 2))), False)
    r = sol.fun
    cov = _covariance(sol.jac, r)
    converged = bool(sol.success) and np.all(np.isfinite(sol.x)) and np.all(np.isfinite(cov))
    return FitResult(dict(zip(names, map(float, sol.x))), cov, float(np.sqrt(np.mean(r ** 2))),
                     converged, int(sol.nfev))


# --- Lorentzian -------------------------------------------------------------------

def lorentzian(x, center, width, amplitude, offset):
    """``offset + amplitude (w/2)^2 / ((x - center)^2 + (w/2)^2)``; ``width`` is the FWHM."""
    hw2 = (0.5 * width) ** 2
    return offset + amplitude * hw2 / ((x - center) ** 2 + hw2)


def _lorentzian_jac(x, center, width, amplitude, offset):
    hw2 = (0.5 * width) ** 2
    u = (x - center) ** 2
    den = u + hw2
    shape = hw2 / den
    d_center = amplitude * hw2 * 2 * (x - center) / den ** 2
    d_width = amplitude * 0.5 * width * u / den ** 2
    return np.column_stack([d_center, d_width, shape, np.ones_like(x)])


def fit_lorentzian(x, y) -> FitResult:
    """Fit a single Lorentzian peak or dip.

    The initial centre is the sample deviating most from the median (first
    one on ties), so dips and peaks are handled alike.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 5 or x.size != y.size:
        raise FitError("need at least 5 (x, y) points of equal length")
    if np.any(np.diff(x) <= 0):
        raise FitError("x must be strictly increasing")
    base = float(np.median(y))
    dev = y - base
    i = int(np.argmax(np.abs(dev)))
    amp0 = float(dev[i])
    half = np.abs(dev) >= 0.5 * abs(amp0)
    # contiguous half-maximum run around the extremum
    lo = i
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = i
    while hi < x.size - 1 and half[hi + 1]:
        hi += 1
    span = x[-1] - x[0]
    width0 = max(float(x[hi] - x[lo]), 2.0 * float(np.min(np.diff(x))), 1e-6 * span)
    res = _lm_fit(("center", "width", "amplitude", "offset"), lorentzian, _lorentzian_jac,
                  x, y, [float(x[i]), width0, amp0, base])
    res.params["width"] = abs(res.params["width"])
    if not (x[0] <= res.params["center"] <= x[-1]) or amp0 == 0.0:
        res.converged = False
    return res


# --- polynomial ---------------------------------------------------------------------

def fit_quadratic(x, y) -> FitResult:
    """Ordinary least squares for ``c0 + c1 x + c2 x^2``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 3 or x.size != y.size:
        raise FitError("need at least 3 (x, y) points of equal length")
    if np.unique(x).size < 3:
        raise FitError("design matrix is rank deficient: fewer than 3 distinct x values")
    A = np.column_stack([np.ones_like(x), x, x ** 2])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    cov = _covariance(A, r)
    return FitResult({"c0": float(coef[0]), "c1": float(coef[1]), "c2": float(coef[2])}, cov,
                     float(np.sqrt(np.mean(r ** 2))), True, 1)


# --- damped sinusoid ------------------------------------------------------------------

def damped_sinusoid(t, rate_per_us, freq_per_us, phase, amplitude, offset):
    """``offset + amplitude exp(-rate t) cos(2 pi freq t + phase)`` with ``t`` in ns."""
    tu = t * 1e-3
    return offset + amplitude * np.exp(-rate_per_us * tu) * np.cos(2 * np.pi * freq_per_us * tu + phase)


def _damped_sinusoid_jac(t, rate, freq, phase, amplitude, offset):
    tu = t * 1e-3
    env = np.exp(-rate * tu)
    arg = 2 * np.pi * freq * tu + phase
    c, s = np.cos(arg), np.sin(arg)
    return np.column_stack([
        -tu * amplitude * env * c,
        -2 * np.pi * tu * amplitude * env * s,
        -amplitude * env * s,
        env * c,
        np.ones_like(t),
    ])


def fit_damped_sinusoid(t, y) -> FitResult:
    """Fit ``offset + A exp(-rate t) cos(2 pi f t + phase)``; ``t`` in ns, rates per us.

    The starting frequency is the dominant bin of the zero-padded spectrum
    of the mean-removed data; amplitude and phase start from a linear fit at
    that frequency.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 10 or t.size != y.size:
        raise FitError("need at least 10 (t, y) points of equal length")
    if np.any(np.diff(t) <= 0):
        raise FitError("t must be strictly increasing")
    tu = (t - t[0]) * 1e-3
    dtu = float(np.median(np.diff(tu)))
    yd = y - y.mean()
    nfft = 8 * int(2 ** np.ceil(np.log2(t.size)))
    spec = np.abs(np.fft.rfft(yd, nfft))
    freqs = np.fft.rfftfreq(nfft, dtu)
    k = 1 + int(np.argmax(spec[1:])) if spec.size > 1 else 0
    f0 = float(freqs[k])
    if np.allclose(yd, 0.0):
        return FitResult({"rate_per_us": 0.0, "freq_per_us": 0.0, "phase": 0.0, "amplitude": 0.0,
                          "offset": float(y.mean())}, np.zeros((5, 5)), 0.0, False, 0)
    # linear solve for amplitude/phase/offset at f0, zero damping
    arg = 2 * np.pi * f0 * (t * 1e-3)
    A = np.column_stack([np.cos(arg), np.sin(arg), np.ones_like(t)])
    (a, b, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    amp0 = float(np.hypot(a, b))
    phase0 = float(np.arctan2(-b, a))
    span = float(tu[-1] - tu[0]) or 1.0
    best = None
    for rate0 in (0.0, 1.0 / span, 3.0 / span):
        res = _lm_fit(("rate_per_us", "freq_per_us", "phase", "amplitude", "offset"),
                      damped_sinusoid, _damped_sinusoid_jac, t, y,
                      [rate0, f0, phase0, amp0, float(c)])
        if best is None or (res.converged, -res.residual_rms) > (best.converged, -best.residual_rms):
            best = res
    if best.params["amplitude"] < 0:
        best.params["amplitude"] *= -1
        best.params["phase"] += np.pi
    best.params["phase"] = float((best.params["phase"] + np.pi) % (2 * np.pi) - np.pi)
    if best.params["freq_per_us"] < 0:
        best.params["freq_per_us"] *= -1
        best.params["phase"] *= -1
    return best


# --- extrema ------------------------------------------------------------------------------

def first_minimum(t, y, window: float | None = None) -> tuple[float, float]:
    """First local minimum of a sampled curve and the curve value there.

    Without ``window`` the discrete minimum is refined by a three-point
    parabola.  With ``window`` (same units as ``t``) the samples are first
    smoothed by a running mean over ``window / 4`` to locate the minimum,
    and a least-squares parabola through all raw samples within
    ``+-window`` of it gives the refined position.  This suppresses fast
    ripple riding on a slow envelope.

    Raises
    ------
    NoMinimumError
        If the samples never turn upward.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 3 or t.size != y.size:
        raise NoMinimumError("need at least 3 samples")
    ys = y
    if window is not None:
        if not window > 0:
            raise ValueError(f"window must be > 0, got {window}")
        step = float(np.median(np.diff(t)))
        k = max(1, int(round(0.25 * window / step)))
        if k > 1:
            ys = np.convolve(y, np.ones(k) / k, mode="same")
            # edge samples of a "same" convolution are biased low; drop them
            ys[: k // 2] = np.inf
            ys[len(ys) - (k - 1) // 2:] = np.inf
    i = _first_local_min(ys)
    if window is not None:
        sel = np.abs(t - t[i]) <= window
        if np.count_nonzero(sel) >= 3:
            a, b, c = np.polyfit(t[sel], y[sel], 2)
            if a > 0:
                tv = min(max(-b / (2 * a), t[sel][0]), t[sel][-1])
                return float(tv), float(a * tv ** 2 + b * tv + c)
        return float(t[i]), float(y[i])
    x0, x1, x2 = t[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / den
    if a <= 0:
        return float(x1), float(y1)
    tv = -b / (2 * a)
    tv = min(max(tv, x0), x2)
    c = y1 - a * x1 ** 2 - b * x1
    return float(tv), float(a * tv ** 2 + b * tv + c)


def _first_local_min(y: np.ndarray) -> int:
    for k in range(1, y.size - 1):
        if y[k] < y[k - 1] and y[k] <= y[k + 1]:
            # flat bottoms: step to the middle of the plateau
            j = k
            while j + 1 < y.size - 1 and y[j + 1] == y[k]:
                j += 1
            if y[j + 1] > y[k] or j == k:
                return (k + j) // 2
    raise NoMinimumError("trace has no interior local minimum")
