"""Single-shot IQ readout emulation and linear state discrimination.

Readout is not derived from cavity dynamics: each transmon level maps to
an isotropic Gaussian blob in the IQ plane.  The default geometry puts the
g and f centres ``4.34 sigma`` apart, which gives an optimal-boundary
assignment fidelity of 98.5%.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

DEFAULT_SEPARATION = 4.34


class DegenerateBoundaryError(ValueError):
    pass


def fidelity_from_separation(d_over_sigma: float) -> float:
    """Assignment fidelity of the perpendicular bisector between two equal blobs."""
    return 1.0 - norm.cdf(-0.5 * d_over_sigma)


def separation_for_fidelity(fidelity: float) -> float:
    """Inverse of :func:`fidelity_from_separation`."""
    if not 0.5 < fidelity < 1.0:
        raise ValueError(f"fidelity must lie in (0.5, 1), got {fidelity}")
    return -2.0 * norm.ppf(1.0 - fidelity)


def default_centers(sigma: float = 1.0, d_over_sigma: float = DEFAULT_SEPARATION) -> np.ndarray:
    """g, e, f centres on a circle, 120 deg between g and f, e halfway."""
    radius = d_over_sigma * sigma / (2.0 * np.sin(np.pi / 3))
    angles = np.deg2rad([0.0, 60.0, 120.0])
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass(frozen=True)
class ReadoutModel:
    iq_centers: np.ndarray = field(default_factory=default_centers)
    blob_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        raw = np.asarray(self.iq_centers)
        if raw.ndim == 1 and np.iscomplexobj(raw):
            centers = np.column_stack([raw.real, raw.imag]).astype(float)
        else:
            centers = raw.astype(float)
        object.__setattr__(self, "iq_centers", centers)
        if not self.blob_sigma > 0:
            raise ValueError(f"blob_sigma must be > 0, got {self.blob_sigma}")
        if centers.ndim != 2 or centers.shape[1] != 2:
            raise ValueError(f"iq_centers must be (n_states, 2), got {centers.shape}")
        if len({tuple(c) for c in centers}) != len(centers):
            raise ValueError("iq_centers must be distinct")

    @classmethod
    def with_separation(cls, d_over_sigma: float, sigma: float = 1.0, seed: int = 0) -> "ReadoutModel":
        return cls(default_centers(sigma, d_over_sigma), sigma, seed)


@dataclass
class ShotSet:
    points: np.ndarray                  # (n, 2) I, Q
    true_label: np.ndarray | None = None  # transmon level per shot

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("shot coordinates must be finite")
        if self.true_label is not None:
            self.true_label = np.asarray(self.true_label, int)
            if self.true_label.shape != (len(self.points),):
                raise ValueError("true_label must have one entry per shot")

    def __len__(self):
        return len(self.points)

    def select(self, label: int) -> "ShotSet":
        mask = self.true_label == label
        return ShotSet(self.points[mask], self.true_label[mask])

    @staticmethod
    def concat(*sets: "ShotSet") -> "ShotSet":
        labels = None
        if all(s.true_label is not None for s in sets):
            labels = np.concatenate([s.true_label for s in sets])
        return ShotSet(np.concatenate([s.points for s in sets]), labels)


@dataclass(frozen=True)
class LinearBoundary:
    """``normal . point + offset > 0`` means excited."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, float)
        object.__setattr__(self, "normal", normal)
        if normal.shape != (2,) or not np.linalg.norm(normal) > 0:
            raise DegenerateBoundaryError(f"normal must be a nonzero 2-vector, got {normal}")

    def decision(self, points) -> np.ndarray:
        return np.asarray(points, float) @ self.normal + self.offset

    def is_excited(self, points) -> np.ndarray:
        return self.decision(points) > 0


def readout_shots(final_pops, model: ReadoutModel, n: int, rng: np.random.Generator | None = None) -> ShotSet:
    """Draw ``n`` labelled IQ shots for the level populations ``final_pops``.

    Populations beyond the model's states (e.g. ``h``) are folded into the
    last state.  Uses ``model.seed`` unless a generator is supplied.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    pops = np.clip(np.asarray(final_pops, float), 0.0, None)
    k = len(model.iq_centers)
    if pops.size > k:
        pops = np.concatenate([pops[:k - 1], [pops[k - 1:].sum()]])
    elif pops.size < k:
        pops = np.concatenate([pops, np.zeros(k - pops.size)])
    total = pops.sum()
    if not abs(total - 1.0) < 1e-6:
        raise ValueError(f"populations must sum to 1, got {total}")
    rng = np.random.default_rng(model.seed) if rng is None else rng
    labels = rng.choice(k, size=n, p=pops / total)
    points = model.iq_centers[labels] + model.blob_sigma * rng.standard_normal((n, 2))
    return ShotSet(points, labels)


def train_classifier(shots_g: ShotSet, shots_f: ShotSet) -> LinearBoundary:
    """Fisher linear discriminant between ground and excited calibration shots.

    The normal is ``S^-1 (mean_f - mean_g)`` with ``S`` the pooled
    covariance; the threshold sits at the midpoint of the projected means.
    Degenerate (point-mass) covariances fall back to the centre line.
    """
    if len(shots_g) == 0 or len(shots_f) == 0:
        raise ValueError("both calibration sets must be non-empty")
    mg = shots_g.points.mean(axis=0)
    mf = shots_f.points.mean(axis=0)
    diff = mf - mg
    scale = max(np.abs(shots_g.points).max(), np.abs(shots_f.points).max(), 1.0)
    if np.linalg.norm(diff) <= 1e-12 * scale:
        raise DegenerateBoundaryError("class means coincide; no linear boundary separates them")
    cg = shots_g.points - mg
    cf = shots_f.points - mf
    dof = max(len(shots_g) + len(shots_f) - 2, 1)
    pooled = (cg.T @ cg + cf.T @ cf) / dof
    if np.linalg.cond(pooled) > 1e12 or np.trace(pooled) <= 1e-24 * scale ** 2:
        normal = diff
    else:
        normal = np.linalg.solve(pooled, diff)
    normal = normal / np.linalg.norm(normal)
    offset = -float(normal @ (0.5 * (mg + mf)))
    return LinearBoundary(normal, offset)


def assignment_fidelity(b: LinearBoundary, labeled: ShotSet) -> float:
    """``1 - (P(g|excited) + P(excited|g)) / 2`` from labelled shots.

    Ground shots carry label 0; any other label counts as excited.
    """
    if labeled.true_label is None:
        raise ValueError("shots carry no labels")
    ground = labeled.true_label == 0
    if not ground.any() or ground.all():
        raise ValueError("labelled shots must contain both ground and excited preparations")
    excited_call = b.is_excited(labeled.points)
    p_f_given_g = float(np.mean(excited_call[ground]))
    p_g_given_f = float(np.mean(~excited_call[~ground]))
    return 1.0 - 0.5 * (p_g_given_f + p_f_given_g)


@dataclass(frozen=True)
class PopulationEstimate:
    value: float
    p25: float
    p75: float

    def to_dict(self) -> dict:
        return {"value": self.value, "p25": self.p25, "p75": self.p75}


def population_estimate(b: LinearBoundary, shots: ShotSet, repetitions: int = 200,
                        seed: int = 0) -> PopulationEstimate:
    """Excited fraction of ``shots`` with a bootstrap 25/75 percentile interval."""
    if len(shots) == 0:
        raise ValueError("no shots to classify")
    calls = b.is_excited(shots.points).astype(float)
    value = float(calls.mean())
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(calls), size=(repetitions, len(calls)))
    boot = calls[idx].mean(axis=1)
    p25, p75 = np.percentile(boot, [25, 75])
    return PopulationEstimate(value, float(p25), float(p75))
