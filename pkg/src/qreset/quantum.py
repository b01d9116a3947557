"""Dense operator algebra on the truncated transmon x resonator space.

Basis ordering is transmon-major everywhere in this package::

    index = transmon_level * n_resonator + resonator_level

so ``|f0>`` is index ``2 * n_resonator`` and ``|g1>`` is index ``1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

TRANSMON_LABELS = ("g", "e", "f", "h")


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpec:
    """Level truncation of the transmon and the resonator."""

    n_transmon: int = 4
    n_resonator: int = 3

    def __post_init__(self):
        if self.n_transmon < 3:
            raise InvalidDimensionError(
                f"n_transmon must be >= 3 (the protocol needs |f>), got {self.n_transmon}")
        if self.n_resonator < 2:
            raise InvalidDimensionError(
                f"n_resonator must be >= 2 (the protocol needs |1>), got {self.n_resonator}")

    @property
    def dim(self) -> int:
        return self.n_transmon * self.n_resonator

    def index(self, q: int, r: int) -> int:
        if not (0 <= q < self.n_transmon and 0 <= r < self.n_resonator):
            raise IndexError(f"level ({q}, {r}) outside truncation {self}")
        return q * self.n_resonator + r

    def transmon_labels(self) -> list[str]:
        return [TRANSMON_LABELS[k] if k < len(TRANSMON_LABELS) else f"q{k}"
                for k in range(self.n_transmon)]


def annihilation(dim: int) -> np.ndarray:
    """Truncated ladder operator with ``a[i, i+1] = sqrt(i+1)``."""
    if dim < 2:
        raise InvalidDimensionError(f"ladder operator needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    for name, M in (("A", A), ("B", B)):
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidDimensionError(f"{name} must be square, got shape {M.shape}")
    return np.kron(A, B)


def embed(op: np.ndarray, which: str, spec: HilbertSpec) -> np.ndarray:
    """Lift a single-subsystem operator to the joint space.

    ``which`` is ``"transmon"`` or ``"resonator"``.
    """
    op = np.asarray(op)
    if which == "transmon":
        n = spec.n_transmon
        if op.shape != (n, n):
            raise InvalidDimensionError(f"transmon operator must be {n}x{n}, got {op.shape}")
        return kron(op, np.eye(spec.n_resonator))
    if which == "resonator":
        n = spec.n_resonator
        if op.shape != (n, n):
            raise InvalidDimensionError(f"resonator operator must be {n}x{n}, got {op.shape}")
        return kron(np.eye(spec.n_transmon), op)
    raise ValueError(f"which must be 'transmon' or 'resonator', got {which!r}")


def transmon_lowering(spec: HilbertSpec) -> np.ndarray:
    return embed(annihilation(spec.n_transmon), "transmon", spec)


def resonator_lowering(spec: HilbertSpec) -> np.ndarray:
    return embed(annihilation(spec.n_resonator), "resonator", spec)


def excitation_number(spec: HilbertSpec) -> np.ndarray:
    """Diagonal of ``b^dag b + a^dag a`` (total excitation number)."""
    q, r = np.divmod(np.arange(spec.dim), spec.n_resonator)
    return (q + r).astype(float)


def basis_ket(q: int, r: int, spec: HilbertSpec) -> np.ndarray:
    psi = np.zeros(spec.dim, dtype=complex)
    psi[spec.index(q, r)] = 1.0
    return psi


def basis_dm(q: int, r: int, spec: HilbertSpec) -> np.ndarray:
    psi = basis_ket(q, r, spec)
    return np.outer(psi, psi.conj())


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def populations(rho: np.ndarray, spec: HilbertSpec) -> tuple[np.ndarray, np.ndarray]:
    """Transmon and resonator marginal level populations of ``rho``."""
    diag = np.real(np.diagonal(rho)).reshape(spec.n_transmon, spec.n_resonator)
    return diag.sum(axis=1), diag.sum(axis=0)


def density_matrix_errors(rho: np.ndarray) -> tuple[float, float, float]:
    """Return ``(|Tr rho - 1|, max|rho - rho^dag|, min eigenvalue)``."""
    trace_err = abs(np.trace(rho) - 1.0)
    herm_err = float(np.max(np.abs(rho - rho.conj().T)))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return float(trace_err), herm_err, min_eig


def check_density_matrix(rho: np.ndarray, spec: HilbertSpec | None = None,
                         herm_tol: float = 1e-10, trace_tol: float = 1e-8,
                         eig_tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"density matrix must be square, got {rho.shape}")
    if spec is not None and rho.shape[0] != spec.dim:
        raise InvalidDimensionError(f"density matrix dim {rho.shape[0]} != {spec.dim}")
    trace_err, herm_err, min_eig = density_matrix_errors(rho)
    if herm_err > herm_tol:
        raise ValueError(f"density matrix not Hermitian (max deviation {herm_err:.3g})")
    if trace_err > trace_tol:
        raise ValueError(f"density matrix trace deviates from 1 by {trace_err:.3g}")
    if min_eig < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {min_eig:.3g}")


def boltzmann_ratio(p_e: float, n_levels: int) -> float:
    """Ratio ``x`` with ``x / sum_k x**k == p_e`` over ``n_levels`` levels."""
    if not 0.0 <= p_e < 0.5:
        raise ValueError(f"p_e must satisfy 0 <= p_e < 0.5, got {p_e}")
    if p_e == 0.0:
        return 0.0

    def excess(x):
        return x / np.sum(x ** np.arange(n_levels)) - p_e

    # first-level weight rises from 0, peaks below x=1, then falls; take the rising branch
    peak = minimize_scalar(lambda x: -excess(x), bounds=(0.0, 1.0), method="bounded",
                           options={"xatol": 1e-12})
    if excess(peak.x) < 0:
        raise ValueError(
            f"p_e={p_e} unreachable by a Boltzmann ladder over {n_levels} levels "
            f"(max {excess(peak.x) + p_e:.4f})")
    return brentq(excess, 0.0, peak.x, xtol=1e-15, rtol=1e-15)


def thermal_state(spec: HilbertSpec, p_e: float) -> np.ndarray:
    """Diagonal thermal transmon state with the resonator in vacuum.

    Higher transmon levels follow the Boltzmann ladder ``p_k ∝ x**k`` with
    ``x`` solved so that the normalized ``|e>`` population equals ``p_e``.
    """
    x = boltzmann_ratio(p_e, spec.n_transmon)
    weights = x ** np.arange(spec.n_transmon)
    weights /= weights.sum()
    rho = np.zeros((spec.dim, spec.dim), dtype=complex)
    for q, w in enumerate(weights):
        rho[spec.index(q, 0), spec.index(q, 0)] = w
    return rho
