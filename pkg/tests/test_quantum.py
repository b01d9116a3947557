import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qreset.quantum import (HilbertSpec, InvalidDimensionError, annihilation, basis_dm, basis_ket,
                            boltzmann_ratio, check_density_matrix, commutator, embed, excitation_number,
                            kron, populations, resonator_lowering, thermal_state, transmon_lowering)

SPEC = HilbertSpec()


def test_spec_defaults_and_index():
    assert SPEC.dim == 12
    assert SPEC.index(2, 0) == 6
    assert SPEC.index(0, 1) == 1
    assert SPEC.transmon_labels() == ["g", "e", "f", "h"]
    with pytest.raises(IndexError):
        SPEC.index(4, 0)


@pytest.mark.parametrize("nt,nr", [(2, 3), (4, 1)])
def test_spec_rejects_small_truncations(nt, nr):
    with pytest.raises(InvalidDimensionError):
        HilbertSpec(nt, nr)


def test_annihilation_two_level():
    assert np.array_equal(annihilation(2), np.array([[0, 1], [0, 0]], dtype=complex))


def test_annihilation_sqrt2_entry():
    assert annihilation(3)[1, 2] == pytest.approx(1.41421356, abs=1e-8)


def test_annihilation_number_diagonal():
    a = annihilation(4)
    n = a.conj().T @ a
    # independent oracle: explicit matrix product of the defining entries
    expected = np.zeros((4, 4))
    for i in range(3):
        expected[i + 1, i + 1] += np.sqrt(i + 1) ** 2
    assert np.allclose(n, expected, atol=1e-15)
    # sqrt(k)**2 may differ from k by one ulp
    assert np.max(np.abs(np.diag(n) - np.arange(4))) <= 4 * np.finfo(float).eps


def test_annihilation_rejects_dim_one():
    with pytest.raises(InvalidDimensionError):
        annihilation(1)


def test_kron_identity():
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))


def test_kron_sigma_x_swaps_blocks():
    sx = np.array([[0, 1], [1, 0]])
    K = kron(sx, np.eye(2))
    assert np.array_equal(K, np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]))


def test_kron_mixed_product():
    b = annihilation(4)
    lhs = kron(b, np.eye(3)) @ kron(b.conj().T, np.eye(3))
    rhs = kron(b @ b.conj().T, np.eye(3))
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_kron_index_formula():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(2, 2))
    B = rng.normal(size=(3, 3))
    K = kron(A, B)
    for i, j, k, l in [(0, 1, 2, 0), (1, 0, 1, 2), (1, 1, 0, 0)]:
        assert K[i * 3 + k, j * 3 + l] == pytest.approx(A[i, j] * B[k, l])


def test_kron_rejects_non_square():
    with pytest.raises(InvalidDimensionError):
        kron(np.ones((2, 3)), np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
def test_kron_associative(d1, d2, d3, seed):
    rng = np.random.default_rng(seed)
    A, B, C = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in (d1, d2, d3))
    assert np.max(np.abs(kron(kron(A, B), C) - kron(A, kron(B, C)))) <= 1e-14 * max(1.0, np.max(np.abs(kron(kron(A, B), C))))


def test_embed_identity():
    assert np.array_equal(embed(np.eye(4), "transmon", SPEC), np.eye(12))


def test_embed_lowering_annihilates_ground():
    b = embed(annihilation(4), "transmon", SPEC)
    assert np.allclose(b @ basis_ket(0, 0, SPEC), 0)


def test_embedded_operators_commute():
    b = transmon_lowering(SPEC)
    a = resonator_lowering(SPEC)
    assert np.allclose(commutator(b, a), 0)
    assert np.allclose(commutator(b, a.conj().T), 0)


def test_embed_dimension_mismatch():
    with pytest.raises(InvalidDimensionError):
        embed(np.eye(3), "transmon", SPEC)
    with pytest.raises(ValueError):
        embed(np.eye(4), "cavity", SPEC)


def test_excitation_number_values():
    N = excitation_number(SPEC)
    assert N[SPEC.index(2, 0)] == 2
    assert N[SPEC.index(0, 1)] == 1
    assert N[SPEC.index(3, 2)] == 5


def test_populations_ground():
    t, r = populations(basis_dm(0, 0, SPEC), SPEC)
    assert np.array_equal(t, [1, 0, 0, 0])
    assert np.array_equal(r, [1, 0, 0])


def test_populations_f0():
    t, _ = populations(basis_dm(2, 0, SPEC), SPEC)
    assert np.array_equal(t, [0, 0, 1, 0])


def test_populations_mixture():
    rho = 0.5 * basis_dm(2, 0, SPEC) + 0.5 * basis_dm(0, 1, SPEC)
    t, r = populations(rho, SPEC)
    assert np.allclose(t, [0.5, 0, 0.5, 0])
    assert np.allclose(r, [0.5, 0.5, 0])


def _random_state(seed, dim=12):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = M @ M.conj().T
    return rho / np.trace(rho)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_populations_marginals_normalized(seed):
    rho = _random_state(seed)
    t, r = populations(rho, SPEC)
    assert abs(t.sum() - 1) < 1e-8
    assert abs(r.sum() - 1) < 1e-8


def test_check_density_matrix():
    check_density_matrix(_random_state(1), SPEC)
    bad = _random_state(2) * 1.1
    with pytest.raises(ValueError, match="trace"):
        check_density_matrix(bad, SPEC)
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(6) / 6, SPEC)


def test_thermal_state_zero():
    assert np.array_equal(thermal_state(SPEC, 0.0), basis_dm(0, 0, SPEC))


def test_thermal_state_f_population():
    rho = thermal_state(SPEC, 0.015)
    t, r = populations(rho, SPEC)
    # independent oracle: fixed-point iteration on p_e = x / (1 + x + x^2 + x^3)
    x = 0.015
    for _ in range(100):
        x = 0.015 * (1 + x + x ** 2 + x ** 3)
    p_g = 1 / (1 + x + x ** 2 + x ** 3)
    assert t[1] == pytest.approx(0.015, abs=1e-12)
    assert t[2] == pytest.approx(p_g * x ** 2, rel=1e-9)
    assert t[2] == pytest.approx(2.3e-4, abs=0.05e-4)
    assert r[0] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.27))
def test_thermal_state_valid_and_ordered(p_e):
    rho = thermal_state(SPEC, p_e)
    assert abs(np.trace(rho) - 1) < 1e-12
    t, _ = populations(rho, SPEC)
    assert np.all(np.diff(t) <= 1e-15)
    assert t[1] == pytest.approx(p_e, abs=1e-10)


def test_thermal_state_out_of_range():
    with pytest.raises(ValueError):
        thermal_state(SPEC, 0.5)
    with pytest.raises(ValueError):
        thermal_state(SPEC, -0.1)


def test_boltzmann_ratio_geometric():
    x = boltzmann_ratio(0.1, 4)
    assert x / (1 + x + x ** 2 + x ** 3) == pytest.approx(0.1, rel=1e-12)
