"""Truncated-basis states, operators, and measurement helpers."""

import math

import numpy as np
import pytest

from qsdsim import fock
from qsdsim.errors import DimensionError, HermiticityError


def test_lowering_takes_one_to_zero():
    out = fock.apply(fock.annihilation(2), fock.basis_state(2, 1))
    assert out[0] == 1.0
    assert out[1] == 0.0


def test_lowering_matrix_element():
    a = fock.annihilation(4)
    assert a.entries[2, 3] == math.sqrt(3.0)
    # everything off the first superdiagonal is zero
    mask = np.eye(4, k=1, dtype=bool)
    assert np.all(a.entries[~mask] == 0.0)


def test_commutator_is_identity_below_truncation_edge():
    a = fock.annihilation(4)
    adag = a.dagger()
    comm = (a @ adag - adag @ a).entries
    # sqrt(m)^2 products round, so identity only to machine precision
    assert np.max(np.abs(comm[:3, :3] - np.eye(3))) <= 1e-12
    # the artifact is confined to the last diagonal entry
    assert comm[3, 3] == pytest.approx(-3.0, abs=1e-12)
    assert np.all(comm[3, :3] == 0.0) and np.all(comm[:3, 3] == 0.0)


def test_adjoint_pairs_are_exact():
    for dim in (2, 5, 17):
        a = fock.annihilation(dim)
        assert np.array_equal(a.dagger().entries, fock.creation(dim).entries)
        n = fock.number(dim)
        assert np.array_equal(n.entries, n.entries.conj().T)


def test_apply_identity_and_number():
    psi = fock.basis_state(5, 3)
    assert np.array_equal(fock.apply(fock.identity(5), psi), psi.amp)
    assert np.array_equal(fock.apply(fock.number(5), psi), 3.0 * psi.amp)
    assert np.all(fock.apply(fock.annihilation(5), fock.basis_state(5, 0)) == 0.0)


def test_apply_dimension_mismatch():
    with pytest.raises(DimensionError):
        fock.apply(fock.number(4), fock.basis_state(5, 0))


def test_expectation_number_eigenstate():
    assert fock.expectation(fock.number(8), fock.basis_state(8, 3)) == 3.0


def test_expectation_coherent_annihilation():
    psi = fock.coherent_state(64, 2.0)
    assert abs(fock.expectation(fock.annihilation(64), psi) - 2.0) <= 1e-6


def test_expectation_vacuum_position_vanishes():
    assert fock.expectation(fock.position(6), fock.basis_state(6, 0)) == 0.0


def test_expectation_conjugate_symmetry():
    rng = np.random.default_rng(42)
    for _ in range(5):
        mat = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        op = fock.OperatorMatrix(6, mat)
        psi = fock.StateVector.from_amplitudes(
            rng.normal(size=6) + 1j * rng.normal(size=6))
        lhs = fock.expectation(op.dagger(), psi)
        rhs = np.conj(fock.expectation(op, psi))
        assert abs(lhs - rhs) <= 1e-12


def test_expectation_linear_in_operator():
    rng = np.random.default_rng(7)
    psi = fock.StateVector.from_amplitudes(rng.normal(size=5) + 1j * rng.normal(size=5))
    a, n = fock.annihilation(5), fock.number(5)
    combined = fock.expectation(2.0 * a + (-0.5 + 1j) * n, psi)
    parts = 2.0 * fock.expectation(a, psi) + (-0.5 + 1j) * fock.expectation(n, psi)
    assert abs(combined - parts) <= 1e-12


def test_variance_vacuum_position():
    assert fock.variance(fock.position(8), fock.basis_state(8, 0)) == pytest.approx(0.5, abs=1e-12)


def test_variance_number_eigenstate_is_zero():
    assert fock.variance(fock.number(8), fock.basis_state(8, 3)) == pytest.approx(0.0, abs=1e-12)


def test_variance_first_excited_position():
    assert fock.variance(fock.position(8), fock.basis_state(8, 1)) == pytest.approx(1.5, abs=1e-12)


def test_variance_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        fock.variance(fock.annihilation(4), fock.basis_state(4, 0))


def test_variance_nonnegative_on_random_states():
    rng = np.random.default_rng(3)
    q = fock.position(10)
    for _ in range(20):
        psi = fock.StateVector.from_amplitudes(
            rng.normal(size=10) + 1j * rng.normal(size=10))
        assert fock.variance(q, psi) >= -1e-10


def test_projector_fidelity_basis_states():
    psi = fock.basis_state(6, 3)
    assert fock.projector_fidelity(psi, 3) == 1.0
    assert fock.projector_fidelity(psi, 2) == 0.0


def test_projector_fidelity_equal_superposition():
    amp = np.zeros(12)
    amp[[1, 3, 5, 7, 9]] = 1.0
    psi = fock.StateVector.from_amplitudes(amp)
    for k in (1, 3, 5, 7, 9):
        assert fock.projector_fidelity(psi, k) == pytest.approx(0.2, abs=1e-12)


def test_projector_fidelity_index_out_of_range():
    with pytest.raises(IndexError):
        fock.projector_fidelity(fock.basis_state(4, 0), 4)


def test_pure_density_ground_state():
    rho = fock.pure_density(fock.basis_state(2, 0))
    assert np.array_equal(rho.entries, [[1.0, 0.0], [0.0, 0.0]])


def test_pure_density_superposition_block():
    psi = fock.StateVector.from_amplitudes([1.0, 1.0])
    rho = fock.pure_density(psi)
    assert np.allclose(rho.entries, 0.5 * np.ones((2, 2)), atol=1e-15)


def test_pure_density_is_rank_one():
    rng = np.random.default_rng(9)
    psi = fock.StateVector.from_amplitudes(rng.normal(size=7) + 1j * rng.normal(size=7))
    eigs = np.linalg.eigvalsh(fock.pure_density(psi).entries)
    assert eigs[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(eigs[:-1]) <= 1e-12)


def test_position_eigenbasis_two_level():
    _, values = fock.position_eigenbasis(2)
    assert values[0] == pytest.approx(-1.0 / math.sqrt(2.0), abs=1e-12)
    assert values[1] == pytest.approx(+1.0 / math.sqrt(2.0), abs=1e-12)


def test_position_eigenbasis_reconstructs_q():
    for dim in (2, 9, 32):
        u, values = fock.position_eigenbasis(dim)
        rebuilt = u @ np.diag(values) @ u.conj().T
        assert np.max(np.abs(rebuilt - fock.position(dim).entries)) <= 1e-10
        assert np.max(np.abs(u @ u.conj().T - np.eye(dim))) <= 1e-10


def test_position_eigenbasis_symmetric_spectrum():
    _, values = fock.position_eigenbasis(17)
    assert np.max(np.abs(values + values[::-1])) <= 1e-10


def test_top_level_leak():
    assert fock.top_level_leak(fock.basis_state(16, 0)) == 0.0
    assert fock.top_level_leak(fock.basis_state(16, 15)) == 1.0
    # counts exactly the top five levels
    assert fock.top_level_leak(fock.basis_state(16, 11)) == 1.0
    assert fock.top_level_leak(fock.basis_state(16, 10)) == 0.0


def test_coherent_state_mean_occupation():
    psi = fock.coherent_state(64, 2.0)
    assert psi.norm == pytest.approx(1.0, abs=1e-12)
    assert fock.expectation(fock.number(64), psi).real == pytest.approx(4.0, rel=1e-9)


def test_state_vector_rejects_unnormalized():
    with pytest.raises(ValueError):
        fock.StateVector(2, np.array([1.0, 1.0]))


def test_state_vector_rejects_small_dim():
    with pytest.raises(DimensionError):
        fock.basis_state(1, 0)
    with pytest.raises(DimensionError):
        fock.annihilation(1)


def test_hermitian_hint_enforced():
    with pytest.raises(HermiticityError):
        fock.OperatorMatrix(3, fock.annihilation(3).entries, hermitian_hint=True)


def test_density_matrix_invariants_enforced():
    with pytest.raises(HermiticityError):
        fock.DensityMatrix(2, np.array([[0.5, 0.5j], [0.5j, 0.5]]))
    with pytest.raises(ValueError):
        fock.DensityMatrix(2, np.diag([0.7, 0.7]))
    bad = fock.DensityMatrix(2, np.array([[1.5, 0.0], [0.0, -0.5]]))
    with pytest.raises(ValueError):
        bad.validate()
