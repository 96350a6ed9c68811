from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exactqsl.core import I2, SX, SZ, OrthonormalBasis, complete_basis_from, expectation, ket, kron, variance
from exactqsl.core import random_hermitian, random_state, random_unitary
from exactqsl.decomposition import (
    INFINITE,
    classical_part,
    dispersion,
    exact_ur_residual,
    nonclassical_variance,
    nonclassical_variance_from_amplitudes,
    uncertainty_series,
)
from exactqsl.errors import DimensionMismatchError, StationaryError

CANON = OrthonormalBasis.canonical(2)
PLUS = np.array([1, 1]) / math.sqrt(2)
seeds = st.integers(min_value=0, max_value=2**31 - 1)
dims = st.sampled_from([2, 3, 4, 8])


def test_classical_part_commuting():
    split = classical_part(SZ, [1, 0], CANON)
    assert np.allclose(split.classical, [[1, 0], [0, 0]])
    assert list(split.support_mask) == [True, False]
    assert expectation(split.classical, [1, 0]) == pytest.approx(1.0)


def test_classical_part_off_diagonal():
    assert np.allclose(classical_part(SX, [1, 0], CANON).classical, 0)


def test_classical_part_plus_state():
    split = classical_part(SX, PLUS, CANON)
    assert np.allclose(split.classical, np.eye(2))
    assert np.allclose(split.nonclassical, SX - np.eye(2))
    assert variance(split.nonclassical, PLUS) == pytest.approx(0.0, abs=1e-15)


def test_nonclassical_variance_examples():
    H = kron(SX, I2) + kron(I2, SX)
    assert nonclassical_variance(H, ket("00"), OrthonormalBasis.canonical(4), verify=True) == pytest.approx(2.0)
    assert np.allclose(classical_part(H, ket("00"), OrthonormalBasis.canonical(4)).classical, 0)
    assert nonclassical_variance(SZ, [1, 0], CANON, verify=True) == 0.0
    t = math.pi / 4
    psi = np.array([math.cos(t), -1j * math.sin(t)])
    assert nonclassical_variance(SX, psi, CANON, verify=True) == pytest.approx(1.0, abs=1e-14)


def test_dispersion_examples():
    psi = np.array([1, -1j]) / math.sqrt(2)
    assert dispersion(CANON, SX, psi) == pytest.approx(0.5, abs=1e-14)
    assert dispersion(CANON, SZ, [1, 0]) == INFINITE


def test_exact_ur_examples():
    t = 0.3
    psi = np.array([math.cos(t), -1j * math.sin(t)])
    assert exact_ur_residual(CANON, SX, psi) < 1e-10
    with pytest.raises(StationaryError):
        exact_ur_residual(CANON, SZ, [1, 0])


def test_exact_ur_with_hbar():
    t = 0.3
    psi = np.array([math.cos(t), -1j * math.sin(t)])
    assert exact_ur_residual(CANON, SX, psi, hbar=2.5) < 1e-10


def test_dimension_checks():
    with pytest.raises(DimensionMismatchError):
        classical_part(SX, [1, 0, 0], CANON)
    with pytest.raises(DimensionMismatchError):
        classical_part(np.eye(3), [1, 0, 0], CANON)


@given(seeds, dims)
def test_split_invariants(seed, d):
    B = random_hermitian(d, seed)
    psi = random_state(d, seed + 1)
    basis = OrthonormalBasis(random_unitary(d, seed + 2).T)
    split = classical_part(B, psi, basis)
    assert np.max(np.abs(split.classical + split.nonclassical - B)) < 1e-12
    # diagonal in the basis: commutes with every projector
    for a in basis.vectors:
        P = np.outer(a, a.conj())
        assert np.max(np.abs(split.classical @ P - P @ split.classical)) < 1e-12
    assert abs(expectation(split.classical, psi) - expectation(B, psi)) < 1e-10
    total = variance(B, psi)
    parts = variance(split.classical, psi) + variance(split.nonclassical, psi)
    assert abs(total - parts) < 1e-9
    assert abs(nonclassical_variance(B, psi, basis) - nonclassical_variance_from_amplitudes(B, psi, basis)) < 1e-9


@given(seeds, dims)
def test_exact_ur_random(seed, d):
    B = random_hermitian(d, seed)
    psi = random_state(d, seed + 1)
    basis = complete_basis_from(random_state(d, seed + 2))
    assert exact_ur_residual(basis, B, psi) < 1e-9


def test_unsupported_coefficient_convention():
    # zero-probability outcome: coefficient set to zero, the amplitude form still agrees
    B = random_hermitian(3, 4)
    psi = np.array([0.6, 0.8, 0.0])
    split = classical_part(B, psi, OrthonormalBasis.canonical(3))
    assert split.coefficients[2] == 0.0
    assert nonclassical_variance(B, psi, OrthonormalBasis.canonical(3), verify=True) >= 0


def test_basis_dependence():
    B = random_hermitian(3, 11)
    psi = random_state(3, 12)
    a = classical_part(B, psi, OrthonormalBasis.canonical(3)).classical
    b = classical_part(B, psi, complete_basis_from(psi)).classical
    assert not np.allclose(a, b)


def test_uncertainty_series_matches_pointwise():
    B = random_hermitian(4, 3)
    basis = complete_basis_from(random_state(4, 5))
    states = np.array([random_state(4, s) for s in range(6)])
    dH, dHcl, dHnc = uncertainty_series(B, states, basis)
    for k, psi in enumerate(states):
        split = classical_part(B, psi, basis)
        assert dH[k] == pytest.approx(math.sqrt(variance(B, psi)), abs=1e-12)
        assert dHcl[k] == pytest.approx(math.sqrt(variance(split.classical, psi)), abs=1e-7)
        assert dHnc[k] == pytest.approx(math.sqrt(nonclassical_variance(B, psi, basis)), abs=1e-12)
