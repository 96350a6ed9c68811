"""Classical / non-classical split of an observable relative to a reference basis.

For a pure state rho = |psi><psi| and a basis {|a_k>}, the classical part of B is

    B_cl = sum_k |a_k><a_k| <a_k|{B, rho}/2|a_k> / <a_k|rho|a_k>

and the non-classical part is B - B_cl.  Basis states carrying (numerically)
zero probability have no well-defined coefficient; we set it to zero there.
This never changes any expectation value in psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HBAR, OrthonormalBasis, _check_dims, variance
from .errors import DimensionMismatchError, NumericalError, StationaryError

SUPPORT_EPS = 1e-12
FISHER_EPS = 1e-14
INFINITE = math.inf


@dataclass(frozen=True, eq=False)
class ClassicalSplit:
    classical: np.ndarray
    nonclassical: np.ndarray
    basis: OrthonormalBasis
    support_mask: np.ndarray
    coefficients: np.ndarray  # m_k, the eigenvalues of the classical part


def _prepare(B, psi, basis: OrthonormalBasis):
    B = np.asarray(B, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_dims(B, psi)
    if basis.dim != psi.shape[-1]:
        raise DimensionMismatchError(
            f"basis has dimension {basis.dim}, state has dimension {psi.shape[-1]}"
        )
    return B, psi


def classical_part(B, psi, basis: OrthonormalBasis) -> ClassicalSplit:
    B, psi = _prepare(B, psi, basis)
    c = basis.coefficients(psi)
    g = basis.coefficients(B @ psi)
    p = np.abs(c) ** 2
    mask = p > SUPPORT_EPS
    # <a_k|{B,rho}/2|a_k> = Re(<a_k|B|psi><psi|a_k>)
    m = np.zeros(len(p))
    m[mask] = (g[mask] * c[mask].conj()).real / p[mask]
    vecs = basis.vectors
    classical = (vecs.T * m) @ vecs.conj()
    return ClassicalSplit(
        classical=classical,
        nonclassical=B - classical,
        basis=basis,
        support_mask=mask,
        coefficients=m,
    )


def nonclassical_variance_from_amplitudes(B, psi, basis: OrthonormalBasis) -> float:
    """<B^2> - sum_k (<a_k|B|psi><psi|a_k> + c.c.)^2 / (4 |<a_k|psi>|^2).

    Independent evaluation route used to cross-check :func:`nonclassical_variance`.
    """
    B, psi = _prepare(B, psi, basis)
    bpsi = B @ psi
    c = basis.coefficients(psi)
    g = basis.coefficients(bpsi)
    p = np.abs(c) ** 2
    mask = p > SUPPORT_EPS
    cross = 2.0 * (g[mask] * c[mask].conj()).real
    val = np.vdot(bpsi, bpsi).real - np.sum(cross**2 / (4.0 * p[mask]))
    return max(float(val), 0.0)


def nonclassical_variance(B, psi, basis: OrthonormalBasis, verify: bool = False) -> float:
    """Variance of the non-classical part of B in psi.

    With ``verify=True`` the amplitude form is computed as well and the two must
    agree to 1e-9, along with (dB)^2 = (dB_cl)^2 + (dB_nc)^2.
    """
    split = classical_part(B, psi, basis)
    var_nc = variance(split.nonclassical, psi)
    if verify:
        alt = nonclassical_variance_from_amplitudes(B, psi, basis)
        if abs(alt - var_nc) > 1e-9:
            raise NumericalError(f"non-classical variance routes disagree: {var_nc!r} vs {alt!r}")
        total = variance(B, psi)
        var_cl = variance(split.classical, psi)
        if abs(total - var_cl - var_nc) > 1e-9:
            raise NumericalError(
                f"variance split violated: {total!r} != {var_cl!r} + {var_nc!r}"
            )
    return var_nc


def dispersion(a_basis: OrthonormalBasis, B, psi, hbar: float = HBAR) -> float:
    """Hall's dispersion of A (given by its eigenbasis) under changes generated by B.

    Returns :data:`INFINITE` when the state is stationary in this basis.
    """
    B, psi = _prepare(B, psi, a_basis)
    rho = np.outer(psi, psi.conj())
    gen = (1j / hbar) * (B @ rho - rho @ B)
    vecs = a_basis.vectors
    diag_gen = np.einsum("ki,ij,kj->k", vecs.conj(), gen, vecs).real
    p = np.abs(a_basis.coefficients(psi)) ** 2
    mask = p > SUPPORT_EPS
    fisher = float(np.sum(diag_gen[mask] ** 2 / p[mask]))
    if fisher < FISHER_EPS:
        return INFINITE
    return fisher**-0.5


def exact_ur_residual(a_basis: OrthonormalBasis, B, psi, hbar: float = HBAR) -> float:
    """|dispersion * dB_nc - hbar/2|; raises StationaryError in the degenerate case."""
    delta = dispersion(a_basis, B, psi, hbar)
    if math.isinf(delta):
        raise StationaryError("state is stationary under B relative to this basis")
    dbnc = math.sqrt(nonclassical_variance(B, psi, a_basis))
    return abs(delta * dbnc - hbar / 2.0)


def uncertainty_series(H, states, basis: OrthonormalBasis):
    """Standard deviations of H, H_cl and H_nc for each row of ``states``.

    ``H`` is a single (d, d) operator or a stack (N, d, d) aligned with ``states``.
    Returns three arrays ``(dH, dH_cl, dH_nc)``.
    """
    H = np.asarray(H, dtype=np.complex128)
    states = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    if H.ndim == 2:
        hpsi = states @ H.T
    else:
        hpsi = np.einsum("nij,nj->ni", H, states)
    vecs = basis.vectors
    c = states @ vecs.conj().T
    g = hpsi @ vecs.conj().T
    p = np.abs(c) ** 2
    mask = p > SUPPORT_EPS
    m = np.where(mask, (g * c.conj()).real / np.where(mask, p, 1.0), 0.0)
    clpsi = (m * c) @ vecs
    ncpsi = hpsi - clpsi

    def _std(opsi):
        mean = np.einsum("ni,ni->n", states.conj(), opsi).real
        var = np.einsum("ni,ni->n", opsi.conj(), opsi).real - mean**2
        return np.sqrt(np.maximum(var, 0.0))

    return _std(hpsi), _std(clpsi), _std(ncpsi)
