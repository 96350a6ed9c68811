"""State and operator primitives shared by the rest of the package.

States are 1-D complex numpy arrays and operators are 2-D complex arrays; the
``as_*`` helpers validate and coerce user input.  Everything here is a pure
function, so values can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionMismatchError, NumericalError

HBAR = 1.0

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10
MAX_DIM = 64

I2 = np.eye(2, dtype=np.complex128)
SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def ket(label: str) -> np.ndarray:
    """Computational-basis qubit ket, e.g. ``ket("01")`` = |0>|1>."""
    if not label or set(label) - {"0", "1"}:
        raise ValueError(f"ket label must be a non-empty bit string, got {label!r}")
    psi = np.zeros(2 ** len(label), dtype=np.complex128)
    psi[int(label, 2)] = 1.0
    return psi


def as_state(psi, tol: float = NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim != 1:
        raise ValueError(f"state must be a vector, got shape {psi.shape}")
    if psi.shape[0] < 2:
        raise ValueError("state dimension must be at least 2")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm = {norm!r})")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return psi / np.linalg.norm(psi)


def as_hermitian(op, tol: float = HERMITIAN_TOL) -> np.ndarray:
    op = np.asarray(op, dtype=np.complex128)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {op.shape}")
    dev = np.max(np.abs(op - op.conj().T)) if op.size else 0.0
    if dev > tol:
        raise ValueError(f"operator is not Hermitian (max deviation {dev:.3e})")
    return op


def _check_dims(op: np.ndarray, psi: np.ndarray) -> None:
    if op.shape[-1] != psi.shape[-1]:
        raise DimensionMismatchError(
            f"operator acts on dimension {op.shape[-1]}, state has dimension {psi.shape[-1]}"
        )


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Ordered orthonormal basis; ``vectors[i]`` is the i-th basis ket."""

    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.complex128)
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1]:
            raise ValueError(f"basis needs d vectors of length d, got shape {vecs.shape}")
        gram = vecs.conj() @ vecs.T
        dev = np.max(np.abs(gram - np.eye(len(vecs))))
        if dev > ORTHONORMAL_TOL:
            raise ValueError(f"basis vectors are not orthonormal (deviation {dev:.3e})")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        """Amplitudes <a_i|psi>; works on a single state or a stack of states."""
        return np.asarray(psi) @ self.vectors.conj().T

    @classmethod
    def canonical(cls, d: int) -> OrthonormalBasis:
        return cls(np.eye(d, dtype=np.complex128))


def expectation(op, psi) -> float:
    op = np.asarray(op, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_dims(op, psi)
    val = np.vdot(psi, op @ psi)
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"expectation has imaginary part {val.imag:.3e}; operator not Hermitian?")
    return float(val.real)


def variance(op, psi) -> float:
    """<O^2> - <O>^2, clamped at zero against rounding."""
    op = np.asarray(op, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_dims(op, psi)
    opsi = op @ psi
    mean = np.vdot(psi, opsi).real
    var = float(np.vdot(opsi, opsi).real - mean**2)
    return max(var, 0.0)


def hilbert_angle(psi_a, psi_b) -> float:
    """Angle arccos|<a|b>| between two rays, in [0, pi/2].

    Evaluated as atan2(|b - <a|b> a|, |<a|b>|), which equals the arccos form for
    unit vectors but keeps full relative precision for nearly parallel states.
    """
    psi_a = np.asarray(psi_a, dtype=np.complex128)
    psi_b = np.asarray(psi_b, dtype=np.complex128)
    if psi_a.shape != psi_b.shape:
        raise DimensionMismatchError(f"state shapes differ: {psi_a.shape} vs {psi_b.shape}")
    amp = np.vdot(psi_a, psi_b)
    perp = np.linalg.norm(psi_b - amp * psi_a)
    return float(np.arctan2(perp, min(abs(amp), 1.0)))


def hilbert_angles(psi_a, states) -> np.ndarray:
    """Vectorised :func:`hilbert_angle` from one state to each row of ``states``."""
    states = np.asarray(states, dtype=np.complex128)
    psi_a = np.asarray(psi_a, dtype=np.complex128)
    amp = states @ psi_a.conj()
    perp = np.linalg.norm(states - amp[:, None] * psi_a[None, :], axis=1)
    return np.arctan2(perp, np.minimum(np.abs(amp), 1.0))


def eigh(op) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(np.asarray(op, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc


def spectral_exponential(H, t: float, hbar: float = HBAR) -> np.ndarray:
    """exp(-i t H / hbar) from the eigendecomposition of H."""
    evals, evecs = eigh(H)
    phases = np.exp(-1j * evals * (t / hbar))
    return (evecs * phases) @ evecs.conj().T


def complete_basis_from(psi0, *more) -> OrthonormalBasis:
    """Orthonormal basis whose leading vectors are ``psi0`` (and ``more``, orthonormalised).

    The remaining vectors come from Gram-Schmidt over the canonical unit vectors;
    a canonical vector whose residual norm falls below 1e-8 is skipped.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    d = psi0.shape[0]
    vecs: list[np.ndarray] = [psi0 / np.linalg.norm(psi0)]
    candidates = [np.asarray(v, dtype=np.complex128) for v in more]
    candidates += list(np.eye(d, dtype=np.complex128))
    for v in candidates:
        if len(vecs) == d:
            break
        w = v.copy()
        # two passes keep the result orthogonal to ~1e-16
        for _ in range(2):
            for u in vecs:
                w = w - np.vdot(u, w) * u
        n = np.linalg.norm(w)
        if n < 1e-8:
            continue
        vecs.append(w / n)
    return OrthonormalBasis(np.array(vecs))


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_state(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def random_hermitian(d: int, seed=None) -> np.ndarray:
    """GUE sample scaled so that the spectrum stays O(1) as d grows."""
    rng = _rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / (2.0 * np.sqrt(2.0 * d))


def random_unitary(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_self_inverse(d: int, seed=None) -> np.ndarray:
    """V D V^dagger with D = diag(+-1) (both signs present) and Haar-random V."""
    rng = _rng(seed)
    signs = rng.choice([-1.0, 1.0], size=d)
    if np.all(signs == signs[0]):
        signs[rng.integers(d)] *= -1.0
    v = random_unitary(d, rng)
    h = (v * signs) @ v.conj().T
    return (h + h.conj().T) / 2.0
