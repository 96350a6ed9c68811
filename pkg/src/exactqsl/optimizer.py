"""Search for time-optimal constant Hamiltonians between two states.

Candidates are real combinations of generalized Gell-Mann generators, rescaled
so the energy uncertainty in the initial state equals a fixed cap.  The search
is Nelder-Mead with seeded random restarts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import (
    HBAR,
    as_hermitian,
    as_state,
    complete_basis_from,
    expectation,
    hilbert_angle,
    hilbert_angles,
    variance,
)
from .decomposition import classical_part
from .errors import NoImprovementError, NotReachedError
from .evolution import HamiltonianSchedule, _golden_min, first_passage_time, state_at

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    generators: np.ndarray  # (d*d - 1, d, d)

    @property
    def d(self) -> int:
        return self.generators.shape[1]

    def __len__(self) -> int:
        return self.generators.shape[0]

    def combine(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.generators, axes=1)


def gell_mann_basis(d: int) -> GeneratorBasis:
    """Symmetric, antisymmetric and diagonal generalized Gell-Mann matrices, tr(G_a G_b) = 2 delta_ab."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    gens = []
    for j in range(d):
        for k in range(j + 1, d):
            g = np.zeros((d, d), dtype=np.complex128)
            g[j, k] = g[k, j] = 1.0
            gens.append(g)
    for j in range(d):
        for k in range(j + 1, d):
            g = np.zeros((d, d), dtype=np.complex128)
            g[j, k] = -1j
            g[k, j] = 1j
            gens.append(g)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        gens.append(np.diag(diag * math.sqrt(2.0 / (l * (l + 1)))).astype(np.complex128))
    return GeneratorBasis(np.array(gens))


def optimal_hamiltonian(psi, psi_perp, omega: float = 1.0, hbar: float = HBAR) -> np.ndarray:
    """hbar * omega * (|psi><psi_perp| + h.c.)."""
    psi = np.asarray(psi, dtype=np.complex128)
    psi_perp = np.asarray(psi_perp, dtype=np.complex128)
    op = np.outer(psi, psi_perp.conj())
    return hbar * omega * (op + op.conj().T)


def geodesic_hamiltonian(psi0, target, cap: float = 1.0, hbar: float = HBAR) -> np.ndarray:
    """Optimal-form Hamiltonian carrying psi0 to target along the geodesic with dH = cap."""
    psi0 = as_state(psi0)
    target = as_state(target)
    amp = np.vdot(psi0, target)
    if abs(amp) > 0:
        target = target * (abs(amp) / amp)  # real positive overlap
    perp = target - np.vdot(psi0, target) * psi0
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        raise ValueError("target coincides with the initial state")
    # the geodesic from psi0 moves as cos(w t) psi0 - i sin(w t) perp
    return optimal_hamiltonian(psi0, 1j * perp / norm, cap / hbar, hbar)


@dataclass
class OptimizerConfig:
    restarts: int = 8
    seed: int = 0
    angle_tol: float = 1e-8
    horizon_factor: float = 4.0  # T_max = horizon_factor * hbar * Theta / cap
    grid_steps: int = 256
    penalty_weight: float = 2.0
    objective: str = "surrogate"  # or "passage"
    normalization: str = "variance"  # or "spectral"
    maxiter: int | None = None  # per restart; None means 200 per generator coefficient
    xatol: float = 1e-8
    fatol: float = 1e-9
    hbar: float = HBAR


@dataclass
class Diagnostics:
    classical_norm: float
    mt_gap: float | None
    converged: bool
    form_match: bool = False
    fitted_omega: float = 0.0
    form_residual: float = math.inf


@dataclass
class OptimizationResult:
    H_opt: np.ndarray
    T_opt: float
    iterations: int
    diagnostics: Diagnostics
    mt_floor: float
    candidate_times: list[float] = field(default_factory=list)
    objective_values: list[float] = field(default_factory=list)


class _Objective:
    """Exact-penalty surrogate of the first-passage time.

    f(H) = min_t [ t + w * hbar * angle(psi_t, target) / cap ] over [floor, T_max].
    Since the state's angular speed never exceeds cap / hbar, any w > 1 makes f
    equal the passage time for Hamiltonians that reach the target and keeps it
    above the Mandelstam-Tamm floor everywhere, while staying continuous in H.
    Times below the floor cannot reach the target, so they are left out; keeping
    them puts a flat plateau of height w * floor (the value at t = 0) under every
    Hamiltonian that first moves the state away from the target.
    """

    def __init__(self, gens: GeneratorBasis, psi0, target, cap: float, cfg: OptimizerConfig):
        self.gens = gens
        self.psi0 = psi0
        self.target = target
        self.cap = cap
        self.cfg = cfg
        self.theta = hilbert_angle(psi0, target)
        self.floor = cfg.hbar * self.theta / cap
        self.T_max = cfg.horizon_factor * self.floor
        self.times = np.linspace(self.floor, self.T_max, cfg.grid_steps + 1)
        self.candidate_times: list[float] = []
        self.values: list[float] = []

    def hamiltonian(self, x) -> np.ndarray | None:
        H = self.gens.combine(x)
        if self.cfg.normalization == "spectral":
            scale = float(np.max(np.abs(np.linalg.eigvalsh(H))))
        else:
            scale = math.sqrt(variance(H, self.psi0))
        if scale < 1e-12:
            return None
        return H * (self.cap / scale)

    def _surrogate(self, H) -> float:
        evals, evecs = np.linalg.eigh(H)
        amps = evecs.conj().T @ self.psi0
        hbar = self.cfg.hbar
        w = self.cfg.penalty_weight * hbar / self.cap
        states = (np.exp(-1j * np.outer(self.times, evals) / hbar) * amps) @ evecs.T
        vals = self.times + w * hilbert_angles(self.target, states)
        k = int(np.argmin(vals))
        lo = self.times[max(k - 1, 0)]
        hi = self.times[min(k + 1, len(self.times) - 1)]

        def f(t):
            psi = evecs @ (np.exp(-1j * evals * t / hbar) * amps)
            return t + w * hilbert_angle(self.target, psi)

        t_best, f_best = _golden_min(f, lo, hi, 1e-11)
        if f_best - t_best < w * self.cfg.angle_tol:
            self.candidate_times.append(t_best)
        return min(f_best, float(vals[k]))

    def _passage(self, H) -> float:
        sched = HamiltonianSchedule.constant(H)
        try:
            t = first_passage_time(sched, self.psi0, self.target, self.cfg.angle_tol, self.T_max,
                                   steps=self.cfg.grid_steps, hbar=self.cfg.hbar)
        except NotReachedError:
            return self.T_max
        self.candidate_times.append(t)
        return t

    def __call__(self, x) -> float:
        H = self.hamiltonian(x)
        if H is None:
            val = 2.0 * self.T_max
        elif self.cfg.objective == "passage":
            val = self._passage(H)
        else:
            val = self._surrogate(H)
        self.values.append(val)
        return val


def minimize_evolution_time(psi0, target, variance_cap: float = 1.0,
                            config: OptimizerConfig | None = None) -> OptimizationResult:
    """Find a constant Hamiltonian with dH = ``variance_cap`` that reaches ``target`` fastest.

    ``variance_cap`` caps the energy standard deviation of H in ``psi0``.
    """
    cfg = config or OptimizerConfig()
    psi0 = as_state(psi0)
    target = as_state(target)
    if not variance_cap > 0:
        raise ValueError("variance_cap must be positive")
    if hilbert_angle(psi0, target) <= 1e-8:
        raise ValueError("target coincides with the initial state up to phase")
    d = psi0.shape[0]
    gens = gell_mann_basis(d)
    obj = _Objective(gens, psi0, target, variance_cap, cfg)
    rng = np.random.default_rng(cfg.seed)

    best = None
    iterations = 0
    maxiter = cfg.maxiter or 200 * len(gens)
    for r in range(cfg.restarts):
        x0 = rng.normal(size=len(gens)) if best is None or r % 2 == 0 else best.x + 0.1 * rng.normal(size=len(gens))
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": cfg.xatol, "fatol": cfg.fatol,
                                "adaptive": len(gens) > 3})
        iterations += int(res.nit)
        log.debug("restart %d: f=%.10f nit=%d", r, res.fun, res.nit)
        if best is None or res.fun < best.fun:
            best = res

    # the passage time is quadratic in the distance to the optimum, so a loose fatol
    # leaves a visible classical part; polish the incumbent with tight tolerances
    res = minimize(obj, best.x, method="Nelder-Mead",
                   options={"maxiter": 2 * maxiter, "xatol": cfg.xatol * 1e-3, "fatol": cfg.fatol * 1e-4,
                            "adaptive": len(gens) > 3})
    iterations += int(res.nit)
    if res.fun <= best.fun:
        best = res

    H = obj.hamiltonian(best.x)
    if H is None:
        raise NoImprovementError("optimizer collapsed onto a Hamiltonian that leaves psi0 stationary")
    sched = HamiltonianSchedule.constant(H)
    try:
        T_opt = first_passage_time(sched, psi0, target, cfg.angle_tol, obj.T_max,
                                   steps=cfg.grid_steps, hbar=cfg.hbar)
    except NotReachedError as exc:
        raise NoImprovementError("no restart produced a Hamiltonian that reaches the target") from exc
    diag = optimality_diagnostics(H, psi0, target, hbar=cfg.hbar, angle_tol=cfg.angle_tol,
                                  T_max=obj.T_max)
    diag.converged = bool(best.success)
    return OptimizationResult(
        H_opt=H,
        T_opt=T_opt,
        iterations=iterations,
        diagnostics=diag,
        mt_floor=obj.floor,
        candidate_times=obj.candidate_times,
        objective_values=obj.values,
    )


def optimality_diagnostics(H, psi0, target=None, hbar: float = HBAR, angle_tol: float = 1e-8,
                           T_max: float | None = None, form_rtol: float = 1e-6,
                           samples: int = 64) -> Diagnostics:
    """Classical-part norm, Mandelstam-Tamm gap and optimal-form fit for a constant H.

    H is first shifted by -<psi0|H|psi0>, since an energy offset only changes the
    global phase but adds itself to every classical coefficient.  ``classical_norm``
    is then the largest Frobenius norm of H_cl (basis completed from psi0) along the
    evolution up to the passage of ``target``, or up to one geodesic time without a
    target.  The optimal form is fitted on the columns of H that act on
    span{psi0, H psi0}; whatever H does outside that plane never touches the state.
    """
    H = as_hermitian(H)
    psi0 = as_state(psi0)
    d = len(psi0)
    Hs = H - expectation(H, psi0) * np.eye(d)
    basis = complete_basis_from(psi0)
    dH = math.sqrt(variance(H, psi0))
    sched = HamiltonianSchedule.constant(Hs)

    mt_gap = None
    horizon = (math.pi / 2) * hbar / dH if dH > 1e-12 else 1.0
    if target is not None and dH > 1e-12:
        th = hilbert_angle(psi0, target)
        T_max = T_max or 4.0 * hbar * th / dH
        try:
            t_pass = first_passage_time(sched, psi0, target, angle_tol, T_max, hbar=hbar)
            mt_gap = t_pass - hbar * th / dH
            horizon = t_pass
        except NotReachedError:
            pass

    cl_norm = 0.0
    for t in np.linspace(0.0, horizon, samples + 1):
        psi_t = state_at(sched, psi0, t, hbar)
        cl = classical_part(Hs, psi_t, basis).classical
        cl_norm = max(cl_norm, float(np.linalg.norm(cl)))

    v = Hs @ psi0  # orthogonal to psi0 after the shift
    omega = float(np.linalg.norm(v)) / hbar
    if omega > 1e-12:
        perp = v / (omega * hbar)
        fit = optimal_hamiltonian(psi0, perp, omega, hbar)
        plane = np.stack([psi0, perp], axis=1)
        residual = float(np.linalg.norm((Hs - fit) @ plane)) / float(np.linalg.norm(Hs @ plane))
    else:
        residual = math.inf
    return Diagnostics(
        classical_norm=cl_norm,
        mt_gap=mt_gap,
        converged=True,
        form_match=residual < form_rtol,
        fitted_omega=omega,
        form_residual=residual,
    )
