"""Speed-limit quantities evaluated on a trajectory.

All time averages use the trajectory grid with Simpson quadrature; callers who
need a converged number should go through :func:`refine`, which doubles the
grid until the value settles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    HBAR,
    OrthonormalBasis,
    as_hermitian,
    as_state,
    complete_basis_from,
    expectation,
    hilbert_angle,
    variance,
)
from .decomposition import SUPPORT_EPS, uncertainty_series
from .evolution import (
    MAX_STEPS,
    HamiltonianSchedule,
    Monotonicity,
    Trajectory,
    default_steps,
    evolve,
    monotonicity,
    state_at,
    time_average,
)
from .errors import (
    DegenerateError,
    NonMonotonicError,
    NotEffectively2DError,
    NotSelfInverseError,
    TimeDependentError,
)

DEGENERATE_EPS = 1e-12
LEAKAGE_TOL = 1e-8
SELF_INVERSE_TOL = 1e-10


def _basis_for(traj: Trajectory, basis: OrthonormalBasis | None) -> OrthonormalBasis:
    if basis is None:
        return complete_basis_from(traj.initial)
    if basis.dim != traj.states.shape[1]:
        raise ValueError(f"basis dimension {basis.dim} does not match trajectory")
    return basis


def _require_initial_in_basis(traj: Trajectory, basis: OrthonormalBasis) -> None:
    overlap = abs(np.vdot(basis.vectors[0], traj.initial))
    if abs(overlap - 1.0) > 1e-10:
        raise ValueError("the first basis vector must be the initial state (up to phase)")


def theta(traj: Trajectory) -> float:
    """Hilbert-space angle between the first and last states."""
    return hilbert_angle(traj.initial, traj.final)


def uncertainty_profile(traj: Trajectory, basis: OrthonormalBasis | None = None):
    """Per-grid-point (dH, dH_cl, dH_nc) with the Hamiltonian evaluated at each time."""
    basis = _basis_for(traj, basis)
    return uncertainty_series(traj.hamiltonians(), traj.states, basis)


def nonclassical_series(traj: Trajectory, basis: OrthonormalBasis | None = None) -> np.ndarray:
    return uncertainty_profile(traj, basis)[2]


def _segments(traj: Trajectory) -> list[tuple[int, int]]:
    """Index ranges [a, c] between breakpoints of the schedule that sit on grid nodes.

    Integrands jump where H jumps, so each smooth piece is integrated on its own.
    Breakpoints between nodes cannot be separated and are left to refinement.
    """
    n = traj.step_count
    cuts = {0, n}
    for b in traj.schedule.breakpoints:
        k = int(round(b / traj.T * n))
        if 0 < k < n and abs(traj.times[k] - b) <= 1e-12 * traj.T:
            cuts.add(k)
    cuts = sorted(cuts)
    pieces = list(zip(cuts[:-1], cuts[1:]))
    if any(c - a < 4 for a, c in pieces):
        return [(0, n)]
    return pieces


def _segment_hamiltonians(traj: Trajectory, a: int, c: int) -> np.ndarray:
    if traj.schedule.is_constant:
        return traj.schedule.evaluate(0.0)
    t = traj.times[a:c + 1].copy()
    # one-sided limits at the segment ends
    nudge = 1e-9 * (t[1] - t[0])
    t[0] += nudge
    t[-1] -= nudge
    return np.array([traj.schedule.evaluate(x) for x in t])


def _integral(y: np.ndarray, dx: float) -> float:
    span = dx * (len(y) - 1)
    return time_average(y, span) * span


def _averages(traj: Trajectory, basis: OrthonormalBasis) -> tuple[float, float, float]:
    """Time averages of (dH, dH_cl, dH_nc), integrated piece by piece."""
    dx = _dt(traj)
    totals = np.zeros(3)
    for a, c in _segments(traj):
        series = uncertainty_series(_segment_hamiltonians(traj, a, c), traj.states[a:c + 1], basis)
        totals += [_integral(s, dx) for s in series]
    return tuple(float(v) / traj.T for v in totals)


def avg_nonclassical_uncertainty(traj: Trajectory, basis: OrthonormalBasis | None = None) -> float:
    basis = _basis_for(traj, basis)
    _require_initial_in_basis(traj, basis)
    return _averages(traj, basis)[2]


def avg_uncertainty(traj: Trajectory) -> float:
    return _averages(traj, _basis_for(traj, None))[0]


# --- derivatives -----------------------------------------------------------


def derivative(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order finite differences along axis 0 (central inside, one-sided at the edges)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples for the derivative stencil")
    out = np.empty_like(y)
    out[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * dx)
    out[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12.0 * dx)
    out[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12.0 * dx)
    out[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12.0 * dx)
    out[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12.0 * dx)
    return out


def _dt(traj: Trajectory) -> float:
    return traj.T / traj.step_count


def path_speed(traj: Trajectory, basis: OrthonormalBasis | None = None) -> np.ndarray:
    """Speed of the real vector sum_i |c_i(t)| |a_i>, from differences of |c_i(t)|."""
    basis = _basis_for(traj, basis)
    mags = np.abs(basis.coefficients(traj.states))
    return np.sqrt(np.sum(derivative(mags, _dt(traj)) ** 2, axis=1))


def real_path_length(traj: Trajectory, basis: OrthonormalBasis | None = None) -> float:
    """Length of the curve traced by (|c_0(t)|, ..., |c_{d-1}(t)|) over [0, T]."""
    basis = _basis_for(traj, basis)
    _require_initial_in_basis(traj, basis)
    dx = _dt(traj)
    mags = np.abs(basis.coefficients(traj.states))
    total = 0.0
    for a, c in _segments(traj):
        speed = np.sqrt(np.sum(derivative(mags[a:c + 1], dx) ** 2, axis=1))
        total += _integral(speed, dx)
    return total


def classical_fisher(traj: Trajectory, basis: OrthonormalBasis | None = None) -> np.ndarray:
    """F(t) = sum_i (dp_i/dt)^2 / p_i over basis outcomes with p_i above the support threshold."""
    basis = _basis_for(traj, basis)
    probs = np.abs(basis.coefficients(traj.states)) ** 2
    dp = derivative(probs, _dt(traj))
    mask = probs > SUPPORT_EPS
    terms = np.where(mask, dp**2 / np.where(mask, probs, 1.0), 0.0)
    return terms.sum(axis=1)


# --- time estimates ----------------------------------------------------------


def _nonzero_average(avg: float) -> float:
    if avg < DEGENERATE_EPS:
        raise DegenerateError("time-averaged non-classical uncertainty vanishes (stationary evolution)")
    return avg


def two_level_basis(traj: Trajectory) -> OrthonormalBasis:
    """{psi0, psi0_perp, ...} with psi0_perp taken from the trajectory itself."""
    psi0 = traj.initial
    perp = traj.states - np.outer(traj.states @ psi0.conj(), psi0)
    k = int(np.argmax(np.linalg.norm(perp, axis=1)))
    if np.linalg.norm(perp[k]) < 1e-12:
        return complete_basis_from(psi0)
    return complete_basis_from(psi0, perp[k])


def leakage(traj: Trajectory, basis: OrthonormalBasis) -> float:
    """Largest norm of the trajectory outside span{basis[0], basis[1]}."""
    coeffs = basis.coefficients(traj.states)
    return float(np.max(np.linalg.norm(coeffs[:, 2:], axis=1))) if basis.dim > 2 else 0.0


def exact_time_2d(traj: Trajectory, basis: OrthonormalBasis | None = None) -> float:
    """hbar * Theta / <<dH_nc>>, valid when the survival probability decreases monotonically."""
    basis = basis or two_level_basis(traj)
    _require_initial_in_basis(traj, basis)
    leak = leakage(traj, basis)
    if leak > LEAKAGE_TOL:
        raise NotEffectively2DError(f"trajectory leaves the two-dimensional subspace (leakage {leak:.3e})")
    if monotonicity(traj.survival) is not Monotonicity.DECREASING:
        raise NonMonotonicError("survival probability is not monotonically decreasing")
    avg = _nonzero_average(avg_nonclassical_uncertainty(traj, basis))
    return traj.hbar * theta(traj) / avg


def exact_time_ddim(traj: Trajectory, basis: OrthonormalBasis | None = None) -> float:
    basis = _basis_for(traj, basis)
    avg = _nonzero_average(avg_nonclassical_uncertainty(traj, basis))
    return traj.hbar * real_path_length(traj, basis) / avg


def improved_mt_bound(traj: Trajectory, basis: OrthonormalBasis | None = None) -> tuple[float, float]:
    """(T_IMT, T_MT) for the trajectory's angle."""
    basis = _basis_for(traj, basis)
    _require_initial_in_basis(traj, basis)
    avg, _, avg_nc = _averages(traj, basis)
    avg_nc = _nonzero_average(avg_nc)
    th = theta(traj)
    return traj.hbar * th / avg_nc, traj.hbar * th / avg


def ml_bound(traj: Trajectory) -> float | None:
    """hbar * Theta / <H - E_min>; ``None`` when the shifted mean energy vanishes."""
    if not traj.schedule.is_constant:
        raise TimeDependentError("the mean-energy bound is stated for time-independent Hamiltonians")
    H = traj.schedule.evaluate(0.0)
    e_min = float(traj.schedule.spectrum[0][0])
    mean = expectation(H, traj.initial) - e_min
    if mean < DEGENERATE_EPS:
        return None
    return traj.hbar * theta(traj) / mean


# --- self-inverse generators -----------------------------------------------


def is_self_inverse(H, tol: float = SELF_INVERSE_TOL) -> bool:
    H = np.asarray(H, dtype=np.complex128)
    return float(np.max(np.abs(H @ H - np.eye(len(H))))) < tol


def _require_self_inverse(H) -> np.ndarray:
    H = as_hermitian(H)
    if not is_self_inverse(H):
        raise NotSelfInverseError("H @ H differs from the identity")
    return H


def self_inverse_closed_form(H, psi0, t: float) -> float:
    """Closed-form dH_nc(t) for H^2 = I (hbar = 1), valid on 0 <= t <= pi/2."""
    H = _require_self_inverse(H)
    h = expectation(H, as_state(psi0))
    s = max(1.0 - h * h, 0.0)
    return math.sqrt(s) * math.cos(t) / math.sqrt(1.0 - s * math.sin(t) ** 2)


def self_inverse_average(H, psi0, T: float) -> float:
    """Closed-form time average of dH_nc over [0, T] for H^2 = I."""
    H = _require_self_inverse(H)
    h = expectation(H, as_state(psi0))
    s = max(1.0 - h * h, 0.0)
    return math.asin(min(math.sqrt(s) * math.sin(T), 1.0)) / T


@dataclass(frozen=True)
class Saturation:
    saturated: bool
    gap: float
    T_IMT: float
    analytic_avg: float
    numeric_avg: float


def saturation_check(H, psi0, T: float, steps: int | None = None, rtol: float = 1e-6) -> Saturation:
    """Check that a self-inverse generator saturates the improved Mandelstam-Tamm bound."""
    H = _require_self_inverse(H)
    psi0 = as_state(psi0)
    schedule = HamiltonianSchedule.constant(H)
    basis = complete_basis_from(psi0)

    def t_imt(traj):
        return improved_mt_bound(traj, basis)[0]

    value, traj = refine(t_imt, schedule, psi0, T, steps=steps)
    gap = abs(value - T) / T
    return Saturation(
        saturated=gap < rtol,
        gap=gap,
        T_IMT=value,
        analytic_avg=self_inverse_average(H, psi0, T),
        numeric_avg=avg_nonclassical_uncertainty(traj, basis),
    )


# --- parameter estimation and circuit complexity ---------------------------


def _encode(H, psi0, theta_: float, hbar: float, steps: int | None):
    schedule = HamiltonianSchedule.constant(H)
    basis = complete_basis_from(psi0)
    value, traj = refine(lambda tr: avg_nonclassical_uncertainty(tr, basis), schedule, psi0, theta_,
                         steps=steps, hbar=hbar)
    return value, traj


def parameter_lower_bound(H, psi0, theta_: float, hbar: float = HBAR,
                          steps: int | None = None) -> tuple[float, float]:
    """Lower bounds on an encoded parameter: (hbar Theta / <<dH_nc>>, hbar Theta / dH)."""
    H = as_hermitian(H)
    psi0 = as_state(psi0)
    if not theta_ > 0:
        raise ValueError("theta must be positive")
    dH = math.sqrt(variance(H, psi0))
    if dH < DEGENERATE_EPS:
        raise DegenerateError("initial state is stationary under H")
    avg_nc, traj = _encode(H, psi0, theta_, hbar, steps)
    th = theta(traj)
    return hbar * th / _nonzero_average(avg_nc), hbar * th / dH


def complexity_bound(H, psi, theta_: float, hbar: float = HBAR,
                     steps: int | None = None) -> tuple[float, float, float]:
    """(C, theta <<dH_nc>> / hbar, theta dH / hbar) with C the angle reached after U_theta."""
    H = as_hermitian(H)
    psi = as_state(psi)
    if theta_ < 0:
        raise ValueError("theta must be non-negative")
    if theta_ == 0:
        return 0.0, 0.0, 0.0
    dH = math.sqrt(variance(H, psi))
    avg_nc, traj = _encode(H, psi, theta_, hbar, steps)
    return theta(traj), theta_ * avg_nc / hbar, theta_ * dH / hbar


# --- local speeds -----------------------------------------------------------


def _states_around(schedule, psi0, t, delta, hbar, psi_t):
    if schedule.is_constant:
        return state_at(schedule, psi0, t - delta, hbar), state_at(schedule, psi0, t + delta, hbar)
    before = state_at(schedule, psi0, t - delta, hbar, psi_t, t)
    after = state_at(schedule, psi0, t + delta, hbar, psi_t, t)
    return before, after


def _richardson(rate: Callable[[float], float], delta: float) -> float:
    return (4.0 * rate(delta / 2.0) - rate(delta)) / 3.0


def statistical_speed(schedule: HamiltonianSchedule, psi0, psi_t, t: float, basis: OrthonormalBasis,
                      delta: float = 1e-3, hbar: float = HBAR) -> float:
    """Rate of the angle between the phase-stripped vectors (|c_i|) at t -/+ delta."""

    def rate(h):
        before, after = _states_around(schedule, psi0, t, h, hbar, psi_t)
        a = np.abs(basis.coefficients(before))
        b = np.abs(basis.coefficients(after))
        return hilbert_angle(a, b) / (2.0 * h)

    return _richardson(rate, delta)


def fubini_study_speed(schedule: HamiltonianSchedule, psi0, psi_t, t: float,
                       delta: float = 1e-3, hbar: float = HBAR) -> float:
    """Rate of the Hilbert-space angle between the full states at t -/+ delta."""

    def rate(h):
        before, after = _states_around(schedule, psi0, t, h, hbar, psi_t)
        return hilbert_angle(before, after) / (2.0 * h)

    return _richardson(rate, delta)


# --- refinement and reports -------------------------------------------------


def refine(fn: Callable[[Trajectory], float], schedule: HamiltonianSchedule, psi0, T: float,
           steps: int | None = None, rtol: float = 1e-7, hbar: float = HBAR,
           max_steps: int = MAX_STEPS) -> tuple[float, Trajectory]:
    """Evaluate ``fn`` on successively doubled grids until the relative change is below ``rtol``."""
    steps = steps or default_steps(schedule, T)
    steps += steps % 2
    traj = evolve(schedule, psi0, T, steps, hbar)
    value = fn(traj)
    while steps < max_steps:
        steps *= 2
        finer = evolve(schedule, psi0, T, steps, hbar)
        new = fn(finer)
        scale = max(abs(new), 1e-300)
        settled = abs(new - value) <= rtol * scale
        value, traj = new, finer
        if settled:
            break
    return value, traj


@dataclass
class BoundReport:
    T_actual: float
    T_exact_2d: float | None
    T_exact_ddim: float | None
    T_IMT: float | None
    T_MT: float | None
    T_ML: float | None
    theta: float
    wootters_length: float
    avg_dHnc: float
    avg_dH: float
    avg_dHcl: float
    saturation_flags: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def chain_holds(self, rtol: float = 1e-6) -> bool:
        if self.T_IMT is None or self.T_MT is None:
            return True
        tol = rtol * self.T_actual
        return self.T_actual >= self.T_IMT - tol and self.T_IMT >= self.T_MT - tol


def bound_report(traj: Trajectory, basis: OrthonormalBasis | None = None,
                 saturation_rtol: float = 1e-6) -> BoundReport:
    """Every bound for one trajectory.  Inapplicable bounds are ``None`` with a note explaining why."""
    basis = _basis_for(traj, basis)
    _require_initial_in_basis(traj, basis)
    T = traj.T
    avg, avg_cl, avg_nc = _averages(traj, basis)
    th = theta(traj)
    length = real_path_length(traj, basis)
    notes: dict[str, str] = {}

    t_ddim = t_imt = t_mt = None
    if avg_nc < DEGENERATE_EPS:
        notes["T_exact_ddim"] = notes["T_IMT"] = "DEGENERATE"
    else:
        t_ddim = traj.hbar * length / avg_nc
        t_imt = traj.hbar * th / avg_nc
    if avg < DEGENERATE_EPS:
        notes["T_MT"] = "DEGENERATE"
    else:
        t_mt = traj.hbar * th / avg

    t_2d = None
    try:
        t_2d = exact_time_2d(traj)
    except NonMonotonicError:
        notes["T_exact_2d"] = "NON_MONOTONIC_P"
    except NotEffectively2DError:
        notes["T_exact_2d"] = "NOT_EFFECTIVELY_2D"
    except DegenerateError:
        notes["T_exact_2d"] = "DEGENERATE"

    t_ml = None
    if traj.schedule.is_constant:
        t_ml = ml_bound(traj)
        if t_ml is None:
            notes["T_ML"] = "UNDEFINED"
    else:
        notes["T_ML"] = "TIME_DEPENDENT"

    flags = {}
    for name, val in (("T_exact_2d", t_2d), ("T_exact_ddim", t_ddim), ("T_IMT", t_imt),
                      ("T_MT", t_mt), ("T_ML", t_ml)):
        flags[name] = val is not None and abs(val - T) <= saturation_rtol * T
    return BoundReport(
        T_actual=T,
        T_exact_2d=t_2d,
        T_exact_ddim=t_ddim,
        T_IMT=t_imt,
        T_MT=t_mt,
        T_ML=t_ml,
        theta=th,
        wootters_length=length,
        avg_dHnc=avg_nc,
        avg_dH=avg,
        avg_dHcl=avg_cl,
        saturation_flags=flags,
        notes=notes,
    )
