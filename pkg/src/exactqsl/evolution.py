"""Pure-state time evolution, survival probability and the first-passage oracle."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .core import HBAR, as_hermitian, as_state, eigh, hilbert_angle, hilbert_angles, spectral_exponential
from .errors import DimensionMismatchError, NotReachedError, StepResolutionError

log = logging.getLogger(__name__)

MIN_STEP_OVERLAP = 0.9
MAX_STEPS = 2**20


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Time-dependent Hamiltonian t -> H(t) of fixed dimension ``d``."""

    evaluate: Callable[[float], np.ndarray]
    is_constant: bool
    d: int
    _spectrum: tuple | None = field(default=None, repr=False)
    breakpoints: tuple = ()  # known jump times; steps are split there

    @classmethod
    def constant(cls, H) -> HamiltonianSchedule:
        H = as_hermitian(H).copy()
        H.setflags(write=False)
        return cls(lambda t: H, True, H.shape[0], eigh(H))

    @classmethod
    def piecewise(cls, breakpoints: Sequence[float], hamiltonians: Sequence) -> HamiltonianSchedule:
        """H(t) = hamiltonians[i] for breakpoints[i-1] <= t < breakpoints[i]."""
        ops = [as_hermitian(h).copy() for h in hamiltonians]
        breaks = list(breakpoints)
        if len(ops) != len(breaks) + 1:
            raise ValueError("need exactly one more Hamiltonian than breakpoints")
        if sorted(breaks) != breaks:
            raise ValueError("breakpoints must be increasing")
        dims = {h.shape[0] for h in ops}
        if len(dims) != 1:
            raise DimensionMismatchError(f"piecewise Hamiltonians have mixed dimensions {sorted(dims)}")

        def evaluate(t):
            return ops[int(np.searchsorted(breaks, t, side="right"))]

        return cls(evaluate, False, dims.pop(), breakpoints=tuple(float(b) for b in breaks))

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], d: int) -> HamiltonianSchedule:
        return cls(lambda t: np.asarray(fn(t), dtype=np.complex128), False, d)

    @property
    def spectrum(self):
        """(evals, evecs) of a constant schedule."""
        if not self.is_constant:
            raise ValueError("spectrum is only defined for constant schedules")
        return self._spectrum

    def time_reversed(self, T: float) -> HamiltonianSchedule:
        """Schedule t -> -H(T - t), which undoes an evolution over [0, T]."""
        if self.is_constant:
            return HamiltonianSchedule.constant(-self.evaluate(0.0))
        ev = self.evaluate
        # H(t) holds on [b_i, b_{i+1}); the reversal holds on (T - b_{i+1}, T - b_i],
        # which only differs at the jump instants themselves
        return HamiltonianSchedule(lambda t: -ev(T - t), False, self.d,
                                   breakpoints=tuple(sorted(T - b for b in self.breakpoints)))

    def spectral_spread(self, T: float, samples: int = 9) -> float:
        """Largest eigenvalue spread of H(t) over a few sample times in [0, T]."""
        times = [0.0] if self.is_constant else np.linspace(0.0, T, samples)
        spread = 0.0
        for t in times:
            evals = np.linalg.eigvalsh(self.evaluate(t))
            spread = max(spread, float(evals[-1] - evals[0]))
        return spread


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    schedule: HamiltonianSchedule
    hbar: float = HBAR

    @property
    def step_count(self) -> int:
        return len(self.times) - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @cached_property
    def survival(self) -> np.ndarray:
        return survival_probability(self)

    def hamiltonians(self) -> np.ndarray:
        """H at every grid time: one (d, d) matrix if constant, else (N+1, d, d)."""
        if self.schedule.is_constant:
            return self.schedule.evaluate(0.0)
        return np.array([self.schedule.evaluate(t) for t in self.times])


def default_steps(schedule: HamiltonianSchedule, T: float, max_angle: float = 0.05) -> int:
    """Even step count keeping the per-step rotation below ``max_angle`` radians."""
    spread = schedule.spectral_spread(T)
    n = max(64, math.ceil(spread * T / (2.0 * max_angle)))
    return n + (n % 2)


def _midpoint_propagators(schedule, t0, t1, hbar):
    dt = t1 - t0
    mids = 0.5 * (t0 + t1)
    Hs = np.array([schedule.evaluate(t) for t in mids])
    evals, evecs = np.linalg.eigh(Hs)
    phases = np.exp(-1j * evals * (dt[:, None] / hbar))
    props = np.einsum("nij,nj,nkj->nik", evecs, phases, evecs.conj())
    # a step straddling a jump is split there, so piecewise-constant schedules stay exact
    for b in schedule.breakpoints:
        k = int(np.searchsorted(t1, b, side="left"))
        if k < len(t0) and t0[k] < b < t1[k]:
            cuts = [t0[k], *[c for c in schedule.breakpoints if t0[k] < c < t1[k]], t1[k]]
            u = np.eye(schedule.d, dtype=np.complex128)
            for a, c in zip(cuts[:-1], cuts[1:]):
                u = spectral_exponential(schedule.evaluate(0.5 * (a + c)), c - a, hbar) @ u
            props[k] = u
    return props


def evolve(schedule: HamiltonianSchedule, psi0, T: float, steps: int, hbar: float = HBAR) -> Trajectory:
    """Evolve ``psi0`` over a uniform grid of ``steps`` intervals on [0, T].

    Constant schedules are propagated exactly from t = 0 at every grid point.
    Time-dependent schedules use the exponential midpoint rule step by step.
    """
    psi0 = as_state(psi0)
    if psi0.shape[0] != schedule.d:
        raise DimensionMismatchError(f"schedule has dimension {schedule.d}, state has {psi0.shape[0]}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    if steps < 1:
        raise ValueError("steps must be a positive integer")
    times = np.linspace(0.0, T, steps + 1)

    if schedule.is_constant:
        evals, evecs = schedule.spectrum
        amps = evecs.conj().T @ psi0
        phases = np.exp(-1j * np.outer(times, evals) / hbar)
        states = (phases * amps) @ evecs.T
    else:
        props = _midpoint_propagators(schedule, times[:-1], times[1:], hbar)
        states = np.empty((steps + 1, schedule.d), dtype=np.complex128)
        states[0] = psi0
        psi = psi0
        for k in range(steps):
            psi = props[k] @ psi
            states[k + 1] = psi

    norms = np.linalg.norm(states, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > 1e-12:
        log.debug("norm drift %.3e over %d steps (renormalised)", drift, steps)
    states = states / norms[:, None]
    states[0] = psi0

    overlaps = np.abs(np.einsum("ni,ni->n", states[:-1].conj(), states[1:]))
    worst = float(np.min(overlaps))
    if worst <= MIN_STEP_OVERLAP:
        raise StepResolutionError(
            f"consecutive-state overlap fell to {worst:.3f}; increase steps (currently {steps})"
        )
    return Trajectory(times, states, schedule, hbar)


def evolve_converged(
    schedule: HamiltonianSchedule,
    psi0,
    T: float,
    steps: int | None = None,
    tol: float = 1e-9,
    hbar: float = HBAR,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Double the step count until the final state moves by less than ``tol``."""
    steps = steps or default_steps(schedule, T)
    traj = evolve(schedule, psi0, T, steps, hbar)
    if schedule.is_constant:
        return traj
    while steps < max_steps:
        steps *= 2
        finer = evolve(schedule, psi0, T, steps, hbar)
        change = float(np.linalg.norm(finer.final - traj.final))
        traj = finer
        if change < tol:
            return traj
    log.warning("step refinement hit the cap of %d steps", max_steps)
    return traj


def state_at(schedule: HamiltonianSchedule, psi0, t: float, hbar: float = HBAR,
             from_state=None, from_time: float = 0.0) -> np.ndarray:
    """State at time ``t``.

    Constant schedules propagate ``psi0`` exactly.  Otherwise a single midpoint
    step is taken from ``(from_time, from_state)``, which should be a nearby grid point.
    """
    if schedule.is_constant:
        evals, evecs = schedule.spectrum
        return evecs @ (np.exp(-1j * evals * t / hbar) * (evecs.conj().T @ psi0))
    start = psi0 if from_state is None else from_state
    dt = t - from_time
    if dt == 0:
        return np.asarray(start, dtype=np.complex128)
    if dt > 0:
        prop = _midpoint_propagators(schedule, np.array([from_time]), np.array([t]), hbar)[0]
    else:  # the backward step inverts the forward step over the same interval
        prop = _midpoint_propagators(schedule, np.array([t]), np.array([from_time]), hbar)[0].conj().T
    psi = prop @ np.asarray(start, dtype=np.complex128)
    return psi / np.linalg.norm(psi)


def survival_probability(traj: Trajectory) -> np.ndarray:
    amps = traj.states @ traj.states[0].conj()
    return np.clip(np.abs(amps) ** 2, 0.0, 1.0)


class Monotonicity(enum.Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"
    NON_MONOTONIC = "non-monotonic"


def monotonicity(series, tol: float = 1e-10) -> Monotonicity:
    """Classify a series; a constant one reports DECREASING."""
    diffs = np.diff(np.asarray(series, dtype=float))
    if len(diffs) == 0:
        raise ValueError("series needs at least two points")
    if np.all(diffs <= tol):
        return Monotonicity.DECREASING
    if np.all(diffs >= -tol):
        return Monotonicity.INCREASING
    return Monotonicity.NON_MONOTONIC


def time_average(series, T: float) -> float:
    """(1/T) * integral of a series sampled on a uniform grid over [0, T].

    Composite Simpson for an odd number of samples, trapezoid otherwise.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError("series must be one-dimensional with at least two samples")
    dx = T / (len(y) - 1)
    if len(y) % 2 == 1 and len(y) >= 3:
        total = integrate.simpson(y, dx=dx)
    else:
        total = integrate.trapezoid(y, dx=dx)
    return float(total) / T


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section search; robust on the V-shaped dips of an angle at passage."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _bisect_first(pred, lo: float, hi: float, resolution: float) -> float:
    """Smallest time (to ``resolution``) in (lo, hi] where pred holds, given pred(hi)."""
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def first_passage_time(
    schedule: HamiltonianSchedule,
    psi0,
    target,
    angle_tol: float,
    T_max: float,
    steps: int | None = None,
    hbar: float = HBAR,
    resolution: float = 1e-10,
) -> float:
    """Earliest time at which the evolving state is within ``angle_tol`` of ``target``.

    The grid is scanned for samples below tolerance and for local minima of the
    angle (refined by bounded scalar minimisation, so narrow passages between
    grid points are not missed); the crossing is then bisected to ``resolution``.
    """
    psi0 = as_state(psi0)
    target = as_state(target)
    if psi0.shape != target.shape:
        raise DimensionMismatchError("initial and target states differ in dimension")
    if hilbert_angle(psi0, target) < angle_tol:
        return 0.0
    steps = steps or default_steps(schedule, T_max)
    traj = evolve(schedule, psi0, T_max, steps, hbar)
    times, states = traj.times, traj.states
    angles = hilbert_angles(target, states)

    def angle_from(k):
        def f(t):
            return hilbert_angle(target, state_at(schedule, psi0, t, hbar, states[k], times[k]))
        return f

    n = len(times)
    for k in range(1, n):
        f = angle_from(k - 1)
        if angles[k] < angle_tol:
            return _bisect_first(lambda t: f(t) < angle_tol, times[k - 1], times[k], resolution)
        left_ok = angles[k] <= angles[k - 1]
        right_ok = k == n - 1 or angles[k] <= angles[k + 1]
        if not (left_ok and right_ok):
            continue
        hi = times[min(k + 1, n - 1)]
        lo = times[k - 1]
        # the minimiser's local evolution starts at grid point k-1
        t_min, f_min = _golden_min(f, lo, hi, resolution * 1e-2)
        if f_min < angle_tol:
            return _bisect_first(lambda t: f(t) < angle_tol, lo, t_min, resolution)
    raise NotReachedError(
        f"target not reached within T_max={T_max!r} (closest angle {float(np.min(angles)):.3e})"
    )
