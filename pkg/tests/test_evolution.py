from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactqsl.core import I2, SX, SY, SZ, ket, kron, random_hermitian, random_state, spectral_exponential
from exactqsl.errors import DimensionMismatchError, NotReachedError, StepResolutionError
from exactqsl.evolution import (
    HamiltonianSchedule,
    Monotonicity,
    evolve,
    evolve_converged,
    first_passage_time,
    monotonicity,
    state_at,
    survival_probability,
    time_average,
)

X2 = kron(SX, I2) + kron(I2, SX)


def driven(d: int, seed: int) -> HamiltonianSchedule:
    """Smooth random drive H0 + cos(2t) H1."""
    H0 = random_hermitian(d, seed)
    H1 = random_hermitian(d, seed + 1)
    return HamiltonianSchedule.from_function(lambda t: H0 + math.cos(2.0 * t) * H1, d)


def test_sigma_x_quarter_period():
    traj = evolve(HamiltonianSchedule.constant(SX), [1, 0], math.pi / 2, 64)
    assert np.allclose(traj.final, [0, -1j], atol=1e-14)
    assert np.array_equal(traj.initial, [1, 0])


def test_two_qubit_reaches_11():
    traj = evolve(HamiltonianSchedule.constant(X2), ket("00"), math.pi / 2, 64)
    assert abs(abs(np.vdot(ket("11"), traj.final)) - 1) < 1e-9


def test_piecewise_matches_composed_propagators():
    sched = HamiltonianSchedule.piecewise([1.0], [SZ, SX])
    want = spectral_exponential(SX, 1.0) @ spectral_exponential(SZ, 1.0) @ np.array([1, 0])
    for steps in (64, 100, 257):
        traj = evolve(sched, [1, 0], 2.0, steps)
        assert np.max(np.abs(traj.final - want)) < 1e-8


def test_piecewise_off_grid_breakpoint():
    sched = HamiltonianSchedule.piecewise([0.37, 0.9], [SZ, SX, SY])
    psi0 = np.array([0.6, 0.8])
    want = (spectral_exponential(SY, 0.3) @ spectral_exponential(SX, 0.53)
            @ spectral_exponential(SZ, 0.37) @ psi0)
    assert np.max(np.abs(evolve(sched, psi0, 1.2, 64).final - want)) < 1e-12


def test_piecewise_validation():
    with pytest.raises(ValueError):
        HamiltonianSchedule.piecewise([1.0], [SZ])
    with pytest.raises(ValueError):
        HamiltonianSchedule.piecewise([2.0, 1.0], [SZ, SX, SY])
    with pytest.raises(DimensionMismatchError):
        HamiltonianSchedule.piecewise([1.0], [SZ, np.eye(3)])


def test_constant_schedule_is_bitwise_constant():
    sched = HamiltonianSchedule.constant(random_hermitian(3, 2))
    assert sched.evaluate(0.0) is sched.evaluate(12.5)
    assert np.array_equal(sched.evaluate(0.0), sched.evaluate(0.0).conj().T)


def test_evolve_rejects_bad_input():
    sched = HamiltonianSchedule.constant(SX)
    with pytest.raises(DimensionMismatchError):
        evolve(sched, [1, 0, 0], 1.0, 10)
    with pytest.raises(ValueError):
        evolve(sched, [1, 0], 0.0, 10)


def test_step_resolution_error():
    with pytest.raises(StepResolutionError):
        evolve(driven(2, 0), [1, 0], 20.0, 4)


def test_survival_examples():
    T = math.pi / 2
    traj = evolve(HamiltonianSchedule.constant(SX), [1, 0], T, 128)
    p = survival_probability(traj)
    assert p[0] == 1.0
    assert np.max(np.abs(p - np.cos(traj.times) ** 2)) < 1e-9
    assert np.all(evolve(HamiltonianSchedule.constant(SZ), [1, 0], T, 32).survival == 1.0)

    n = np.array([1, 1, 1]) / math.sqrt(3)
    H = n[0] * SX + n[1] * SY + n[2] * SZ
    traj = evolve(HamiltonianSchedule.constant(H), [1, 0], T, 128)
    t = traj.times
    assert np.max(np.abs(traj.survival - (np.cos(t) ** 2 + n[2] ** 2 * np.sin(t) ** 2))) < 1e-9


def test_monotonicity():
    t = np.linspace(0, math.pi / 2, 101)
    assert monotonicity(np.cos(t) ** 2) is Monotonicity.DECREASING
    assert monotonicity(np.cos(np.linspace(0, math.pi, 101)) ** 2) is Monotonicity.NON_MONOTONIC
    assert monotonicity(np.full(10, 0.3)) is Monotonicity.DECREASING
    assert monotonicity(np.sin(t)) is Monotonicity.INCREASING


def test_time_average():
    t = np.linspace(0, math.pi / 2, 1025)
    assert time_average(np.full(1025, 2.5), math.pi / 2) == pytest.approx(2.5)
    assert time_average(np.cos(t), math.pi / 2) == pytest.approx(2 / math.pi, abs=1e-8)
    # even number of points: trapezoid fallback, still close
    t = np.linspace(0, math.pi / 2, 1024)
    assert time_average(np.cos(t), math.pi / 2) == pytest.approx(2 / math.pi, abs=1e-6)


def test_first_passage_examples():
    t = first_passage_time(HamiltonianSchedule.constant(SX), [1, 0], [0, 1], 1e-8, 4.0)
    assert abs(t - math.pi / 2) < 1e-8
    t = first_passage_time(HamiltonianSchedule.constant(X2), ket("00"), ket("11"), 1e-8, 4.0)
    assert abs(t - math.pi / 2) < 1e-8
    with pytest.raises(NotReachedError):
        first_passage_time(HamiltonianSchedule.constant(SZ), [1, 0], [0, 1], 1e-8, 4.0)


def test_first_passage_takes_first_visit():
    # sigma_x returns |1> every pi; the first visit is at pi/2
    t = first_passage_time(HamiltonianSchedule.constant(SX), [1, 0], [0, 1], 1e-8, 10.0)
    assert abs(t - math.pi / 2) < 1e-8


def test_first_passage_time_dependent():
    sched = HamiltonianSchedule.piecewise([0.5], [SZ, SX])
    t = first_passage_time(sched, [1, 0], [0, 1], 1e-8, 4.0, steps=512)
    assert abs(t - (0.5 + math.pi / 2)) < 1e-7


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4]))
def test_norm_drift_constant(seed, d):
    traj = evolve(HamiltonianSchedule.constant(random_hermitian(d, seed)), random_state(d, seed), 3.0, 200)
    assert np.max(np.abs(np.linalg.norm(traj.states, axis=1) - 1)) < 1e-12


def test_constant_refinement_changes_nothing():
    sched = HamiltonianSchedule.constant(random_hermitian(4, 9))
    psi0 = random_state(4, 9)
    a = evolve(sched, psi0, 2.0, 100).final
    b = evolve(sched, psi0, 2.0, 200).final
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("d", [2, 4])
def test_midpoint_second_order(d):
    sched = driven(d, 21)
    psi0 = random_state(d, 22)
    ref = evolve(sched, psi0, 2.0, 2**14).final
    errs = [np.linalg.norm(evolve(sched, psi0, 2.0, n).final - ref) for n in (128, 256, 512)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.0 < coarse / fine < 5.0  # second order: ratio ~4


@pytest.mark.parametrize("d", [2, 3, 4])
def test_reversibility(d):
    sched = driven(d, 31)
    psi0 = random_state(d, 32)
    T = 1.7
    fwd = evolve(sched, psi0, T, 1024)
    back = evolve(sched.time_reversed(T), fwd.final, T, 1024)
    assert np.linalg.norm(back.final - psi0) < 1e-8


def test_reversibility_piecewise():
    sched = HamiltonianSchedule.piecewise([0.4, 1.1], [SZ, SX, SY])
    psi0 = random_state(2, 3)
    fwd = evolve(sched, psi0, 1.5, 64)
    back = evolve(sched.time_reversed(1.5), fwd.final, 1.5, 64)
    assert np.linalg.norm(back.final - psi0) < 1e-12


def test_evolve_converged():
    sched = driven(3, 41)
    psi0 = random_state(3, 42)
    traj = evolve_converged(sched, psi0, 1.0, tol=1e-9)
    ref = evolve(sched, psi0, 1.0, 2**15).final
    assert np.linalg.norm(traj.final - ref) < 1e-8


def test_state_at_matches_grid():
    sched = HamiltonianSchedule.constant(random_hermitian(3, 5))
    psi0 = random_state(3, 6)
    traj = evolve(sched, psi0, 2.0, 50)
    assert np.allclose(state_at(sched, psi0, traj.times[17]), traj.states[17], atol=1e-13)
