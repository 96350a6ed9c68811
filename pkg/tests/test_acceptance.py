"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from exactqsl.bounds import (
    avg_nonclassical_uncertainty,
    bound_report,
    complexity_bound,
    exact_time_2d,
    exact_time_ddim,
    improved_mt_bound,
    nonclassical_series,
    real_path_length,
    refine,
    saturation_check,
    self_inverse_closed_form,
    statistical_speed,
    theta,
)
from exactqsl.core import (
    I2,
    SX,
    SY,
    SZ,
    complete_basis_from,
    ket,
    kron,
    random_hermitian,
    random_self_inverse,
    random_state,
)
from exactqsl.decomposition import exact_ur_residual, nonclassical_variance
from exactqsl.evolution import HamiltonianSchedule, evolve, state_at
from exactqsl.optimizer import OptimizerConfig, minimize_evolution_time, optimal_hamiltonian

DIMS = (2, 3, 4, 8)
HALF_PI = math.pi / 2
RESULTS: list[str] = []


def const(H) -> HamiltonianSchedule:
    return HamiltonianSchedule.constant(H)


def axis_h(n) -> np.ndarray:
    return n[0] * SX + n[1] * SY + n[2] * SZ


def rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def exact_ur():
    start = time.perf_counter()
    worst = 0.0
    for d in DIMS:
        for i in range(1000):
            B = random_hermitian(d, 10_000 * d + i)
            psi = random_state(d, 20_000 * d + i)
            basis = complete_basis_from(random_state(d, 30_000 * d + i))
            worst = max(worst, exact_ur_residual(basis, B, psi))
    elapsed = time.perf_counter() - start
    return worst < 1e-9 and elapsed < 30, f"max residual {worst:.2e} (< 1e-9), {elapsed:.1f} s (< 30 s)"


def example1():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    axes = [np.array([1, 1, 1]) / math.sqrt(3)]
    for _ in range(4):
        v = rng.normal(size=3)
        axes.append(v / np.linalg.norm(v))
    worst = 0.0
    for n in axes:
        traj = evolve(const(axis_h(n)), [1, 0], HALF_PI, 1024)
        worst = max(worst, rel(improved_mt_bound(traj)[0], HALF_PI), rel(exact_time_2d(traj), HALF_PI))
    elapsed = time.perf_counter() - start
    return worst < 1e-6 and elapsed < 1, f"max rel. error {worst:.2e} (< 1e-6), {elapsed:.2f} s (< 1 s)"


def example2():
    start = time.perf_counter()
    H = kron(SX, I2) + kron(I2, SX)
    traj = evolve(const(H), ket("00"), HALF_PI, 1024)
    e_len = abs(real_path_length(traj) - math.pi / math.sqrt(2))
    e_avg = abs(avg_nonclassical_uncertainty(traj) - math.sqrt(2))
    e_time = abs(exact_time_ddim(traj) - HALF_PI)
    elapsed = time.perf_counter() - start
    ok = e_len < 1e-6 and e_avg < 1e-8 and e_time < 1e-6 and elapsed < 1
    return ok, (f"length err {e_len:.1e} (< 1e-6), average err {e_avg:.1e} (< 1e-8), "
                f"time err {e_time:.1e} (< 1e-6), {elapsed:.2f} s (< 1 s)")


def exact_ddim():
    start = time.perf_counter()
    worst = 0.0
    for d in DIMS:
        for i in range(200):
            traj = evolve(const(random_hermitian(d, 40_000 * d + i)), random_state(d, 50_000 * d + i), 1.0, 1024)
            worst = max(worst, abs(exact_time_ddim(traj) - 1.0))
    elapsed = time.perf_counter() - start
    return worst < 1e-5 and elapsed < 120, f"max rel. error {worst:.2e} (< 1e-5), {elapsed:.1f} s (< 120 s)"


def self_inverse():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    gap = dev = 0.0
    for d in DIMS:
        for i in range(500):
            H = random_self_inverse(d, 60_000 * d + i)
            psi0 = random_state(d, 70_000 * d + i)
            T = float(rng.uniform(0.3, 1.5))
            sat = saturation_check(H, psi0, T)
            gap = max(gap, sat.gap)
            traj = evolve(const(H), psi0, T, 64)
            numeric = nonclassical_series(traj)
            closed = np.array([self_inverse_closed_form(H, psi0, t) for t in traj.times])
            dev = max(dev, float(np.max(np.abs(numeric - closed))))
    elapsed = time.perf_counter() - start
    ok = gap < 1e-6 and dev < 1e-8 and elapsed < 120
    return ok, f"max saturation gap {gap:.2e} (< 1e-6), closed-form deviation {dev:.2e} (< 1e-8), {elapsed:.1f} s"


def chain():
    rng = np.random.default_rng(6)
    violations = strict_fail = strict_cases = 0
    worst = 0.0
    for d in DIMS:
        for i in range(1000):
            T = float(rng.uniform(0.2, 3.0))
            traj = evolve(const(random_hermitian(d, 80_000 * d + i)), random_state(d, 90_000 * d + i), T, 1024)
            rep = bound_report(traj)
            worst = max(worst, (rep.T_IMT - rep.T_actual) / T, (rep.T_MT - rep.T_IMT) / T)
            if not rep.chain_holds(1e-6):
                violations += 1
            if rep.avg_dHcl > 1e-6:
                strict_cases += 1
                strict_fail += not rep.T_IMT > rep.T_MT
    ok = violations == 0 and strict_fail == 0
    return ok, (f"{violations} ordering violations, largest rel. excess {worst:.1e} (<= 1e-6); "
                f"strict T_IMT > T_MT failed in {strict_fail} of {strict_cases} cases")


def two_level_reduction():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(200):
        H = random_hermitian(2, 100_000 + i)
        psi0 = random_state(2, 110_000 + i)
        gap = float(np.ptp(np.linalg.eigvalsh(H)))
        # survival decreases monotonically for half a precession period, pi / gap
        T = float(rng.uniform(0.05, 0.98)) * math.pi / gap
        length, traj = refine(real_path_length, const(H), psi0, T, steps=256, rtol=1e-10)
        worst = max(worst, abs(length - theta(traj)))
    return worst < 1e-7, f"max |length - Theta| {worst:.2e} (< 1e-7) over 200 monotone evolutions"


def speed_identity():
    worst = 0.0
    for s in range(20):
        d = (2, 3, 4)[s % 3]
        H0 = random_hermitian(d, 120_000 + s)
        if s % 2:
            H1 = random_hermitian(d, 130_000 + s)
            sched = HamiltonianSchedule.from_function(lambda t, H0=H0, H1=H1: H0 + math.cos(1.3 * t) * H1, d)
        else:
            sched = const(H0)
        psi0 = random_state(d, 140_000 + s)
        basis = complete_basis_from(psi0)
        T = 1.5
        for t in np.linspace(0.1 * T, 0.9 * T, 50):
            psi_t = state_at(sched, psi0, t)
            want = math.sqrt(nonclassical_variance(sched.evaluate(t), psi_t, basis))
            worst = max(worst, abs(statistical_speed(sched, psi0, psi_t, t, basis) - want))
    return worst < 1e-6, f"max |rate - dH_nc/hbar| {worst:.2e} (< 1e-6) at 1000 interior points"


def optimizer():
    start = time.perf_counter()
    worst_rel = worst_norm = 0.0
    undershoot = 0.0
    for seed in range(5):
        res = minimize_evolution_time([1, 0], [0, 1], 1.0, OptimizerConfig(seed=seed))
        worst_rel = max(worst_rel, rel(res.T_opt, HALF_PI))
        worst_norm = max(worst_norm, res.diagnostics.classical_norm)
        times = [res.T_opt, *res.candidate_times]
        undershoot = max(undershoot, res.mt_floor - min(times))
    elapsed = time.perf_counter() - start
    ok = worst_rel < 0.02 and worst_norm < 1e-3 and undershoot <= 1e-6 and elapsed < 60
    return ok, (f"max rel. error {worst_rel:.1e} (< 2%), classical_norm {worst_norm:.1e} (< 1e-3), "
                f"floor undershoot {undershoot:.1e} (<= 1e-6), {elapsed:.1f} s (< 60 s)")


def complexity():
    worst = 0.0
    for d, seed in ((2, 0), (3, 1)):
        psi = random_state(d, 150_000 + seed)
        perp = complete_basis_from(psi).vectors[1]
        for omega in (0.5, 1.0, 2.0):
            H = optimal_hamiltonian(psi, perp, omega)
            for th in (0.2, 0.4):
                C, ub_nc, ub_var = complexity_bound(H, psi, th)
                worst = max(worst, abs(C - omega * th), abs(ub_nc - C), abs(ub_var - C))
    return worst < 1e-9, f"max |C - omega theta| and bound gaps {worst:.2e} (< 1e-9)"


CRITERIA = [
    ("exact-ur", "exact uncertainty relation, 1000 pairs per d", exact_ur),
    ("example-1", "two-level example, T_IMT = exact 2D time = pi/2", example1),
    ("example-2", "two-qubit example, length, average and d-dim time", example2),
    ("exact-ddim", "d-dim exact time, 200 Hamiltonians per d", exact_ddim),
    ("self-inverse", "self-inverse saturation and closed form, 500 per d", self_inverse),
    ("chain", "T_actual >= T_IMT >= T_MT, 1000 per d", chain),
    ("d2-reduction", "two-level path length equals Theta", two_level_reduction),
    ("speed-identity", "local angle rate equals dH_nc / hbar", speed_identity),
    ("optimizer", "qubit optimum over 5 seeds", optimizer),
    ("complexity", "C = omega theta with saturated bounds", complexity),
]


def run_criterion(key: str, title: str, fn) -> bool:
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, reported like any other
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    line = f"{'PASS' if ok else 'FAIL'} [{key}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@pytest.mark.acceptance
@pytest.mark.parametrize("key, title, fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(key, title, fn):
    assert run_criterion(key, title, fn)


if __name__ == "__main__":
    import sys

    results = [run_criterion(*c) for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
