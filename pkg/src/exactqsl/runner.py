"""Run scenarios and turn the results into flat report rows (CSV or JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np

from .bounds import bound_report
from .decomposition import exact_ur_residual
from .errors import NoImprovementError, NotReachedError, NumericalError, QSLError, StationaryError
from .evolution import Trajectory, default_steps, evolve, first_passage_time, monotonicity
from .optimizer import OptimizerConfig, minimize_evolution_time
from .scenario import Scenario, parse_scenario, require_target, set_path

PROFILES = {
    "default": {"refine_rtol": 1e-7, "saturation_rtol": 1e-6, "angle_tol": 1e-8,
                "max_steps": 2**16, "ur_samples": 201},
    "strict": {"refine_rtol": 1e-9, "saturation_rtol": 1e-8, "angle_tol": 1e-10,
               "max_steps": 2**18, "ur_samples": 1001},
}

STATE_TOL = 1e-9  # final-state change that ends step doubling

BOUND_NAMES = ("T_exact_2d", "T_exact_ddim", "T_IMT", "T_MT", "T_ML")


class ConvergenceError(NumericalError):
    """Grid refinement did not settle within the step budget."""


@dataclass
class ReportRow:
    """One flat result record.

    A numeric field holds a float, a marker string such as ``DEGENERATE`` or
    ``UNDEFINED`` when the quantity exists but has no value, or ``None`` when
    the command does not compute it.
    """

    scenario: str
    command: str
    dimension: int | None = None
    seed: int | None = None
    steps: int | None = None
    T_actual: float | str | None = None
    T_exact_2d: float | str | None = None
    T_exact_ddim: float | str | None = None
    T_IMT: float | str | None = None
    T_MT: float | str | None = None
    T_ML: float | str | None = None
    theta: float | str | None = None
    wootters_length: float | str | None = None
    avg_dHnc: float | str | None = None
    avg_dH: float | str | None = None
    avg_dHcl: float | str | None = None
    chain_holds: bool | None = None
    ur_residual_max: float | str | None = None
    ur_points: int | None = None
    ur_stationary_points: int | None = None
    monotonicity: str | None = None
    passage_time: float | str | None = None
    sat_T_exact_2d: bool | None = None
    sat_T_exact_ddim: bool | None = None
    sat_T_IMT: bool | None = None
    sat_T_MT: bool | None = None
    sat_T_ML: bool | None = None
    T_opt: float | str | None = None
    mt_floor: float | str | None = None
    classical_norm: float | str | None = None
    mt_gap: float | str | None = None
    form_match: bool | None = None
    iterations: int | None = None
    runtime_ms: float | str | None = None
    error: str | None = None


COLUMNS = [f.name for f in fields(ReportRow)]
_KIND = {f.name: f.type.split(" ")[0] for f in fields(ReportRow)}


def _num(x) -> float:
    return float(x)


# --- serialization ----------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _uncell(name: str, text: str):
    if text == "":
        return None
    kind = _KIND[name]
    if kind == "bool":
        return text == "true"
    if kind == "int":
        return int(text)
    if kind == "float":
        try:
            return float(text)
        except ValueError:
            return text  # marker string
    return text


def rows_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ReportRow]:
    reader = csv.DictReader(io.StringIO(text, newline=""))
    return [ReportRow(**{k: _uncell(k, v) for k, v in rec.items()}) for rec in reader]


def row_to_dict(row: ReportRow) -> dict:
    return asdict(row)


def row_from_dict(data: dict) -> ReportRow:
    return ReportRow(**{k: data[k] for k in COLUMNS if k in data})


def dumps_json(obj) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def complex_matrix(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in r] for r in np.asarray(m)]


# --- trajectory with the step policy ------------------------------------------


def aligned_steps(breakpoints, T: float, base: int) -> int:
    """Smallest step count >= ``base`` that puts every breakpoint on a grid node.

    Only breakpoints at simple fractions of T (denominator <= 1000) can be aligned;
    the others are ignored.
    """
    denom = 1
    for b in breakpoints:
        frac = Fraction(b / T).limit_denominator(1000)
        if abs(float(frac) - b / T) < 1e-13:
            denom = math.lcm(denom, frac.denominator)
    return denom * math.ceil(base / denom)


def _summary(traj: Trajectory, sc: Scenario, prof: dict):
    rep = bound_report(traj, sc.basis, saturation_rtol=prof["saturation_rtol"])
    return rep, np.array([rep.avg_dHnc, rep.avg_dH, rep.avg_dHcl, rep.wootters_length])


def trajectory_and_report(sc: Scenario, prof: dict):
    """Evolve and report.

    With ``steps == "auto"`` the grid doubles until the final state and the
    time averages both stop changing.
    """
    if sc.steps != "auto":
        traj = evolve(sc.schedule, sc.initial_state, sc.horizon_T, sc.steps, sc.hbar)
        return traj, _summary(traj, sc, prof)[0]
    steps = aligned_steps(sc.schedule.breakpoints, sc.horizon_T, default_steps(sc.schedule, sc.horizon_T))
    traj = evolve(sc.schedule, sc.initial_state, sc.horizon_T, steps, sc.hbar)
    rep, vec = _summary(traj, sc, prof)
    while steps < prof["max_steps"]:
        steps *= 2
        final = traj.final
        traj = evolve(sc.schedule, sc.initial_state, sc.horizon_T, steps, sc.hbar)
        rep, new = _summary(traj, sc, prof)
        # components that vanish (e.g. a zero classical part) only need to settle
        # relative to the largest one, otherwise rounding noise never converges
        scale = max(float(np.max(np.abs(new))), 1e-12)
        settled = (np.all(np.abs(new - vec) <= prof["refine_rtol"] * scale)
                   and np.linalg.norm(traj.final - final) < STATE_TOL)
        vec = new
        if settled:
            return traj, rep
    hint = ""
    if sc.schedule.breakpoints:
        hint = (" (the Hamiltonian jumps between grid nodes, so time averages converge only at"
                " first order; choose breakpoints at simple fractions of horizon_T)")
    raise ConvergenceError(f"averages did not settle within {prof['max_steps']} steps{hint}")


def _fill_bounds(row: ReportRow, rep) -> None:
    for name in BOUND_NAMES:
        val = getattr(rep, name)
        setattr(row, name, _num(val) if val is not None else rep.notes.get(name, "UNDEFINED"))
        setattr(row, f"sat_{name}", bool(rep.saturation_flags.get(name, False)))
    row.T_actual = _num(rep.T_actual)
    row.theta = _num(rep.theta)
    row.wootters_length = _num(rep.wootters_length)
    row.avg_dHnc = _num(rep.avg_dHnc)
    row.avg_dH = _num(rep.avg_dH)
    row.avg_dHcl = _num(rep.avg_dHcl)
    row.chain_holds = bool(rep.chain_holds())


def _passage(sc: Scenario, prof: dict):
    if sc.target_state is None:
        return None
    try:
        return _num(first_passage_time(sc.schedule, sc.initial_state, sc.target_state,
                                       prof["angle_tol"], sc.horizon_T, hbar=sc.hbar))
    except NotReachedError:
        return "NOT_REACHED"


def _ur_scan(traj: Trajectory, sc: Scenario, samples: int):
    idx = np.unique(np.linspace(0, traj.step_count, min(samples, traj.step_count + 1)).round().astype(int))
    Hs = traj.hamiltonians()
    worst, stationary = 0.0, 0
    for i in idx:
        H = Hs if Hs.ndim == 2 else Hs[i]
        try:
            worst = max(worst, exact_ur_residual(sc.basis, H, traj.states[i], sc.hbar))
        except StationaryError:
            stationary += 1
    value = "STATIONARY" if stationary == len(idx) else _num(worst)
    return value, len(idx), stationary


# --- commands -----------------------------------------------------------------


def _base(sc: Scenario, command: str) -> ReportRow:
    return ReportRow(scenario=sc.name, command=command, dimension=sc.dimension, seed=sc.seed)


def run_verify_ur(sc: Scenario, profile: str = "default") -> ReportRow:
    prof = PROFILES[profile]
    row = _base(sc, "verify-ur")
    steps = sc.steps if sc.steps != "auto" else default_steps(sc.schedule, sc.horizon_T)
    traj = evolve(sc.schedule, sc.initial_state, sc.horizon_T, steps, sc.hbar)
    row.steps = traj.step_count
    row.T_actual = _num(traj.T)
    row.ur_residual_max, row.ur_points, row.ur_stationary_points = _ur_scan(traj, sc, prof["ur_samples"])
    row.monotonicity = monotonicity(traj.survival).value
    return row


def run_bounds(sc: Scenario, profile: str = "default") -> ReportRow:
    prof = PROFILES[profile]
    row = _base(sc, "bounds")
    traj, rep = trajectory_and_report(sc, prof)
    row.steps = traj.step_count
    _fill_bounds(row, rep)
    row.monotonicity = monotonicity(traj.survival).value
    row.passage_time = _passage(sc, prof)
    return row


def run_optimize(sc: Scenario, profile: str = "default"):
    """Returns the row and the optimization result (``None`` when no restart reached the target)."""
    prof = PROFILES[profile]
    target = require_target(sc)
    row = _base(sc, "optimize")
    cfg = OptimizerConfig(restarts=sc.restarts, seed=sc.seed, angle_tol=prof["angle_tol"], hbar=sc.hbar)
    try:
        res = minimize_evolution_time(sc.initial_state, target, sc.variance_cap, cfg)
    except NoImprovementError:
        row.T_opt = "NO_IMPROVEMENT"
        return row, None
    d = res.diagnostics
    row.T_opt = _num(res.T_opt)
    row.mt_floor = _num(res.mt_floor)
    row.classical_norm = _num(d.classical_norm)
    row.mt_gap = _num(d.mt_gap) if d.mt_gap is not None else "UNDEFINED"
    row.form_match = bool(d.form_match)
    row.iterations = int(res.iterations)
    return row, res


def optimization_payload(res) -> dict:
    return {
        "H_opt": complex_matrix(res.H_opt),
        "T_opt": float(res.T_opt),
        "mt_floor": float(res.mt_floor),
        "iterations": int(res.iterations),
        # an infinite form residual (no fit possible) is dropped: JSON has no infinity
        "diagnostics": {k: v for k, v in asdict(res.diagnostics).items()
                        if not (isinstance(v, float) and not math.isfinite(v))},
    }


COMMANDS = {"verify-ur": run_verify_ur, "bounds": run_bounds}


def run_command(command: str, sc: Scenario, profile: str = "default", timing: bool = False):
    """Dispatch one command; returns ``(row, extra)`` where extra is command-specific payload."""
    start = time.perf_counter()
    if command == "optimize":
        row, extra = run_optimize(sc, profile)
    else:
        row, extra = COMMANDS[command](sc, profile), None
    if timing:
        row.runtime_ms = (time.perf_counter() - start) * 1e3
    return row, extra


def check_expectations(row: ReportRow, expect: dict | None) -> list[str]:
    """Compare row fields with ``{field: [value, abs_tol]}`` or ``{field: marker}``."""
    problems = []
    for name, spec in (expect or {}).items():
        if name not in COLUMNS:
            problems.append(f"{name}: not a report field")
            continue
        got = getattr(row, name)
        if got is None:
            continue  # not produced by this command
        if isinstance(spec, list):
            want, tol = spec
            if isinstance(got, str) or not abs(got - want) <= tol:
                problems.append(f"{name}: got {got!r}, expected {want!r} within {tol!r}")
        elif got != spec:
            problems.append(f"{name}: got {got!r}, expected {spec!r}")
    return problems


# --- sweeps -----------------------------------------------------------------


def _sweep_row(task) -> ReportRow:
    data, label, command, profile, timing = task
    try:
        sc = parse_scenario(data)
        sc.name = label
        row, _ = run_command(command, sc, profile, timing)
        return row
    except (QSLError, ValueError, np.linalg.LinAlgError) as exc:
        return ReportRow(scenario=label, command=command, error=f"{type(exc).__name__}: {exc}")


def run_sweep(template: dict, axis: str, values: list[Any], command: str = "bounds",
              profile: str = "default", jobs: int = 1, timing: bool = False) -> list[ReportRow]:
    """One row per value of the dotted field ``axis``; rows come back in input order."""
    base = template.get("name", "unnamed")
    tasks = [(set_path(template, axis, v), f"{base}[{axis}={v}]", command, profile, timing) for v in values]
    if jobs <= 1 or len(tasks) <= 1:
        return [_sweep_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_row, tasks))
