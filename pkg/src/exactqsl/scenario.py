"""Scenario descriptions: a JSON data model parsed into schedules and states.

Complex numbers are written as ``[re, im]`` pairs; plain numbers are real.
States may also be named computational kets such as ``"01"``, or ``"random"``
for a seeded random state.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .core import (
    HBAR,
    I2,
    SX,
    SY,
    SZ,
    OrthonormalBasis,
    complete_basis_from,
    hilbert_angle,
    ket,
    kron,
    random_hermitian,
    random_self_inverse,
    random_state,
)
from .errors import ScenarioError
from .evolution import HamiltonianSchedule
from .optimizer import geodesic_hamiltonian, optimal_hamiltonian

PAULI = {"i": I2, "x": SX, "y": SY, "z": SZ}
HAMILTONIAN_KINDS = (
    "pauli-axis",
    "matrix-literal",
    "tensor-sum",
    "self-inverse-random",
    "random-hermitian",
    "optimal-form",
    "piecewise",
)


@dataclass
class Scenario:
    name: str
    dimension: int
    schedule: HamiltonianSchedule
    initial_state: np.ndarray
    target_state: np.ndarray | None
    horizon_T: float
    steps: int | str
    basis: OrthonormalBasis
    seed: int
    hbar: float
    raw: dict
    variance_cap: float = 1.0
    restarts: int = 8
    expect: dict | None = None


def _complex(value, where: str) -> complex:
    if isinstance(value, bool):
        raise ScenarioError("expected a number or [re, im] pair", where)
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(float(value[0]), float(value[1]))
    raise ScenarioError("expected a number or [re, im] pair", where)


def _number(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", where)
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ScenarioError(f"expected a {'positive ' if positive else ''}finite number, got {value!r}", where)
    return value


def _integer(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", where)
    if minimum is not None and value < minimum:
        raise ScenarioError(f"must be at least {minimum}", where)
    return value


def _matrix(value, d: int, where: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != d:
        raise ScenarioError(f"expected a {d}x{d} matrix", where)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != d:
            raise ScenarioError(f"row must have {d} entries", f"{where}[{i}]")
        rows.append([_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    m = np.array(rows, dtype=np.complex128)
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > 1e-12:
        raise ScenarioError(f"matrix is not Hermitian (max deviation {dev:.3e})", where)
    return m


def parse_state(value, d: int, where: str) -> np.ndarray:
    if isinstance(value, str):
        try:
            psi = ket(value)
        except ValueError as exc:
            raise ScenarioError(str(exc), where) from None
        if len(psi) != d:
            raise ScenarioError(f"ket {value!r} has dimension {len(psi)}, scenario has {d}", where)
        return psi
    if not isinstance(value, list) or len(value) != d:
        raise ScenarioError(f"expected {d} amplitudes or a ket label", where)
    psi = np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(value)])
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-12:
        raise ScenarioError(f"state is not normalized (norm {norm!r})", where)
    return psi


def _pauli_axis(spec: dict, where: str) -> np.ndarray:
    if "n_z" in spec:
        nz = _number(spec["n_z"], f"{where}.n_z")
        if abs(nz) > 1:
            raise ScenarioError("n_z must lie in [-1, 1]", f"{where}.n_z")
        phi = _number(spec.get("phi", math.pi / 4), f"{where}.phi")
        r = math.sqrt(1.0 - nz * nz)
        n = np.array([r * math.cos(phi), r * math.sin(phi), nz])
    else:
        axis = spec.get("axis")
        if not isinstance(axis, list) or len(axis) != 3:
            raise ScenarioError("expected a 3-vector axis or n_z", f"{where}.axis")
        n = np.array([_number(a, f"{where}.axis[{i}]") for i, a in enumerate(axis)])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ScenarioError("axis must be non-zero", f"{where}.axis")
        n = n / norm
    scale = _number(spec.get("scale", 1.0), f"{where}.scale")
    return scale * (n[0] * SX + n[1] * SY + n[2] * SZ)


def _tensor_sum(spec: dict, d: int, where: str) -> np.ndarray:
    terms = spec.get("terms")
    if not isinstance(terms, list) or not terms:
        raise ScenarioError("expected a non-empty list of Pauli strings", f"{where}.terms")
    coeffs = spec.get("coefficients", [1.0] * len(terms))
    if not isinstance(coeffs, list) or len(coeffs) != len(terms):
        raise ScenarioError("needs one coefficient per term", f"{where}.coefficients")
    H = np.zeros((d, d), dtype=np.complex128)
    for i, (term, c) in enumerate(zip(terms, coeffs)):
        w = f"{where}.terms[{i}]"
        if not isinstance(term, str) or set(term.lower()) - set(PAULI):
            raise ScenarioError("Pauli string must use the letters i, x, y, z", w)
        op = kron(*(PAULI[ch] for ch in term.lower()))
        if op.shape[0] != d:
            raise ScenarioError(f"term acts on dimension {op.shape[0]}, scenario has {d}", w)
        H += _number(c, f"{where}.coefficients[{i}]") * op
    return H


def _hamiltonian(spec, d: int, psi0, target, seed: int, hbar: float, where: str) -> HamiltonianSchedule:
    if not isinstance(spec, dict):
        raise ScenarioError("expected an object", where)
    kind = spec.get("kind")
    if kind not in HAMILTONIAN_KINDS:
        raise ScenarioError(f"unknown kind {kind!r}; expected one of {', '.join(HAMILTONIAN_KINDS)}",
                            f"{where}.kind")
    if kind == "piecewise":
        breaks = spec.get("breakpoints")
        pieces = spec.get("pieces")
        if not isinstance(breaks, list) or not isinstance(pieces, list) or len(pieces) != len(breaks) + 1:
            raise ScenarioError("needs breakpoints and exactly one more piece", where)
        ops = []
        for i, piece in enumerate(pieces):
            sub = _hamiltonian(piece, d, psi0, target, seed, hbar, f"{where}.pieces[{i}]")
            if not sub.is_constant:
                raise ScenarioError("pieces must be constant", f"{where}.pieces[{i}]")
            ops.append(sub.evaluate(0.0))
        bps = [_number(b, f"{where}.breakpoints[{i}]") for i, b in enumerate(breaks)]
        try:
            return HamiltonianSchedule.piecewise(bps, ops)
        except ValueError as exc:
            raise ScenarioError(str(exc), f"{where}.breakpoints") from None

    if kind == "pauli-axis":
        if d != 2:
            raise ScenarioError("pauli-axis needs dimension 2", f"{where}.kind")
        H = _pauli_axis(spec, where)
    elif kind == "matrix-literal":
        H = _matrix(spec.get("matrix"), d, f"{where}.matrix")
    elif kind == "tensor-sum":
        H = _tensor_sum(spec, d, where)
    elif kind == "self-inverse-random":
        H = random_self_inverse(d, _integer(spec.get("seed", seed), f"{where}.seed"))
    elif kind == "random-hermitian":
        H = random_hermitian(d, _integer(spec.get("seed", seed), f"{where}.seed"))
    else:  # optimal-form
        omega = _number(spec.get("omega", 1.0), f"{where}.omega", positive=True)
        if "perp" in spec:
            perp = parse_state(spec["perp"], d, f"{where}.perp")
            if abs(np.vdot(psi0, perp)) > 1e-10:
                raise ScenarioError("perp must be orthogonal to the initial state", f"{where}.perp")
            H = optimal_hamiltonian(psi0, perp, omega, hbar)
        elif target is not None:
            H = geodesic_hamiltonian(psi0, target, omega * hbar, hbar)
        else:
            H = optimal_hamiltonian(psi0, complete_basis_from(psi0).vectors[1], omega, hbar)
    return HamiltonianSchedule.constant(H)


def parse_scenario(data: Any) -> Scenario:
    """Validate a scenario object and build its schedule, states and basis."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    raw = copy.deepcopy(data)
    name = data.get("name", "unnamed")
    if not isinstance(name, str):
        raise ScenarioError("expected a string", "name")
    d = _integer(data.get("dimension"), "dimension", minimum=2)
    if d > 64:
        raise ScenarioError("dimensions above 64 are not supported", "dimension")
    seed = _integer(data.get("seed", 0), "seed")
    hbar = _number(data.get("hbar", HBAR), "hbar", positive=True)
    if "initial_state" not in data:
        raise ScenarioError("missing", "initial_state")
    if data["initial_state"] == "random":
        psi0 = random_state(d, seed)
    else:
        psi0 = parse_state(data["initial_state"], d, "initial_state")
    target = None
    if data.get("target_state") is not None:
        target = parse_state(data["target_state"], d, "target_state")
        if hilbert_angle(psi0, target) < 1e-8:
            raise ScenarioError("target coincides with the initial state up to phase", "target_state")
    schedule = _hamiltonian(data.get("hamiltonian"), d, psi0, target, seed, hbar, "hamiltonian")
    T = _number(data.get("horizon_T", math.pi / 2), "horizon_T", positive=True)
    steps = data.get("steps", "auto")
    if steps != "auto":
        steps = _integer(steps, "steps", minimum=4)

    basis_spec = data.get("basis", "from-initial")
    if basis_spec == "from-initial":
        basis = complete_basis_from(psi0)
    else:
        m = np.array([[_complex(x, f"basis[{i}][{j}]") for j, x in enumerate(row)]
                      for i, row in enumerate(basis_spec)]) if isinstance(basis_spec, list) else None
        if m is None or m.shape != (d, d):
            raise ScenarioError(f"expected 'from-initial' or a {d}x{d} list of basis vectors", "basis")
        try:
            basis = OrthonormalBasis(m)
        except ValueError as exc:
            raise ScenarioError(str(exc), "basis") from None

    cap = _number(data.get("variance_cap", 1.0), "variance_cap", positive=True)
    restarts = _integer(data.get("restarts", 8), "restarts", minimum=1)
    expect = data.get("expect")
    if expect is not None and not isinstance(expect, dict):
        raise ScenarioError("expected an object of field: [value, tolerance]", "expect")
    return Scenario(name, d, schedule, psi0, target, T, steps, basis, seed, hbar, raw,
                    variance_cap=cap, restarts=restarts, expect=expect)


def require_target(sc: Scenario) -> np.ndarray:
    if sc.target_state is None:
        raise ScenarioError("this command needs a target state", "target_state")
    return sc.target_state


def builtin_fixtures() -> list[str]:
    root = resources.files("exactqsl") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario_data(ref: str) -> dict:
    """Read scenario JSON from a path, or from a built-in fixture by name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text(encoding="utf-8")
        source = str(path)
    else:
        res = resources.files("exactqsl") / "fixtures" / f"{ref}.json"
        if not res.is_file():
            raise ScenarioError(f"no such file or built-in fixture: {ref!r}")
        text = res.read_text(encoding="utf-8")
        source = f"fixture {ref}"
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def set_path(data: dict, dotted: str, value) -> dict:
    """Copy of ``data`` with the field at a dotted path replaced."""
    out = copy.deepcopy(data)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ScenarioError("sweep axis does not name a field", dotted)
        node = node[key]
    node[keys[-1]] = value
    return out
