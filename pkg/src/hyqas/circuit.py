"""Mutable circuit under construction.

Gates are laid out in *moments* by a local-stacking rule: a rotation on qubit
q lands one moment after the last moment q was used in, and a CNOT lands one
moment after the later of its two wires. Gates on disjoint wires can therefore
share a moment, so circuit depth can be smaller than the placement count.

The circuit also produces the agent-facing tensor observation (a binary
placement tensor plus a parallel angle tensor) and the set of discrete action
indices that would be redundant given the current last-gate-per-wire
configuration:

  * repeating the rotation kind that currently ends a wire (the two collapse
    to a single rotation with the summed angle);
  * the reversed partner of a CNOT while that CNOT is still the last gate on
    both of its wires (the pair cancels).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quantum import GateKind, GateSpec, ROTATION_KINDS, apply_gate, zero_state

_ROTATION_COLUMN = {GateKind.RX: 0, GateKind.RY: 1, GateKind.RZ: 2}


class CircuitCapacityError(RuntimeError):
    """Raised when a placement would exceed the n_step capacity."""


def discrete_action_table(n_qubits: int) -> list[GateSpec]:
    """Deterministic enumeration of the 2*C(N,2) + 3N gate candidates.

    Order: all RX by qubit, all RY, all RZ, then ordered CNOT pairs in
    lexicographic (control, target) order. Rotation templates carry no angle.
    """
    if n_qubits < 2:
        raise ValueError("need at least 2 qubits for a CNOT-bearing action table")
    table = []
    for kind in ROTATION_KINDS:
        for q in range(n_qubits):
            table.append(GateSpec(kind, q))
    for control in range(n_qubits):
        for target in range(n_qubits):
            if control != target:
                table.append(GateSpec(GateKind.CNOT, control, target))
    return table


def rotation_action_index(kind: GateKind, qubit: int, n_qubits: int) -> int:
    return ROTATION_KINDS.index(kind) * n_qubits + qubit


def cnot_action_index(control: int, target: int, n_qubits: int) -> int:
    offset = target if target < control else target - 1
    return 3 * n_qubits + control * (n_qubits - 1) + offset


def param_action_mask(n_qubits: int) -> np.ndarray:
    """1 where the candidate is a parameterized rotation, 0 on CNOT entries."""
    n_actions = 3 * n_qubits + n_qubits * (n_qubits - 1)
    mask = np.zeros(n_actions)
    mask[: 3 * n_qubits] = 1.0
    return mask


@dataclass
class PlacedGate:
    spec: GateSpec  # angle field holds the angle given at placement time
    moment: int
    step: int  # 0-based placement index
    param_index: int | None  # contiguous enumeration of rotation gates


class CircuitMetrics(NamedTuple):
    params: int
    depth: int
    gates: int


@dataclass(frozen=True)
class CircuitTensorState:
    """Agent observation: binary N x (N+3) x n_step placement tensor plus a
    parallel N x 3 x n_step angle tensor (nonzero only under rotation marks)."""

    binary: np.ndarray
    angles: np.ndarray


class Circuit:
    """Single-writer circuit; reads (encoding, metrics, simulate) are pure."""

    def __init__(self, n_qubits: int, n_step: int):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if n_step < 1:
            raise ValueError("n_step must be positive")
        self.n_qubits = n_qubits
        self.n_step = n_step
        self.gates: list[PlacedGate] = []
        self._angles: list[float] = []  # current value per param_index
        self._wire_moment = [-1] * n_qubits
        self._wire_last: list[PlacedGate | None] = [None] * n_qubits

    # -- construction -------------------------------------------------------

    def append(self, gate: GateSpec) -> PlacedGate:
        if len(self.gates) >= self.n_step:
            raise CircuitCapacityError(f"capacity n_step={self.n_step} exceeded")
        gate.validate(self.n_qubits)
        if gate.kind == GateKind.CNOT:
            moment = 1 + max(self._wire_moment[gate.qubit],
                             self._wire_moment[gate.qubit2])
            placed = PlacedGate(gate, moment, len(self.gates), None)
            self._wire_moment[gate.qubit] = moment
            self._wire_moment[gate.qubit2] = moment
            self._wire_last[gate.qubit] = placed
            self._wire_last[gate.qubit2] = placed
        else:
            moment = 1 + self._wire_moment[gate.qubit]
            placed = PlacedGate(gate, moment, len(self.gates), len(self._angles))
            self._angles.append(float(gate.angle))
            self._wire_moment[gate.qubit] = moment
            self._wire_last[gate.qubit] = placed
        self.gates.append(placed)
        return placed

    def copy(self) -> "Circuit":
        dup = Circuit(self.n_qubits, self.n_step)
        for placed in self.gates:
            spec = placed.spec
            if spec.is_rotation:
                spec = spec.with_angle(self._angles[placed.param_index])
            dup.append(spec)
        return dup

    # -- parameters ---------------------------------------------------------

    @property
    def n_parameters(self) -> int:
        return len(self._angles)

    def parameter_vector(self) -> np.ndarray:
        return np.array(self._angles, dtype=float)

    def set_parameters(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self._angles),):
            raise ValueError(
                f"expected {len(self._angles)} parameters, got shape {values.shape}"
            )
        self._angles = [float(v) for v in values]

    def add_to_parameter(self, param_index: int, delta: float) -> None:
        self._angles[param_index] += float(delta)

    def delta_mask(self) -> np.ndarray:
        """Per-step rotation indicator over the full n_step horizon."""
        mask = np.zeros(self.n_step)
        for placed in self.gates:
            if placed.param_index is not None:
                mask[placed.step] = 1.0
        return mask

    def param_index_by_step(self) -> dict[int, int]:
        return {g.step: g.param_index for g in self.gates if g.param_index is not None}

    # -- reads --------------------------------------------------------------

    def bound_gates(self) -> list[GateSpec]:
        """Gate list with current parameter values bound in."""
        out = []
        for placed in self.gates:
            spec = placed.spec
            if spec.is_rotation:
                spec = spec.with_angle(self._angles[placed.param_index])
            out.append(spec)
        return out

    def statevector(self, parameters=None) -> np.ndarray:
        state = zero_state(self.n_qubits)
        angles = self._angles if parameters is None else np.asarray(parameters, float)
        for placed in self.gates:
            spec = placed.spec
            if spec.is_rotation:
                spec = spec.with_angle(float(angles[placed.param_index]))
            state = apply_gate(state, spec)
        return state

    def metrics(self) -> CircuitMetrics:
        depth = 1 + max((g.moment for g in self.gates), default=-1)
        return CircuitMetrics(params=len(self._angles), depth=depth,
                              gates=len(self.gates))

    def encode(self, n_step: int | None = None) -> CircuitTensorState:
        n_step = self.n_step if n_step is None else n_step
        n = self.n_qubits
        binary = np.zeros((n, n + 3, n_step))
        angles = np.zeros((n, 3, n_step))
        for placed in self.gates:
            if placed.moment >= n_step:
                raise ValueError(
                    f"moment {placed.moment} does not fit in n_step={n_step}"
                )
            spec = placed.spec
            if spec.kind == GateKind.CNOT:
                binary[spec.qubit, spec.qubit2, placed.moment] = 1.0
            else:
                col = _ROTATION_COLUMN[spec.kind]
                binary[spec.qubit, n + col, placed.moment] = 1.0
                angles[spec.qubit, col, placed.moment] = self._angles[placed.param_index]
        return CircuitTensorState(binary=binary, angles=angles)

    def illegal_actions(self) -> set[int]:
        illegal: set[int] = set()
        n = self.n_qubits
        for q, placed in enumerate(self._wire_last):
            if placed is None:
                continue
            if placed.spec.is_rotation:
                illegal.add(rotation_action_index(placed.spec.kind, q, n))
        seen = set()
        for placed in self._wire_last:
            if placed is None or placed.spec.is_rotation or id(placed) in seen:
                continue
            seen.add(id(placed))
            control, target = placed.spec.qubit, placed.spec.qubit2
            # reversed CNOT is redundant only while this CNOT is still the
            # most recent gate on both of its wires
            if self._wire_last[control] is placed and self._wire_last[target] is placed:
                illegal.add(cnot_action_index(target, control, n))
        return illegal


# -- serialization ----------------------------------------------------------
# Moments are recomputed on load, never stored.

def serialize_circuit(circuit: Circuit) -> str:
    records = []
    for gate in circuit.bound_gates():
        rec = {"kind": gate.kind.value, "qubit": gate.qubit}
        if gate.qubit2 is not None:
            rec["qubit2"] = gate.qubit2
        if gate.angle is not None:
            rec["angle"] = gate.angle
        records.append(rec)
    return json.dumps(
        {"n_qubits": circuit.n_qubits, "n_step": circuit.n_step, "gates": records},
        indent=1,
    )


def parse_circuit(text: str) -> Circuit:
    doc = json.loads(text)
    circuit = Circuit(int(doc["n_qubits"]),
                      int(doc.get("n_step", max(1, len(doc["gates"])))))
    for rec in doc["gates"]:
        circuit.append(GateSpec(
            GateKind(rec["kind"]),
            int(rec["qubit"]),
            None if rec.get("qubit2") is None else int(rec["qubit2"]),
            rec.get("angle"),
        ))
    return circuit
