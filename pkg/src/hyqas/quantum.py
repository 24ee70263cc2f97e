"""Dense statevector simulation of rotation/CNOT circuits and exact
Pauli-expectation evaluation.

Conventions (fixed; the dense-matrix oracle depends on them):
  * Basis index is little-endian: qubit 0 is the least significant bit,
    so ``state[5] == state[0b101]`` is the amplitude of ``|q2=1, q1=0, q0=1>``.
  * Rotation gates are ``R_a(t) = exp(-i * t * a / 2)`` for a in {X, Y, Z}.
    Under this convention ``R_a(t1) R_a(t2) == R_a(t1 + t2)``.

All operations are pure functions of their inputs: they never mutate the
state arrays they receive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import cos, sin

import numpy as np

MAX_QUBITS = 10

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"


ROTATION_KINDS = (GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class GateSpec:
    """One gate placement: a rotation (qubit, angle) or a CNOT (qubit=control,
    qubit2=target)."""

    kind: GateKind
    qubit: int
    qubit2: int | None = None
    angle: float | None = None

    @property
    def is_rotation(self) -> bool:
        return self.kind != GateKind.CNOT

    def validate(self, n_qubits: int) -> None:
        if not 0 <= self.qubit < n_qubits:
            raise ValueError(f"qubit {self.qubit} out of range for {n_qubits} qubits")
        if self.kind == GateKind.CNOT:
            if self.qubit2 is None or not 0 <= self.qubit2 < n_qubits:
                raise ValueError(f"CNOT target {self.qubit2} out of range")
            if self.qubit2 == self.qubit:
                raise ValueError("CNOT control and target must differ")
        else:
            if self.qubit2 is not None:
                raise ValueError(f"{self.kind.value} takes a single qubit")
            if self.angle is None or not np.isfinite(self.angle):
                raise ValueError(f"{self.kind.value} requires a finite angle")

    def with_angle(self, angle: float) -> "GateSpec":
        return GateSpec(self.kind, self.qubit, self.qubit2, angle)


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; ``letters[k]`` acts on qubit k."""

    n_qubits: int
    letters: str

    def __post_init__(self):
        if len(self.letters) != self.n_qubits:
            raise ValueError(
                f"letters length {len(self.letters)} != n_qubits {self.n_qubits}"
            )
        bad = set(self.letters) - set("IXYZ")
        if bad:
            raise ValueError(f"unknown Pauli letter(s): {sorted(bad)}")


def zero_state(n_qubits: int) -> np.ndarray:
    """|0...0> on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    state = np.zeros(2**n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def n_qubits_of(state: np.ndarray) -> int:
    n = int(np.log2(state.size))
    if 2**n != state.size:
        raise ValueError(f"state length {state.size} is not a power of two")
    return n


@lru_cache(maxsize=256)
def _bit_split(n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with bit q clear (idx0) and their bit-q-set partners."""
    idx = np.arange(2**n)
    idx0 = idx[(idx >> q) & 1 == 0]
    return idx0, idx0 | (1 << q)


@lru_cache(maxsize=256)
def _cnot_swap(n: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (target bit 0 / 1) among basis states with the control set."""
    idx = np.arange(2**n)
    sel = idx[((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)]
    return sel, sel | (1 << target)


def apply_gate(state: np.ndarray, gate: GateSpec) -> np.ndarray:
    """Apply one gate, returning a new statevector."""
    n = n_qubits_of(state)
    gate.validate(n)
    out = state.copy()
    if gate.kind == GateKind.CNOT:
        i0, i1 = _cnot_swap(n, gate.qubit, gate.qubit2)
        out[i0], out[i1] = state[i1], state[i0]
        return out
    i0, i1 = _bit_split(n, gate.qubit)
    half = 0.5 * gate.angle
    c, s = cos(half), sin(half)
    a0, a1 = state[i0], state[i1]
    if gate.kind == GateKind.RX:
        out[i0] = c * a0 - 1j * s * a1
        out[i1] = -1j * s * a0 + c * a1
    elif gate.kind == GateKind.RY:
        out[i0] = c * a0 - s * a1
        out[i1] = s * a0 + c * a1
    else:  # RZ
        out[i0] = (c - 1j * s) * a0
        out[i1] = (c + 1j * s) * a1
    return out


def apply_gates(state: np.ndarray, gates) -> np.ndarray:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


@lru_cache(maxsize=1024)
def _pauli_perm_phase(letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Permutation/phase form of a Pauli string P: P|i> = phase[i] * |perm[i]>.

    X and Y flip the bit; Y and Z contribute phases. Computed column-wise so
    that P[perm[i], i] = phase[i].
    """
    n = len(letters)
    idx = np.arange(2**n)
    flip = 0
    phase = np.ones(2**n, dtype=complex)
    for q, letter in enumerate(letters):
        if letter == "I":
            continue
        bit = (idx >> q) & 1
        if letter == "X":
            flip |= 1 << q
        elif letter == "Y":
            flip |= 1 << q
            # Y|0> = i|1>, Y|1> = -i|0>
            phase = phase * np.where(bit == 0, 1j, -1j)
        else:  # Z
            phase = phase * np.where(bit == 0, 1.0, -1.0)
    return idx ^ flip, phase


def pauli_expectation(state: np.ndarray, p: PauliString) -> float:
    """<psi|P|psi>, exact; the ~1e-17 imaginary residue is discarded."""
    n = n_qubits_of(state)
    if n != p.n_qubits:
        raise ValueError(f"state has {n} qubits but Pauli string has {p.n_qubits}")
    perm, phase = _pauli_perm_phase(p.letters)
    # <psi|P|psi> = sum_i conj(psi[perm[i]]) * phase[i] * psi[i]
    return float(np.real(np.sum(np.conj(state[perm]) * phase * state)))


def hamiltonian_expectation(state: np.ndarray, hamiltonian) -> float:
    """<psi|H|psi> as the weighted sum over the Pauli terms of H."""
    n = n_qubits_of(state)
    if n != hamiltonian.n_qubits:
        raise ValueError(
            f"state has {n} qubits but Hamiltonian has {hamiltonian.n_qubits}"
        )
    return float(
        sum(coeff * pauli_expectation(state, p) for coeff, p in hamiltonian.terms)
    )


# ---------------------------------------------------------------------------
# Dense-matrix path: the independent oracle for the statevector code above,
# and the exact-diagonalization ground-truth for Hamiltonians.
# ---------------------------------------------------------------------------

def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a Pauli string (little-endian Kronecker order)."""
    m = np.array([[1.0 + 0j]])
    for letter in p.letters:  # qubit 0 ends up least significant
        m = np.kron(PAULI_MATRICES[letter], m)
    return m


def hamiltonian_matrix(hamiltonian) -> np.ndarray:
    n = hamiltonian.n_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"dense matrix limited to {MAX_QUBITS} qubits, got {n}")
    m = np.zeros((2**n, 2**n), dtype=complex)
    for coeff, p in hamiltonian.terms:
        m += coeff * pauli_matrix(p)
    return m


def gate_matrix(gate: GateSpec, n_qubits: int) -> np.ndarray:
    """Dense 2^n x 2^n unitary of a single gate placement."""
    gate.validate(n_qubits)
    if gate.kind == GateKind.CNOT:
        # |0><0|_c (x) I + |1><1|_c (x) X_t
        p0 = np.array([[1, 0], [0, 0]], dtype=complex)
        p1 = np.array([[0, 0], [0, 1]], dtype=complex)
        term0 = np.array([[1.0 + 0j]])
        term1 = np.array([[1.0 + 0j]])
        for q in range(n_qubits):
            f0 = p0 if q == gate.qubit else PAULI_MATRICES["I"]
            if q == gate.qubit:
                f1 = p1
            elif q == gate.qubit2:
                f1 = PAULI_MATRICES["X"]
            else:
                f1 = PAULI_MATRICES["I"]
            term0 = np.kron(f0, term0)
            term1 = np.kron(f1, term1)
        return term0 + term1
    axis = gate.kind.value[1]  # X, Y or Z
    local = (
        cos(gate.angle / 2) * PAULI_MATRICES["I"]
        - 1j * sin(gate.angle / 2) * PAULI_MATRICES[axis]
    )
    m = np.array([[1.0 + 0j]])
    for q in range(n_qubits):
        m = np.kron(local if q == gate.qubit else PAULI_MATRICES["I"], m)
    return m


def circuit_unitary(gates, n_qubits: int) -> np.ndarray:
    """Product of dense gate matrices, later gates applied on the left."""
    u = np.eye(2**n_qubits, dtype=complex)
    for gate in gates:
        u = gate_matrix(gate, n_qubits) @ u
    return u


def exact_ground_energy(hamiltonian) -> float:
    """Minimum eigenvalue of the dense Hermitian matrix sum_i h_i P_i."""
    if hamiltonian.n_qubits > MAX_QUBITS:
        raise ValueError(
            f"exact diagonalization limited to {MAX_QUBITS} qubits,"
            f" got {hamiltonian.n_qubits}"
        )
    return float(np.linalg.eigvalsh(hamiltonian_matrix(hamiltonian))[0])
