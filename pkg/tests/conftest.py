import numpy as np
import pytest

from hyqas.quantum import GateKind, GateSpec


def random_gate(rng, n_qubits):
    kinds = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT]
    kind = kinds[rng.integers(len(kinds))]
    if kind == GateKind.CNOT:
        control, target = rng.choice(n_qubits, size=2, replace=False)
        return GateSpec(GateKind.CNOT, int(control), int(target))
    q = int(rng.integers(n_qubits))
    angle = float(rng.uniform(-np.pi, np.pi))
    return GateSpec(kind, q, angle=angle)


def random_gates(rng, n_qubits, n_gates):
    return [random_gate(rng, n_qubits) for _ in range(n_gates)]


def random_state(rng, n_qubits):
    v = rng.standard_normal(2**n_qubits) + 1j * rng.standard_normal(2**n_qubits)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
