"""hyqas: hybrid-action reinforcement learning for quantum architecture search.

An RL agent with a joint discrete/continuous action space builds parameterized
quantum circuits inside a VQE environment, learning gate placement, parameter
initialization and parameter refinement together, with a derivative-free
classical optimizer providing final fine-tuning and energy-based rewards
driving a feedback curriculum.
"""

from .quantum import (
    GateKind,
    GateSpec,
    PauliString,
    apply_gate,
    apply_gates,
    exact_ground_energy,
    hamiltonian_expectation,
    pauli_expectation,
    zero_state,
)
from .hamiltonian import (
    EnergyBounds,
    Hamiltonian,
    HamiltonianFormatError,
    emin_proxy,
    energy_bounds,
    load_bundled,
    load_hamiltonian_file,
    parse_hamiltonian,
    serialize_hamiltonian,
)

__version__ = "0.1.0"
