import numpy as np
import pytest

from hyqas.circuit import Circuit
from hyqas.hamiltonian import load_bundled
from hyqas.optimizer import OptimizerConfig, OptimizerError, minimize
from hyqas.quantum import (
    GateKind,
    GateSpec,
    exact_ground_energy,
    hamiltonian_expectation,
    hamiltonian_matrix,
)
from conftest import random_gates


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


@pytest.mark.parametrize("algorithm", ["cobyla", "nelder-mead"])
def test_convex_1d(algorithm):
    cfg = OptimizerConfig(max_evals=500, algorithm=algorithm, convergence_tol=1e-12)
    result = minimize(lambda x: (x[0] - 1.0) ** 2, np.array([0.0]), cfg)
    assert abs(result.best_params[0] - 1.0) <= 1e-6
    assert result.best_value <= 1e-10


def test_rosenbrock_within_budget():
    # the simplex algorithm cracks the curved valley well inside 2000 evals
    cfg = OptimizerConfig(max_evals=2000, algorithm="nelder-mead",
                          convergence_tol=1e-12)
    result = minimize(rosenbrock, np.array([-1.2, 1.0]), cfg)
    assert result.best_value <= 1e-6
    assert result.n_evals <= 2000


def toy_ansatz_energy_grid(n_points=360):
    """Independent grid oracle for [RY(t0) q0, CNOT(0,1), RY(t1) q1] on the
    toy Hamiltonian: amplitudes derived by hand, energy via the dense matrix."""
    h = load_bundled("toy-2q")
    m = hamiltonian_matrix(h)
    thetas = -np.pi + 2 * np.pi * np.arange(n_points) / n_points
    c0, s0 = np.cos(thetas / 2), np.sin(thetas / 2)
    best = np.inf
    for i in range(n_points):
        # state after RY(t0) on q0 then CNOT(0,1): c0|00> + s0|11>
        # RY(t1) on q1 maps it to (c0*c1, -s0*s1, c0*s1, s0*c1)
        psi = np.stack([
            c0[i] * c0, -s0[i] * s0, c0[i] * s0, s0[i] * c0,
        ])  # shape (4, n_points), column j = theta1 grid point
        energies = np.real(np.einsum("ij,ik,kj->j", psi.conj(), m, psi))
        best = min(best, energies.min())
    return float(best)


def test_vqe_ansatz_reaches_grid_optimum():
    h = load_bundled("toy-2q")
    circuit = Circuit(2, 4)
    circuit.append(GateSpec(GateKind.RY, 0, angle=0.0))
    circuit.append(GateSpec(GateKind.CNOT, 0, 1))
    circuit.append(GateSpec(GateKind.RY, 1, angle=0.0))

    def objective(x):
        return hamiltonian_expectation(circuit.statevector(x), h)

    grid_best = toy_ansatz_energy_grid()
    for algorithm in ("cobyla", "nelder-mead"):
        cfg = OptimizerConfig(max_evals=500, algorithm=algorithm)
        result = minimize(objective, np.zeros(2), cfg)
        assert abs(result.best_value - grid_best) <= 1e-4


def test_never_worse_than_start():
    rng = np.random.default_rng(3)
    h = load_bundled("toy-2q")
    for _ in range(5):
        circuit = Circuit(2, 12)
        for gate in random_gates(rng, 2, 8):
            circuit.append(gate)
        x0 = circuit.parameter_vector()

        def objective(x):
            return hamiltonian_expectation(circuit.statevector(x), h)

        cfg = OptimizerConfig(max_evals=60)
        result = minimize(objective, x0, cfg)
        assert result.best_value <= objective(x0) + 1e-15
        assert result.best_value >= exact_ground_energy(h) - 1e-9
        # trace is monotone non-increasing
        assert all(a >= b for a, b in zip(result.trace, result.trace[1:]))


def test_budget_respected():
    calls = [0]

    def f(x):
        calls[0] += 1
        return float(np.sum(x**2))

    cfg = OptimizerConfig(max_evals=25, algorithm="cobyla")
    result = minimize(f, np.array([3.0, -2.0, 1.0]), cfg)
    assert result.n_evals <= 25
    assert calls[0] <= 26  # at most one rejected call past the budget


def test_deterministic_rerun():
    def f(x):
        return float(np.sin(3 * x[0]) * np.cos(2 * x[1]) + 0.1 * x @ x)

    cfg = OptimizerConfig(max_evals=300)
    r1 = minimize(f, np.array([0.3, 0.4]), cfg)
    r2 = minimize(f, np.array([0.3, 0.4]), cfg)
    assert r1.best_value == r2.best_value
    assert r1.n_evals == r2.n_evals
    np.testing.assert_array_equal(r1.best_params, r2.best_params)


def test_zero_dimensional_x0():
    result = minimize(lambda x: 7.25, np.zeros(0), OptimizerConfig())
    assert result.n_evals == 1
    assert result.best_value == 7.25
    assert result.best_params.size == 0
    assert result.converged


def test_non_finite_objective_aborts():
    def f(x):
        return np.nan if x[0] > 0.5 else float(x[0] ** 2)

    with pytest.raises(OptimizerError, match="non-finite"):
        minimize(f, np.array([2.0]), OptimizerConfig(max_evals=50))


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(max_evals=0)
    with pytest.raises(ValueError):
        OptimizerConfig(algorithm="bfgs")
    with pytest.raises(ValueError):
        OptimizerConfig(convergence_tol=0.0)
