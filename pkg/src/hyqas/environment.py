"""The RL environment: episode lifecycle with random halting, hybrid-action
execution against the circuit, external-optimizer refinement, fixed-scale
reward normalization, and the feedback-driven curriculum threshold.

Reward (terminal cases first):

    +5                                  if E_t < xi
    -5                                  if t >= L and E_t >= xi
    max((E_prev - E_t) / (E_start - E_min), -1)   otherwise

The denominator is pinned to the episode-start scale, so the cumulative
stepwise reward depends only on the net energy reduction, not on the path.

Curriculum: xi = E_min + tau. tau starts at xi1; every G episodes a greedy
shift recalibrates tau to |E_low - E_min| + delta and resets the success
counter; between shifts, once the success count exceeds its threshold each
further episode tightens tau by delta/kappa. E_low is the lowest energy seen
at any step since training began.

The circuit keeps the agent-generated (init + refine) angles in observations;
the external optimizer's fine-tuned energy drives the reward and E_low, and
is reported alongside the raw agent energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import Circuit, CircuitTensorState, discrete_action_table
from .hamiltonian import Hamiltonian, emin_proxy
from .optimizer import OptimizerConfig, minimize
from .policy import HybridAction, MaskBundle, masks_for_circuit
from .quantum import hamiltonian_expectation


class IllegalActionError(ValueError):
    """The agent submitted a discrete action from the illegal set."""


def sample_negative_binomial(r: int, p: float, rng) -> int:
    """Failures before the r-th success when each trial fails with
    probability p (so mean r*p/(1-p))."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"failure probability must be in (0, 1), got {p}")
    return int(rng.negative_binomial(r, 1.0 - p))


def sample_episode_length(n_step: int, p: float, rng) -> int:
    """Episode cap L ~ NegativeBinomial(r=n_step, failure prob p), clamped
    to [1, n_step] so tensor shapes stay valid."""
    if n_step < 1:
        raise ValueError("n_step must be >= 1")
    return min(max(sample_negative_binomial(n_step, p, rng), 1), n_step)


def compute_reward(e_t: float, e_prev: float, e_start: float, e_min: float,
                   xi: float, t: int, episode_cap: int) -> float:
    for value in (e_t, e_prev, e_start, e_min, xi):
        if not np.isfinite(value):
            raise ValueError(f"non-finite energy input {value!r}")
    if e_t < xi:
        return 5.0
    if t >= episode_cap:
        return -5.0
    return max((e_prev - e_t) / (e_start - e_min), -1.0)


# -- curriculum ---------------------------------------------------------------

@dataclass(frozen=True)
class CurriculumConfig:
    xi1: float = 0.3  # initial tolerance, Hartree
    delta: float = 1e-4  # greedy-shift slack / amortization quantum
    kappa: float = 10.0  # amortization divisor
    recalibration_period: int = 50  # G: episodes between greedy shifts
    success_threshold: int = 5


@dataclass(frozen=True)
class CurriculumState:
    e_min: float
    tau: float
    xi: float
    e_low: float
    success_count: int
    episode_count: int
    hyper: CurriculumConfig


def init_curriculum(e_min: float, e_start: float,
                    hyper: CurriculumConfig | None = None) -> CurriculumState:
    hyper = hyper or CurriculumConfig()
    tau = hyper.xi1
    return CurriculumState(e_min=e_min, tau=tau, xi=e_min + tau, e_low=e_start,
                           success_count=0, episode_count=0, hyper=hyper)


def curriculum_update_step(cur: CurriculumState, e_t: float) -> CurriculumState:
    return replace(cur, e_low=min(cur.e_low, e_t))


def curriculum_update_episode(cur: CurriculumState,
                              episode_succeeded: bool) -> CurriculumState:
    hyper = cur.hyper
    episode_count = cur.episode_count + 1
    success_count = cur.success_count + (1 if episode_succeeded else 0)
    tau = cur.tau
    if episode_count % hyper.recalibration_period == 0:
        tau = abs(cur.e_low - cur.e_min) + hyper.delta  # greedy shift
        success_count = 0
    elif success_count > hyper.success_threshold:
        tau = tau - hyper.delta / hyper.kappa  # amortization
    return replace(cur, tau=tau, xi=cur.e_min + tau,
                   success_count=success_count, episode_count=episode_count)


# -- environment --------------------------------------------------------------

@dataclass(frozen=True)
class EnvConfig:
    n_step: int = 40
    halt_p: float = 0.1  # negative-binomial failure probability
    optimize_every_step: bool = True
    use_external_optimizer: bool = True
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(max_evals=200))


@dataclass
class EpisodeState:
    circuit: Circuit
    step: int
    episode_cap: int  # L, the halting draw
    e_prev: float
    e_start: float
    done: bool


@dataclass(frozen=True)
class StepOutcome:
    observation: CircuitTensorState
    reward: float
    done: bool
    energy: float  # post-optimization energy driving the reward
    optimizer_evals: int
    agent_energy: float  # energy at the agent-generated angles


class VqeEnvironment:
    """Owns the circuit under construction and the curriculum across
    episodes. Single-writer; parallel rollouts each need their own instance.
    """

    def __init__(self, hamiltonian: Hamiltonian, env_cfg: EnvConfig | None = None,
                 curriculum_cfg: CurriculumConfig | None = None):
        self.hamiltonian = hamiltonian
        self.cfg = env_cfg or EnvConfig()
        self.e_min = emin_proxy(hamiltonian)
        self.e_start = self._empty_circuit_energy()
        if not self.e_start > self.e_min:
            raise ValueError(
                f"E_start {self.e_start} must exceed the proxy bound {self.e_min}")
        self.curriculum = init_curriculum(self.e_min, self.e_start, curriculum_cfg)
        self.action_table = discrete_action_table(hamiltonian.n_qubits)
        self.episode: EpisodeState | None = None
        self._rng = None

    def _empty_circuit_energy(self) -> float:
        circuit = Circuit(self.hamiltonian.n_qubits, 1)
        return hamiltonian_expectation(circuit.statevector(), self.hamiltonian)

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, rng) -> CircuitTensorState:
        """Start a fresh episode: draw the halting cap and clear the circuit.

        ``rng`` also drives this episode's action-independent randomness.
        """
        self._rng = rng
        cap = sample_episode_length(self.cfg.n_step, self.cfg.halt_p, rng)
        circuit = Circuit(self.hamiltonian.n_qubits, self.cfg.n_step)
        self.episode = EpisodeState(circuit=circuit, step=0, episode_cap=cap,
                                    e_prev=self.e_start, e_start=self.e_start,
                                    done=False)
        return circuit.encode()

    def masks(self) -> MaskBundle:
        return masks_for_circuit(self.episode.circuit)

    def vqe_objective(self, circuit: Circuit):
        hamiltonian = self.hamiltonian

        def objective(x):
            return hamiltonian_expectation(circuit.statevector(x), hamiltonian)

        return objective

    def step(self, action: HybridAction) -> StepOutcome:
        episode = self.episode
        if episode is None or episode.done:
            raise RuntimeError("call reset() before step()")
        circuit = episode.circuit
        if action.disc in circuit.illegal_actions():
            raise IllegalActionError(f"discrete action {action.disc} is illegal")

        # apply refine deltas to rotations placed at earlier steps
        clip = np.pi / 2
        by_step = circuit.param_index_by_step()
        for step_idx, param_idx in by_step.items():
            delta = float(action.deltas[step_idx])
            if delta != 0.0:
                circuit.add_to_parameter(param_idx, float(np.clip(delta, -clip, clip)))

        # place the new gate; rotations take the sampled init angle (0 when
        # the continuous pathway is disabled)
        template = self.action_table[action.disc]
        if template.is_rotation:
            angle = 0.0 if action.init_angle is None else float(action.init_angle)
            circuit.append(template.with_angle(angle))
        else:
            if action.init_angle is not None:
                raise ValueError("CNOT actions must not carry an init angle")
            circuit.append(template)

        t = episode.step + 1
        agent_energy = hamiltonian_expectation(circuit.statevector(),
                                               self.hamiltonian)
        terminal_step = t >= episode.episode_cap
        run_optimizer = self.cfg.use_external_optimizer and (
            self.cfg.optimize_every_step or terminal_step)
        if run_optimizer:
            result = minimize(self.vqe_objective(circuit),
                              circuit.parameter_vector(), self.cfg.optimizer,
                              rng=self._rng)
            e_t = float(result.best_value)
            optimizer_evals = result.n_evals
        else:
            e_t = agent_energy
            optimizer_evals = 0

        xi = self.curriculum.xi
        reward = compute_reward(e_t, episode.e_prev, episode.e_start,
                                self.e_min, xi, t, episode.episode_cap)
        self.curriculum = curriculum_update_step(self.curriculum, e_t)

        episode.step = t
        episode.e_prev = e_t
        done = e_t < xi or terminal_step
        if done:
            episode.done = True
            self.curriculum = curriculum_update_episode(self.curriculum,
                                                        episode_succeeded=e_t < xi)
        return StepOutcome(
            observation=circuit.encode(),
            reward=reward,
            done=done,
            energy=e_t,
            optimizer_evals=optimizer_evals,
            agent_energy=agent_energy,
        )
