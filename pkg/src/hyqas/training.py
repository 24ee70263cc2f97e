"""REINFORCE training loop: batched trajectory collection, discounted
returns under an episode-length-normalized discount, mean-normalized
advantages, entropy-regularized gradient steps, and best-policy retention.

Discount schedule: gamma = gamma_final**(1/T) per episode, where T is that
episode's sampled cap, so gamma**T == gamma_final for every episode length.
The root is computed in extended precision because a float64 root of a
float64 power cannot always represent the relation to 1e-15.

Reproducibility: every episode draws its randomness from a generator seeded
by (seed, episode index), and the update is an ordered reduction over the
batch, so results are independent of how collection is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .circuit import Circuit, discrete_action_table
from .environment import (
    CurriculumConfig,
    EnvConfig,
    VqeEnvironment,
    sample_episode_length,
)
from .hamiltonian import Hamiltonian
from .optimizer import OptimizerConfig, minimize
from .policy import HybridAction, HybridPolicy, MaskBundle, PolicyConfig, masks_for_circuit
from .quantum import exact_ground_energy, hamiltonian_expectation

VARIANTS = ("full", "no_hybrid", "no_refine")


def discount_factor(gamma_final: float, T: int) -> np.longdouble:
    """Per-step discount whose T-th power recovers gamma_final."""
    if not 0.0 < gamma_final <= 1.0:
        raise ValueError(f"gamma_final must be in (0, 1], got {gamma_final}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return np.power(np.longdouble(gamma_final), 1.0 / np.longdouble(T))


def returns_to_go(rewards, T: int, gamma_final: float) -> np.ndarray:
    """Discounted suffix sums R_t = r_t + gamma * R_{t+1}."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size > T:
        raise ValueError(f"{rewards.size} rewards exceed episode cap T={T}")
    gamma = float(discount_factor(gamma_final, T))
    out = np.zeros_like(rewards)
    acc = 0.0
    for i in range(rewards.size - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def advantages(returns) -> np.ndarray:
    """Mean-normalized baseline over all steps in the batch."""
    returns = np.asarray(returns, dtype=float)
    if returns.size == 0:
        raise ValueError("empty batch")
    return (returns - returns.mean()) / (returns.std() + 1e-8)


@dataclass(frozen=True)
class TrainConfig:
    episodes_total: int = 300
    batch_size: int = 8  # trajectories per policy update
    learning_rate: float = 3e-4
    gamma_final: float = 0.9
    entropy_beta: float = 0.01
    seed: int = 0
    grad_clip: float = 5.0  # global gradient norm
    checkpoint_every: int = 0  # 0 disables periodic checkpoints
    retain_best: bool = True

    def __post_init__(self):
        if self.episodes_total < 1 or self.batch_size < 1:
            raise ValueError("episodes_total and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.gamma_final <= 1.0:
            raise ValueError("gamma_final must be in (0, 1]")
        if self.entropy_beta < 0:
            raise ValueError("entropy_beta must be >= 0")


@dataclass
class TrajectoryStep:
    state: object
    action: HybridAction
    masks: MaskBundle
    reward: float


@dataclass
class Trajectory:
    steps: list
    episode_cap: int
    final_energy: float
    best_energy: float
    success: bool
    metrics: tuple
    optimizer_evals: int

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps])


@dataclass
class TrainResult:
    final_params: dict
    best_params: dict
    best_error: float
    best_episode: int
    log_rows: list
    policy_cfg: PolicyConfig
    curriculum: object
    aborted: bool = False


def variant_masks(masks: MaskBundle, variant: str) -> MaskBundle:
    """Ablation hook: disabling a continuous pathway is a mask transform, so
    sampling, log-probs and gradients all stay consistent automatically."""
    if variant == "full":
        return masks
    if variant == "no_refine":
        return replace(masks, delta=np.zeros_like(masks.delta))
    if variant == "no_hybrid":
        return replace(masks, param=np.zeros_like(masks.param),
                       delta=np.zeros_like(masks.delta))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def episode_rng(seed: int, episode: int):
    return np.random.default_rng([seed, 1, episode])


def collect_episode(env: VqeEnvironment, policy: HybridPolicy, params: dict,
                    rng, variant: str = "full") -> Trajectory:
    obs = env.reset(rng)
    steps = []
    energies = []
    total_evals = 0
    done = False
    while not done:
        masks = variant_masks(env.masks(), variant)
        _, action, _ = policy.act(params, obs, masks, rng)
        outcome = env.step(action)
        steps.append(TrajectoryStep(state=obs, action=action, masks=masks,
                                    reward=outcome.reward))
        energies.append(outcome.energy)
        total_evals += outcome.optimizer_evals
        obs = outcome.observation
        done = outcome.done
    episode = env.episode
    return Trajectory(
        steps=steps,
        episode_cap=episode.episode_cap,
        final_energy=energies[-1],
        best_energy=min(energies),
        success=energies[-1] < env.curriculum.xi,
        metrics=tuple(episode.circuit.metrics()),
        optimizer_evals=total_evals,
    )


def _global_norm_clip(grads: dict, clip: float) -> dict:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if clip > 0 and norm > clip:
        scale = clip / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


def _apply_update(params: dict, grads: dict, lr: float) -> dict:
    return {k: params[k] - lr * grads[k] for k in params}


def train(cfg: TrainConfig, hamiltonian: Hamiltonian,
          env_cfg: EnvConfig | None = None,
          policy_cfg: PolicyConfig | None = None,
          curriculum_cfg: CurriculumConfig | None = None,
          variant: str = "full",
          checkpoint_dir=None,
          progress=None) -> TrainResult:
    """Run the full training loop; a pure function of (configs, fixture).

    ``progress``, if given, is called with each episode's log row (for
    console reporting; rows never contain wall-clock data so logs replay
    bit-identically).
    """
    env_cfg = env_cfg or EnvConfig()
    policy_cfg = policy_cfg or PolicyConfig(n_qubits=hamiltonian.n_qubits,
                                            n_step=env_cfg.n_step)
    if policy_cfg.n_step != env_cfg.n_step:
        raise ValueError("policy and environment n_step must agree")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")

    env = VqeEnvironment(hamiltonian, env_cfg, curriculum_cfg)
    policy = HybridPolicy(policy_cfg)
    params = policy.init_params(np.random.default_rng([cfg.seed, 0]))
    e_exact = hamiltonian.exact_ground_energy
    if e_exact is None:
        e_exact = exact_ground_energy(hamiltonian)

    best_params = params
    best_error = float("inf")
    best_episode = -1
    log_rows = []
    batch_traj = []
    aborted = False

    for episode in range(cfg.episodes_total):
        rng = episode_rng(cfg.seed, episode)
        trajectory = collect_episode(env, policy, params, rng, variant)
        error = abs(trajectory.best_energy - e_exact)
        if cfg.retain_best and error < best_error:
            best_error = error
            best_episode = episode
            best_params = params
        metrics = trajectory.metrics
        row = {
            "episode": episode,
            "L": trajectory.episode_cap,
            "steps": len(trajectory.steps),
            "reward_sum": float(trajectory.rewards().sum()),
            "final_energy": trajectory.final_energy,
            "best_energy": trajectory.best_energy,
            "error": error,
            "xi": env.curriculum.xi,
            "tau": env.curriculum.tau,
            "success": trajectory.success,
            "params": metrics[0],
            "depth": metrics[1],
            "gates": metrics[2],
            "optimizer_evals": trajectory.optimizer_evals,
        }
        log_rows.append(row)
        if progress is not None:
            progress(row)

        batch_traj.append(trajectory)
        if len(batch_traj) == cfg.batch_size or episode == cfg.episodes_total - 1:
            returns = np.concatenate([
                returns_to_go(t.rewards(), t.episode_cap, cfg.gamma_final)
                for t in batch_traj])
            advs = advantages(returns)
            batch = []
            k = 0
            for t in batch_traj:
                for step in t.steps:
                    batch.append((step.state, step.action, step.masks,
                                  float(advs[k])))
                    k += 1
            try:
                _, grads = policy.gradients(params, batch, cfg.entropy_beta)
            except FloatingPointError:
                aborted = True  # keep the last good parameters
                break
            grads = _global_norm_clip(grads, cfg.grad_clip)
            params = _apply_update(params, grads, cfg.learning_rate)
            batch_traj = []

        if (checkpoint_dir is not None and cfg.checkpoint_every > 0
                and (episode + 1) % cfg.checkpoint_every == 0):
            from .policy import save_checkpoint

            save_checkpoint(
                f"{checkpoint_dir}/checkpoint_ep{episode + 1:06d}.ckpt",
                params, policy_cfg,
                extra={"episode": episode + 1, "seed": cfg.seed},
            )

    return TrainResult(
        final_params=params,
        best_params=best_params if cfg.retain_best else params,
        best_error=best_error,
        best_episode=best_episode,
        log_rows=log_rows,
        policy_cfg=policy_cfg,
        curriculum=env.curriculum,
        aborted=aborted,
    )


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class EvalRecord:
    rollout: int
    error: float
    params: int
    depth: int
    gates: int
    optimizer_evals: int
    energy: float


def rollout_circuit(policy: HybridPolicy, params: dict, n_step: int, cap: int,
                    rng, variant: str = "full", greedy: bool = False) -> Circuit:
    """Build a circuit with the frozen policy, no optimizer in the loop."""
    cfg = policy.cfg
    table = discrete_action_table(cfg.n_qubits)
    circuit = Circuit(cfg.n_qubits, n_step)
    clip = cfg.delta_clip
    for _ in range(cap):
        obs = circuit.encode()
        masks = variant_masks(masks_for_circuit(circuit), variant)
        if greedy:
            action = _greedy_action(policy, params, obs, masks)
        else:
            _, action, _ = policy.act(params, obs, masks, rng)
        by_step = circuit.param_index_by_step()
        for step_idx, param_idx in by_step.items():
            delta = float(action.deltas[step_idx])
            if delta != 0.0:
                circuit.add_to_parameter(param_idx,
                                         float(np.clip(delta, -clip, clip)))
        template = table[action.disc]
        if template.is_rotation:
            angle = 0.0 if action.init_angle is None else float(action.init_angle)
            circuit.append(template.with_angle(angle))
        else:
            circuit.append(template)
    return circuit


def _greedy_action(policy, params, obs, masks) -> HybridAction:
    pre = policy.forward(params, obs, None)
    z = pre.logits + (1.0 - masks.illegal) * policy.cfg.mask_penalty
    disc = int(np.argmax(z))
    heads = policy.forward(params, obs, disc)
    init_angle = float(heads.init_mu[disc]) if masks.param[disc] == 1.0 else None
    deltas = heads.delta_mu * masks.delta
    return HybridAction(disc=disc, init_angle=init_angle, deltas=deltas)


def evaluate_policy(params: dict, policy_cfg: PolicyConfig,
                    hamiltonian: Hamiltonian, mode: str = "warm",
                    n_rollouts: int = 100,
                    opt_cfg: OptimizerConfig | None = None,
                    env_cfg: EnvConfig | None = None, seed: int = 0,
                    variant: str = "full", greedy: bool = False,
                    use_optimizer: bool = True, map_fn=map) -> list:
    """Frozen-policy evaluation: build circuits, then run the external
    optimizer once per circuit from either the agent angles (``warm``) or
    all-zero angles (``zero``).

    With ``use_optimizer=False`` the start point is scored directly (the
    no-external-optimizer ablation). ``map_fn`` lets callers fan rollouts
    out across workers; each rollout derives its generator from (seed,
    rollout index), so scheduling never changes results.
    """
    if mode not in ("warm", "zero"):
        raise ValueError(f"mode must be 'warm' or 'zero', got {mode!r}")
    env_cfg = env_cfg or EnvConfig()
    opt_cfg = opt_cfg or OptimizerConfig(max_evals=1000)
    policy = HybridPolicy(policy_cfg)
    e_exact = hamiltonian.exact_ground_energy
    if e_exact is None:
        e_exact = exact_ground_energy(hamiltonian)

    def run_one(i: int) -> EvalRecord:
        rng = np.random.default_rng([seed, 2, i])
        cap = sample_episode_length(env_cfg.n_step, env_cfg.halt_p, rng)
        circuit = rollout_circuit(policy, params, env_cfg.n_step, cap, rng,
                                  variant=variant, greedy=greedy)
        x0 = (np.zeros(circuit.n_parameters) if mode == "zero"
              else circuit.parameter_vector())

        def objective(x):
            return hamiltonian_expectation(circuit.statevector(x), hamiltonian)

        if use_optimizer:
            result = minimize(objective, x0, opt_cfg)
            energy, n_evals = float(result.best_value), result.n_evals
        else:
            energy, n_evals = float(objective(x0)), 0
        metrics = circuit.metrics()
        return EvalRecord(
            rollout=i,
            error=abs(energy - e_exact),
            params=metrics.params,
            depth=metrics.depth,
            gates=metrics.gates,
            optimizer_evals=n_evals,
            energy=energy,
        )

    return list(map_fn(run_one, range(n_rollouts)))
