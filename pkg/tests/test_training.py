import numpy as np
import pytest

from hyqas.environment import CurriculumConfig, EnvConfig
from hyqas.hamiltonian import load_bundled
from hyqas.optimizer import OptimizerConfig
from hyqas.policy import HybridPolicy, PolicyConfig
from hyqas.training import (
    TrainConfig,
    advantages,
    discount_factor,
    evaluate_policy,
    returns_to_go,
    rollout_circuit,
    train,
    variant_masks,
)


class TestDiscount:
    def test_two_step_recursion(self):
        # gamma_final 0.25 over T=2 forces gamma = 0.5
        np.testing.assert_allclose(returns_to_go([1.0, 1.0], 2, 0.25), [1.5, 1.0])

    def test_undiscounted_suffix_sums(self):
        np.testing.assert_allclose(returns_to_go([1.0, 2.0, 3.0], 3, 1.0),
                                   [6.0, 5.0, 3.0])

    def test_schedule_definition(self):
        g = discount_factor(0.9, 10)
        assert abs(float(g ** np.longdouble(10)) - 0.9) <= 1e-15

    def test_schedule_full_range(self):
        for gamma_final in (0.25, 0.5, 0.9, 0.99, 1.0):
            for T in range(1, 65):
                g = discount_factor(gamma_final, T)
                assert abs(float(g ** np.longdouble(T)) - gamma_final) <= 1e-15

    def test_validation(self):
        with pytest.raises(ValueError):
            discount_factor(0.0, 5)
        with pytest.raises(ValueError):
            discount_factor(1.5, 5)
        with pytest.raises(ValueError):
            returns_to_go([1.0] * 5, 3, 0.9)


class TestAdvantages:
    def test_constant_returns(self):
        np.testing.assert_array_equal(advantages([2.0, 2.0, 2.0]), np.zeros(3))

    def test_two_point_standardization(self):
        adv = advantages([0.0, 2.0])
        np.testing.assert_allclose(adv, [-1.0, 1.0], rtol=1e-7)

    def test_standardization_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            adv = advantages(rng.standard_normal(40) * 3 + 1)
            assert abs(adv.mean()) <= 1e-12
            assert 1 - 1e-6 <= adv.std() <= 1.0


class TestTrain:
    def _configs(self, episodes=16, **train_kw):
        cfg = TrainConfig(episodes_total=episodes, batch_size=4, seed=7,
                          **train_kw)
        env_cfg = EnvConfig(n_step=8, halt_p=0.1,
                            optimizer=OptimizerConfig(max_evals=60))
        policy_cfg = PolicyConfig(n_qubits=2, n_step=8, hidden=(32, 24),
                                  refine_hidden=12, embed_dim=4, history_dim=8)
        return cfg, env_cfg, policy_cfg

    def test_constant_reward_leaves_params_unchanged(self):
        # every episode: cap 1, threshold unreachable -> single -5 reward,
        # identical returns, zero advantages, beta 0 -> zero gradient
        h = load_bundled("toy-2q")
        cfg = TrainConfig(episodes_total=8, batch_size=8, entropy_beta=0.0,
                          seed=3)
        env_cfg = EnvConfig(n_step=4, halt_p=1e-9, use_external_optimizer=False)
        policy_cfg = PolicyConfig(n_qubits=2, n_step=4, hidden=(16, 12),
                                  refine_hidden=8, embed_dim=4, history_dim=6)
        curriculum = CurriculumConfig(xi1=0.001)  # xi < exact ground
        result = train(cfg, h, env_cfg, policy_cfg, curriculum)
        initial = HybridPolicy(policy_cfg).init_params(
            np.random.default_rng([cfg.seed, 0]))
        for name, tensor in result.final_params.items():
            np.testing.assert_array_equal(tensor, initial[name])
        assert all(row["reward_sum"] == -5.0 for row in result.log_rows)

    def test_training_is_reproducible(self):
        h = load_bundled("toy-2q")
        cfg, env_cfg, policy_cfg = self._configs()
        r1 = train(cfg, h, env_cfg, policy_cfg)
        r2 = train(cfg, h, env_cfg, policy_cfg)
        assert r1.log_rows == r2.log_rows  # exact float equality
        for name in r1.final_params:
            np.testing.assert_array_equal(r1.final_params[name],
                                          r2.final_params[name])

    def test_best_retention_matches_log(self):
        h = load_bundled("toy-2q")
        cfg, env_cfg, policy_cfg = self._configs(episodes=24)
        result = train(cfg, h, env_cfg, policy_cfg)
        errors = [row["error"] for row in result.log_rows]
        assert result.best_error == min(errors)
        assert result.log_rows[result.best_episode]["error"] == min(errors)

    def test_toy_training_reaches_tiny_error(self):
        h = load_bundled("toy-2q")
        cfg, env_cfg, policy_cfg = self._configs(episodes=40)
        result = train(cfg, h, env_cfg, policy_cfg)
        assert result.best_error <= 1e-4

    def test_log_rows_have_expected_columns(self):
        h = load_bundled("toy-2q")
        cfg, env_cfg, policy_cfg = self._configs(episodes=4)
        result = train(cfg, h, env_cfg, policy_cfg)
        expected = {"episode", "L", "steps", "reward_sum", "final_energy",
                    "best_energy", "error", "xi", "tau", "success", "params",
                    "depth", "gates", "optimizer_evals"}
        for row in result.log_rows:
            assert set(row) == expected
            assert row["error"] >= 0.0
            assert 1 <= row["L"] <= env_cfg.n_step


class TestVariants:
    def test_no_hybrid_masks(self):
        from hyqas.circuit import Circuit
        from hyqas.policy import masks_for_circuit

        masks = masks_for_circuit(Circuit(2, 4))
        nh = variant_masks(masks, "no_hybrid")
        assert not nh.param.any()
        assert not nh.delta.any()
        nr = variant_masks(masks, "no_refine")
        assert nr.param.any()
        assert not nr.delta.any()
        assert variant_masks(masks, "full") is masks
        with pytest.raises(ValueError):
            variant_masks(masks, "bogus")

    def test_no_hybrid_rollout_places_zero_angles(self):
        policy_cfg = PolicyConfig(n_qubits=2, n_step=6, hidden=(16, 12),
                                  refine_hidden=8, embed_dim=4, history_dim=6)
        policy = HybridPolicy(policy_cfg)
        rng = np.random.default_rng(5)
        params = policy.init_params(rng)
        for name in params:  # make continuous heads non-trivial
            params[name] = params[name] + 0.3 * rng.standard_normal(params[name].shape)
        circuit = rollout_circuit(policy, params, 6, 5,
                                  np.random.default_rng(6), variant="no_hybrid")
        assert np.all(circuit.parameter_vector() == 0.0)


class TestEvaluatePolicy:
    def _policy(self):
        policy_cfg = PolicyConfig(n_qubits=2, n_step=6, hidden=(16, 12),
                                  refine_hidden=8, embed_dim=4, history_dim=6)
        params = HybridPolicy(policy_cfg).init_params(np.random.default_rng(8))
        return policy_cfg, params

    def test_errors_nonnegative_and_metrics_consistent(self):
        policy_cfg, params = self._policy()
        h = load_bundled("toy-2q")
        records = evaluate_policy(params, policy_cfg, h, mode="warm",
                                  n_rollouts=5, env_cfg=EnvConfig(n_step=6),
                                  opt_cfg=OptimizerConfig(max_evals=100), seed=1)
        assert len(records) == 5
        for rec in records:
            assert rec.error >= 0.0
            assert rec.depth <= rec.gates
            assert rec.params <= rec.gates

    def test_zero_and_warm_build_identical_circuits(self):
        policy_cfg, params = self._policy()
        h = load_bundled("toy-2q")
        kw = dict(n_rollouts=4, env_cfg=EnvConfig(n_step=6),
                  opt_cfg=OptimizerConfig(max_evals=80), seed=2)
        warm = evaluate_policy(params, policy_cfg, h, mode="warm", **kw)
        zero = evaluate_policy(params, policy_cfg, h, mode="zero", **kw)
        for w, z in zip(warm, zero):
            assert (w.params, w.depth, w.gates) == (z.params, z.depth, z.gates)

    def test_no_rotations_means_modes_coincide(self):
        # under no_hybrid all rotation angles are zero, so the warm start IS
        # the zero start and both modes produce identical records
        policy_cfg, params = self._policy()
        h = load_bundled("toy-2q")
        kw = dict(n_rollouts=4, env_cfg=EnvConfig(n_step=6),
                  opt_cfg=OptimizerConfig(max_evals=80), seed=3,
                  variant="no_hybrid")
        warm = evaluate_policy(params, policy_cfg, h, mode="warm", **kw)
        zero = evaluate_policy(params, policy_cfg, h, mode="zero", **kw)
        assert warm == zero

    def test_greedy_rollout_deterministic(self):
        policy_cfg, params = self._policy()
        policy = HybridPolicy(policy_cfg)
        c1 = rollout_circuit(policy, params, 6, 4, np.random.default_rng(1),
                             greedy=True)
        c2 = rollout_circuit(policy, params, 6, 4, np.random.default_rng(999),
                             greedy=True)
        assert [g.spec for g in c1.gates] == [g.spec for g in c2.gates]

    def test_bad_mode_rejected(self):
        policy_cfg, params = self._policy()
        with pytest.raises(ValueError):
            evaluate_policy(params, policy_cfg, load_bundled("toy-2q"),
                            mode="warmish", n_rollouts=1)
