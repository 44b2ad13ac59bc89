import logging

import numpy as np
import pytest

from qrlfolio.agents import (ActorModel, AgentConfig, CriticModel, FiniteMDP, ReplayBuffer, Transition, act,
                             actor_objective, actor_update, buffer_push, buffer_sample, build_actor, build_critic,
                             classical_hidden_width, classical_parameter_count, compute_target, critic_loss,
                             critic_update, dqn_candidates, log_model_sizes, readout_vjp, tabular_q_learning,
                             value_iteration, weights_from_readout)
from qrlfolio.errors import ArgumentError, StateError
from qrlfolio.networks import MLP
from qrlfolio.optim import OptimizerState

STATE_DIM = 4
NUM_ASSETS = 2


def make_batch(count: int = 6, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(count):
        action = weights_from_readout(rng.uniform(0.1, 1.0, NUM_ASSETS))
        batch.append(Transition(rng.normal(size=STATE_DIM), action, float(rng.normal(0, 0.01)),
                                rng.normal(size=STATE_DIM)))
    return batch


def classical_pair(seed: int = 0) -> tuple:
    return (build_actor('classical', STATE_DIM, NUM_ASSETS, (seed, 0), hidden=(5,)),
            build_critic('classical', STATE_DIM, NUM_ASSETS, (seed, 1), hidden=(5,)))


class TestReplay:

    def test_transition_checks_action(self) -> None:
        with pytest.raises(ArgumentError):
            Transition(np.zeros(2), np.array([0.5, 0.6]), 0.0, np.zeros(2))

    def test_sampling(self) -> None:
        buffer = ReplayBuffer()
        with pytest.raises(StateError):
            buffer.sample(4, seed=0)
        for item in make_batch(10):
            buffer.push(item)
        first = buffer.sample(32, seed=(3, 1))
        second = buffer.sample(32, seed=(3, 1))
        assert len(first) == 32
        assert all(a is b for a, b in zip(first, second))
        assert len(buffer) == 10

    def test_single_item_is_drawn_repeatedly(self) -> None:
        buffer = ReplayBuffer()
        item = make_batch(1)[0]
        buffer_push(buffer, item)
        drawn = buffer_sample(buffer, 4, seed=7)
        assert len(drawn) == 4 and all(each is item for each in drawn)


class TestReadout:

    def test_normalisation(self) -> None:
        np.testing.assert_allclose(weights_from_readout([0.6, -0.2]), [1.5, -0.5], atol=1e-15)
        np.testing.assert_allclose(weights_from_readout([-0.3, -0.1]), [0.75, 0.25])

    def test_guard(self) -> None:
        np.testing.assert_array_equal(weights_from_readout([0.03, -0.01, 0.0]), np.full(3, 1 / 3))

    def test_vjp_matches_finite_differences(self) -> None:
        rng = np.random.default_rng(1)
        readouts = rng.uniform(0.1, 1.0, size=(3, 3))
        upstream = rng.normal(size=(3, 3))
        grads = readout_vjp(readouts, upstream)
        for row in range(3):
            for column in range(3):
                shifted = readouts[row].copy()
                shifted[column] += 1e-7
                forward = upstream[row] @ weights_from_readout(shifted)
                shifted[column] -= 2e-7
                backward = upstream[row] @ weights_from_readout(shifted)
                assert grads[row, column] == pytest.approx((forward - backward) / 2e-7, abs=1e-6)

    def test_vjp_guard_rows(self) -> None:
        grads = readout_vjp(np.array([[0.01, 0.01]]), np.ones((1, 2)))
        np.testing.assert_array_equal(grads, 0.0)

    def test_act(self) -> None:
        actor, _ = classical_pair()
        state = np.linspace(-1, 1, STATE_DIM)
        np.testing.assert_array_equal(act(actor, state, 0.0, seed=0), actor.weights(state)[0])
        noisy = act(actor, state, 0.05, seed=(0, 4))
        assert noisy.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(noisy, act(actor, state, 0.05, seed=(0, 4)))
        with pytest.raises(ArgumentError):
            act(actor, np.zeros(STATE_DIM + 1), 0.0, seed=0)


class TestTargets:

    def test_zero_discount_returns_rewards(self) -> None:
        actor, critic = classical_pair()
        batch = make_batch()
        targets = compute_target('ddpg', batch, actor, critic, AgentConfig(gamma=0.0), seed=0)
        np.testing.assert_array_equal(targets, [item.reward for item in batch])

    def test_ddpg_target(self) -> None:
        actor, critic = classical_pair()
        batch = make_batch()
        next_states = np.array([item.next_state for item in batch])
        expected = np.array([item.reward for item in batch]) \
            + 0.5 * critic.q(next_states, actor.weights(next_states))
        targets = compute_target('ddpg', batch, actor, critic, AgentConfig(gamma=0.5), seed=0)
        np.testing.assert_allclose(targets, expected)

    def test_dqn_target_dominates_ddpg(self) -> None:
        actor, critic = classical_pair(3)
        batch = make_batch(seed=3)
        ddpg = compute_target('ddpg', batch, actor, critic, AgentConfig(gamma=0.5), seed=0)
        single = compute_target('dqn', batch, actor, critic, AgentConfig(algorithm='dqn', gamma=0.5, dqn_samples=1),
                                seed=0)
        many = compute_target('dqn', batch, actor, critic, AgentConfig(algorithm='dqn', gamma=0.5, dqn_samples=10),
                              seed=0)
        np.testing.assert_allclose(single, ddpg)
        assert np.all(many >= ddpg - 1e-15)

    def test_dqn_zero_discount_returns_rewards(self) -> None:
        actor, critic = classical_pair()
        batch = make_batch()
        cfg = AgentConfig(algorithm='dqn', gamma=0.0, dqn_samples=5)
        np.testing.assert_array_equal(compute_target('dqn', batch, actor, critic, cfg, seed=0),
                                      [item.reward for item in batch])

    def test_dqn_with_constant_critic(self) -> None:
        actor, _ = classical_pair()
        critic = CriticModel(MLP([STATE_DIM + NUM_ASSETS, 1], [0.0] * (STATE_DIM + NUM_ASSETS) + [0.3]), STATE_DIM)
        batch = make_batch()
        cfg = AgentConfig(algorithm='dqn', gamma=0.9, dqn_samples=7)
        np.testing.assert_allclose(compute_target('dqn', batch, actor, critic, cfg, seed=1),
                                   [item.reward + 0.9 * 0.3 for item in batch], atol=1e-15)

    def test_candidates_are_nested(self) -> None:
        actor, _ = classical_pair()
        next_states = np.array([item.next_state for item in make_batch()])
        few = dqn_candidates(actor, next_states, 3, seed=(2, 2))
        more = dqn_candidates(actor, next_states, 6, seed=(2, 2))
        for small, large in zip(few[:-1], more):
            np.testing.assert_array_equal(small, large)
        for candidate in more:
            np.testing.assert_allclose(candidate.sum(axis=1), 1.0)

    def test_unknown_kind(self) -> None:
        actor, critic = classical_pair()
        with pytest.raises(ArgumentError):
            compute_target('sarsa', make_batch(), actor, critic, AgentConfig(), seed=0)  # type: ignore[arg-type]

    def test_value_iteration_is_a_bellman_fixed_point(self) -> None:
        mdp = FiniteMDP([[1, 0], [2, 0], [2, 1]], [[0.0, 0.1], [0.0, -0.2], [1.0, 0.0]])
        table = value_iteration(mdp, 0.9)
        np.testing.assert_allclose(table, mdp.rewards + 0.9 * table.max(axis=1)[mdp.transitions], atol=1e-10)

    def test_tabular_q_learning_matches_oracle(self) -> None:
        mdp = FiniteMDP([[1, 0], [2, 0], [2, 1]], [[0.0, 0.1], [0.0, -0.2], [1.0, 0.0]])
        learned = tabular_q_learning(mdp, alpha=0.5, gamma=0.5, epsilon=0.3, episodes=3000, seed=5)
        np.testing.assert_allclose(learned, value_iteration(mdp, 0.5), atol=1e-3)

    def test_tabular_two_state_convergence(self) -> None:
        mdp = FiniteMDP([[0, 1], [1, 0]], [[0.0, 1.0], [0.5, 0.0]])
        learned = tabular_q_learning(mdp, alpha=0.5, gamma=0.9, epsilon=0.3, episodes=10000, seed=9)
        np.testing.assert_allclose(learned, value_iteration(mdp, 0.9), atol=1e-3)

    def test_tabular_zero_discount_learns_rewards(self) -> None:
        mdp = FiniteMDP([[1, 0], [2, 0], [2, 1]], [[0.0, 0.1], [0.0, -0.2], [1.0, 0.0]])
        learned = tabular_q_learning(mdp, alpha=1.0, gamma=0.0, epsilon=1.0, episodes=200, seed=2)
        np.testing.assert_array_equal(learned, mdp.rewards)

    def test_greedy_learning_keeps_the_optimum(self) -> None:
        mdp = FiniteMDP([[1, 0], [2, 0], [2, 1]], [[0.0, 0.1], [0.0, -0.2], [1.0, 0.0]])
        optimum = value_iteration(mdp, 0.9)
        learned = tabular_q_learning(mdp, alpha=0.5, gamma=0.9, epsilon=0.0, episodes=100, seed=3, initial=optimum)
        np.testing.assert_allclose(learned, optimum, atol=1e-9)


class TestUpdates:

    def test_critic_update_reduces_loss(self) -> None:
        _, critic = classical_pair()
        batch = make_batch(8)
        targets = np.linspace(-0.5, 0.5, 8)
        opt = OptimizerState('adam', critic.network.num_parameters, 0.01)
        first = critic_update(critic, batch, targets, opt)
        for _ in range(300):
            last = critic_update(critic, batch, targets, opt)
        assert last < first
        assert critic_loss(critic, batch, targets) < first

    def test_critic_update_reports_loss_before_step(self) -> None:
        _, critic = classical_pair()
        batch = make_batch(8)
        targets = np.zeros(8)
        before = critic_loss(critic, batch, targets, l2=1e-3)
        opt = OptimizerState('sgd', critic.network.num_parameters, 0.01, l2=1e-3)
        assert critic_update(critic, batch, targets, opt) == pytest.approx(before)
        with pytest.raises(ArgumentError):
            critic_update(critic, batch, np.zeros(3), opt)

    def test_actor_update_ascends(self) -> None:
        actor, _ = classical_pair()
        # linear critic preferring asset 0
        critic = CriticModel(MLP([STATE_DIM + NUM_ASSETS, 1], [0, 0, 0, 0, 1.0, -1.0, 0.0]), STATE_DIM)
        states = np.random.default_rng(6).normal(size=(8, STATE_DIM))
        opt = OptimizerState('sgd', actor.network.num_parameters, 0.01)
        before = actor_objective(actor, critic, states)
        assert actor_update(actor, critic, states, opt) == pytest.approx(before)
        for _ in range(20):
            actor_update(actor, critic, states, opt)
        assert actor_objective(actor, critic, states) > before

    def test_quantum_critic_step_follows_the_loss_gradient(self) -> None:
        critic = build_critic('quantum', STATE_DIM, NUM_ASSETS, 3, layers=2)
        batch = make_batch(5, seed=4)
        targets = np.linspace(-0.3, 0.3, 5)
        before = critic.network.params.copy()
        expected = np.empty_like(before)
        for index in range(before.shape[0]):
            shifted = before.copy()
            shifted[index] += 1e-5
            critic.network.set_params(shifted)
            forward = critic_loss(critic, batch, targets)
            shifted[index] -= 2e-5
            critic.network.set_params(shifted)
            expected[index] = (forward - critic_loss(critic, batch, targets)) / 2e-5
        critic.network.set_params(before)
        critic_update(critic, batch, targets, OptimizerState('sgd', before.shape[0], 1e-3))
        np.testing.assert_allclose((before - critic.network.params) / 1e-3, expected, atol=1e-7)

    def test_quantum_actor_angles_move_uphill(self) -> None:
        actor = build_actor('quantum', 2, 2, 5, layers=1)
        # qubit 2 carries no readout, so only the first two angles matter
        actor.network.set_params([-0.5, 0.3, 0.2])
        # linear critic preferring asset 0
        critic = CriticModel(MLP([4, 1], [0, 0, 1.0, -1.0, 0.0]), 2)
        states = np.array([[0.3, -0.1], [1.0, 0.4], [-0.2, 0.6]])
        before = actor.network.params.copy()
        slopes = np.empty_like(before)
        for index in range(before.shape[0]):
            shifted = before.copy()
            shifted[index] += 1e-5
            actor.network.set_params(shifted)
            forward = actor_objective(actor, critic, states)
            shifted[index] -= 2e-5
            actor.network.set_params(shifted)
            slopes[index] = (forward - actor_objective(actor, critic, states)) / 2e-5
        actor.network.set_params(before)
        live = np.abs(slopes) > 1e-6
        assert live.tolist() == [True, True, False]
        actor_update(actor, critic, states, OptimizerState('sgd', before.shape[0], 1e-3))
        step = actor.network.params - before
        np.testing.assert_array_equal(np.sign(step[live]), np.sign(slopes[live]))
        np.testing.assert_allclose(step / 1e-3, slopes, atol=1e-7)


class TestFactories:

    def test_classical_sizing(self) -> None:
        assert classical_hidden_width(13500, 555, 15) == 12
        assert classical_parameter_count(555, 15, (12,)) == 12 * (2 * 555 + 2 * 15 + 3) + 15 + 1
        actor = build_actor('classical', 555, 15, 0, hidden=(12,))
        critic = build_critic('classical', 555, 15, 1, hidden=(12,))
        assert actor.network.num_parameters + critic.network.num_parameters == classical_parameter_count(
            555, 15, (12,))

    def test_classical_actor_starts_at_equal_weights_bias(self) -> None:
        actor = build_actor('classical', STATE_DIM, NUM_ASSETS, 0)
        np.testing.assert_array_equal(actor.network.layers()[-1][1], np.full(NUM_ASSETS, 0.5))

    def test_quantum_widths(self) -> None:
        actor = build_actor('quantum', 14, 2, 0, layers=5)
        critic = build_critic('quantum', 14, 2, 1, layers=5)
        assert actor.network.ansatz.num_qubits == 6
        assert actor.network.num_parameters == 30
        assert critic.network.ansatz.num_qubits == 6
        assert critic.state_dim == 14 and critic.num_assets == 2
        wide = build_actor('quantum', 14, 2, 0, layers=2, qubits=8)
        assert wide.network.ansatz.num_qubits == 8

    def test_quantum_actor_has_a_readout_per_asset(self) -> None:
        actor = build_actor('quantum', 2, 5, 0, layers=1)
        assert actor.network.ansatz.num_qubits == 5
        assert actor.weights(np.ones((1, 2))).shape == (1, 5)

    def test_unknown_kind(self) -> None:
        with pytest.raises(ArgumentError):
            build_actor('analog', 3, 2, 0)  # type: ignore[arg-type]
        with pytest.raises(ArgumentError):
            build_critic('analog', 3, 2, 0)  # type: ignore[arg-type]

    def test_critic_needs_room_for_action(self) -> None:
        with pytest.raises(ArgumentError):
            CriticModel(MLP([3, 1]), 3)

    def test_serialised_models_agree(self) -> None:
        actor = build_actor('quantum', 3, 2, 4, layers=2)
        state = np.array([[0.1, 0.5, -0.2]])
        np.testing.assert_array_equal(ActorModel.from_dict(actor.to_dict()).weights(state), actor.weights(state))

    def test_size_log(self, caplog: pytest.LogCaptureFixture) -> None:
        actor, critic = classical_pair()
        with caplog.at_level(logging.INFO, logger='qrlfolio'):
            log_model_sizes(actor, critic)
        assert 'classical actor with %d parameters' % actor.network.num_parameters in caplog.text
