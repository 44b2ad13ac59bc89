# -*- coding: utf-8 -*-
"""Actor-critic agents for portfolio allocation.

DDPG and sampled-max DQN share one actor (state to readouts, readouts to
weights through :func:`weights_from_readout`), one critic (state and action
to a scalar) and one set of update rules; they differ only in how
:func:`compute_target` bootstraps the next-state value. Either model may be a
variational circuit or a classical MLP.

Tabular Q-learning on a small :class:`FiniteMDP` is kept alongside as the
reference for the Bellman target logic, with :func:`value_iteration` as its
closed-form oracle.

"""

import dataclasses
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from typing_extensions import Literal

from .encoding import required_qubits
from .errors import ArgumentError, StateError
from .networks import MLP, Network, QuantumNetwork, network_from_dict
from .optim import OptimizerState, optimizer_step
from .utils import Seed, as_matrix, as_vector, make_generator, spawn_seed
from .vqc import EntanglerPattern, ObservableSet, build_ansatz

__all__ = ['ModelKind', 'TargetKind', 'Transition', 'ReplayBuffer', 'AgentConfig', 'ActorModel', 'CriticModel',
           'weights_from_readout', 'readout_vjp', 'act', 'buffer_push', 'buffer_sample', 'compute_target',
           'critic_update', 'actor_update', 'critic_loss', 'actor_objective', 'dqn_candidates',
           'FiniteMDP', 'tabular_q_learning', 'value_iteration', 'classical_parameter_count',
           'classical_hidden_width', 'build_actor', 'build_critic', 'log_model_sizes',
           'READOUT_GUARD', 'ACTION_TOLERANCE']

logger = logging.getLogger(__name__)

ModelKind = Literal['quantum', 'classical']
TargetKind = Literal['ddpg', 'dqn']

#: Readout sums closer to zero than this fall back to equal weights.
READOUT_GUARD = 0.05

#: Allowed deviation of an action's weight sum from one.
ACTION_TOLERANCE = 1e-9

###############################################################################
# Typings


@dataclasses.dataclass(frozen=True)
class Transition:
    """One ``(s, a, r, s')`` experience."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray

    def __post_init__(self) -> None:
        action = as_vector(self.action, 'action')
        if abs(action.sum() - 1.0) > ACTION_TOLERANCE:
            raise ArgumentError('action weights sum to %.12g, not 1' % action.sum())
        object.__setattr__(self, 'state', as_vector(self.state, 'state'))
        object.__setattr__(self, 'action', action)
        object.__setattr__(self, 'next_state', as_vector(self.next_state, 'next state'))
        object.__setattr__(self, 'reward', float(self.reward))


class ReplayBuffer:
    """Unbounded experience store with uniform sampling with replacement."""

    def __init__(self) -> None:
        self._items = []  # type: List[Transition]

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, count: int, seed: Seed) -> List[Transition]:
        if not self._items:
            raise StateError('cannot sample from an empty replay buffer')
        if count < 1:
            raise ArgumentError('sample size must be positive, got %d' % count)
        picks = make_generator(seed).integers(0, len(self._items), size=count)
        return [self._items[index] for index in picks]

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Transition:
        return self._items[index]


@dataclasses.dataclass(frozen=True)
class AgentConfig:
    """Learning hyperparameters shared by DDPG and DQN.

    Attributes:
        algorithm: target rule, ``ddpg`` or ``dqn``
        gamma: discount factor
        tau: soft-update coefficient
        sigma_start: exploration noise at the first epoch
        sigma_end: exploration noise at the last epoch
        dqn_samples: candidate next actions per transition (DQN)
        batch_size: minibatch size
        actor_lr: actor learning rate
        critic_lr: critic learning rate
        l2: L2 coefficient for both models
        optimizer: ``adam`` or ``sgd``

    """

    algorithm: TargetKind = 'ddpg'
    gamma: float = 0.01
    tau: float = 0.005
    sigma_start: float = 0.05
    sigma_end: float = 0.005
    dqn_samples: int = 10
    batch_size: int = 32
    actor_lr: float = 0.01
    critic_lr: float = 0.01
    l2: float = 1e-4
    optimizer: str = 'adam'

    def __post_init__(self) -> None:
        if self.algorithm not in ('ddpg', 'dqn'):
            raise ArgumentError('unknown algorithm %r' % (self.algorithm,))
        if not 0.0 <= self.gamma <= 1.0:
            raise ArgumentError('discount must lie in [0, 1], got %r' % self.gamma)
        if not 0.0 <= self.tau <= 1.0:
            raise ArgumentError('soft-update coefficient must lie in [0, 1], got %r' % self.tau)
        if self.sigma_start < 0 or self.sigma_end < 0:
            raise ArgumentError('exploration noise must be non-negative')
        if self.dqn_samples < 1 or self.batch_size < 1:
            raise ArgumentError('sample counts must be positive')
        if self.actor_lr <= 0 or self.critic_lr <= 0 or self.l2 < 0:
            raise ArgumentError('learning rates must be positive and l2 non-negative')


class ActorModel:
    """Policy ``mu(s)``: readouts from the network, weights from the readouts.

    Args:
        network (Network): maps ``state_dim`` inputs to ``num_assets`` readouts

    """

    def __init__(self, network: Network) -> None:
        self.network = network
        self.kind = 'quantum' if isinstance(network, QuantumNetwork) else 'classical'  # type: ModelKind
        self.state_dim = network.input_dim
        self.num_assets = network.output_dim

    def readouts(self, states: object) -> np.ndarray:
        return self.network.forward(states)

    def weights(self, states: object) -> np.ndarray:
        """Allocations of shape ``(B, N)``, each row summing to one."""
        return np.array([weights_from_readout(row) for row in self.readouts(states)])

    def to_dict(self) -> Dict[str, Any]:
        return self.network.to_dict()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ActorModel':
        return cls(network_from_dict(data))

    def copy(self) -> 'ActorModel':
        return ActorModel(self.network.copy())


class CriticModel:
    """Action value ``Q(s, a)`` on the concatenated input ``[s, a]``.

    Args:
        network (Network): maps ``state_dim + num_assets`` inputs to one output
        state_dim (int): width of the state part of the input

    """

    def __init__(self, network: Network, state_dim: int) -> None:
        if network.output_dim != 1:
            raise ArgumentError('a critic has a single output, got %d' % network.output_dim)
        if not 0 < state_dim < network.input_dim:
            raise ArgumentError('state width %d does not leave room for an action' % state_dim)
        self.network = network
        self.kind = 'quantum' if isinstance(network, QuantumNetwork) else 'classical'  # type: ModelKind
        self.state_dim = state_dim
        self.num_assets = network.input_dim - state_dim

    def inputs(self, states: object, actions: object) -> np.ndarray:
        states = as_matrix(states, 'states')
        actions = as_matrix(actions, 'actions')
        if states.shape[0] != actions.shape[0]:
            raise ArgumentError('%d states but %d actions' % (states.shape[0], actions.shape[0]))
        return np.concatenate([states, actions], axis=1)

    def q(self, states: object, actions: object) -> np.ndarray:
        return self.network.forward(self.inputs(states, actions))[:, 0]

    def action_gradient(self, states: object, actions: object) -> np.ndarray:
        """``dQ/da`` per row; analytic for MLPs, central differences for circuits."""
        inputs = self.inputs(states, actions)
        return self.network.input_vjp(inputs, np.ones((inputs.shape[0], 1)), start=self.state_dim)

    def to_dict(self) -> Dict[str, Any]:
        data = self.network.to_dict()
        data['state_dim'] = self.state_dim
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CriticModel':
        return cls(network_from_dict(data), int(data['state_dim']))

    def copy(self) -> 'CriticModel':
        return CriticModel(self.network.copy(), self.state_dim)


###############################################################################
# Readout & Actions


def weights_from_readout(readout: object) -> np.ndarray:
    """Normalise readouts by their signed sum; short positions are kept.

    A sum closer to zero than :data:`READOUT_GUARD` yields equal weights.

    >>> weights_from_readout([0.5, 0.3, 0.2])
    array([0.5, 0.3, 0.2])
    >>> weights_from_readout([0.02, -0.01])
    array([0.5, 0.5])

    """
    values = as_vector(readout, 'readout')
    if values.shape[0] < 1:
        raise ArgumentError('need at least one readout')
    total = values.sum()
    if abs(total) < READOUT_GUARD:
        return np.full(values.shape[0], 1.0 / values.shape[0])
    return values / total


def readout_vjp(readouts: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull ``d/dw`` back through :func:`weights_from_readout` row by row.

    With ``S = sum(z)`` the Jacobian is ``dw_i/dz_k = delta_ik / S - z_i / S**2``;
    rows in the guard branch have zero gradient.

    """
    totals = readouts.sum(axis=1, keepdims=True)
    live = np.abs(totals) >= READOUT_GUARD
    safe = np.where(live, totals, 1.0)
    grads = upstream / safe - np.sum(upstream * readouts, axis=1, keepdims=True) / safe ** 2
    return np.where(live, grads, 0.0)


def act(actor: ActorModel, state: object, sigma: float, seed: Seed) -> np.ndarray:
    """Allocation for ``state`` with Gaussian exploration noise.

    Noise of standard deviation ``sigma`` is added to each weight and the
    result is re-normalised with :func:`weights_from_readout`; ``sigma=0``
    returns the deterministic policy.

    """
    vector = as_vector(state, 'state')
    if vector.shape[0] != actor.state_dim:
        raise ArgumentError('actor takes %d state features, got %d' % (actor.state_dim, vector.shape[0]))
    weights = actor.weights(vector)[0]
    if sigma <= 0:
        return weights
    noise = make_generator(seed).normal(0.0, sigma, size=weights.shape[0])
    return weights_from_readout(weights + noise)


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def buffer_sample(buffer: ReplayBuffer, count: int, seed: Seed) -> List[Transition]:
    """``count`` uniform draws with replacement; :exc:`StateError` when empty."""
    return buffer.sample(count, seed)


###############################################################################
# Targets & Updates


def _stack(batch: Sequence[Transition]) -> Dict[str, np.ndarray]:
    if not batch:
        raise ArgumentError('empty minibatch')
    return {
        'states': np.array([item.state for item in batch]),
        'actions': np.array([item.action for item in batch]),
        'rewards': np.array([item.reward for item in batch]),
        'next_states': np.array([item.next_state for item in batch]),
    }


def dqn_candidates(target_actor: ActorModel, next_states: np.ndarray, count: int, seed: Seed) -> List[np.ndarray]:
    """Candidate next actions for the sampled max.

    Candidate ``k < count - 1`` is a uniform draw from ``[-1, 1]**N`` passed
    through :func:`weights_from_readout`, taken from stream ``(seed, k)`` so
    the candidates for a smaller ``count`` are a subset of those for a larger
    one. The last candidate is the target actor's own proposal.

    """
    size = next_states.shape[0]
    candidates = []
    for index in range(count - 1):
        draws = make_generator(spawn_seed(seed, index)).uniform(-1.0, 1.0, size=(size, target_actor.num_assets))
        candidates.append(np.array([weights_from_readout(row) for row in draws]))
    candidates.append(target_actor.weights(next_states))
    return candidates


def compute_target(kind: TargetKind, batch: Sequence[Transition], target_actor: ActorModel,
                   target_critic: CriticModel, cfg: AgentConfig, seed: Seed) -> np.ndarray:
    """Bellman targets for a minibatch.

    ``ddpg``: ``y = r + gamma * Q'(s', mu'(s'))``.
    ``dqn``: ``y = r + gamma * max_k Q'(s', a'_k)`` over :func:`dqn_candidates`.

    """
    data = _stack(batch)
    rewards = data['rewards']
    if cfg.gamma == 0:
        return rewards.copy()
    next_states = data['next_states']
    if kind == 'ddpg':
        bootstrap = target_critic.q(next_states, target_actor.weights(next_states))
    elif kind == 'dqn':
        values = [target_critic.q(next_states, candidate)
                  for candidate in dqn_candidates(target_actor, next_states, cfg.dqn_samples, seed)]
        bootstrap = np.max(np.array(values), axis=0)
    else:
        raise ArgumentError('unknown target kind %r' % (kind,))
    return rewards + cfg.gamma * bootstrap


def critic_loss(critic: CriticModel, batch: Sequence[Transition], targets: object, l2: float = 0.0) -> float:
    """``mean((Q(s, a) - y)**2) + l2 * |theta|**2``."""
    data = _stack(batch)
    residual = critic.q(data['states'], data['actions']) - as_vector(targets, 'targets')
    return float(np.mean(residual ** 2) + l2 * np.dot(critic.network.params, critic.network.params))


def critic_update(critic: CriticModel, batch: Sequence[Transition], targets: object,
                  opt: OptimizerState) -> float:
    """One optimizer step on the critic's regularised squared error.

    Returns:
        float: the loss before the step

    """
    data = _stack(batch)
    targets = as_vector(targets, 'targets')
    if targets.shape[0] != len(batch):
        raise ArgumentError('%d targets for a minibatch of %d' % (targets.shape[0], len(batch)))
    inputs = critic.inputs(data['states'], data['actions'])
    residual = critic.network.forward(inputs)[:, 0] - targets
    params = critic.network.params
    loss = float(np.mean(residual ** 2) + opt.l2 * np.dot(params, params))
    grads = critic.network.parameter_vjp(inputs, (2.0 / len(batch)) * residual[:, np.newaxis])
    critic.network.set_params(optimizer_step(opt, params, grads))
    return loss


def actor_objective(actor: ActorModel, critic: CriticModel, states: object) -> float:
    """``J = mean_j Q(s_j, mu(s_j))``."""
    states = as_matrix(states, 'states')
    return float(np.mean(critic.q(states, actor.weights(states))))


def actor_update(actor: ActorModel, critic: CriticModel, states: object, opt: OptimizerState) -> float:
    """One ascent step on ``J = mean_j Q(s_j, mu(s_j))``.

    ``dQ/da`` comes from the critic, is pulled back through the weight
    normalisation and then through the actor network.

    Returns:
        float: ``J`` before the step

    """
    states = as_matrix(states, 'states')
    if states.shape[0] < 1:
        raise ArgumentError('empty state batch')
    readouts = actor.readouts(states)
    actions = np.array([weights_from_readout(row) for row in readouts])
    objective = float(np.mean(critic.q(states, actions)))
    action_grads = critic.action_gradient(states, actions) / states.shape[0]
    upstream = readout_vjp(readouts, action_grads)
    grads = actor.network.parameter_vjp(states, upstream)
    actor.network.set_params(optimizer_step(opt, actor.network.params, -grads))
    return objective


###############################################################################
# Tabular Oracle


class FiniteMDP:
    """Deterministic finite MDP.

    Args:
        transitions: ``(S, A)`` integer table of successor states
        rewards: ``(S, A)`` table of immediate rewards

    """

    def __init__(self, transitions: object, rewards: object) -> None:
        self.transitions = np.asarray(transitions, dtype=int)
        self.rewards = np.asarray(rewards, dtype=float)
        if self.transitions.ndim != 2 or self.transitions.shape != self.rewards.shape:
            raise ArgumentError('transition and reward tables must share an (S, A) shape')
        if self.transitions.min() < 0 or self.transitions.max() >= self.transitions.shape[0]:
            raise ArgumentError('successor state out of range')

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]


def value_iteration(mdp: FiniteMDP, gamma: float, tolerance: float = 1e-12, max_sweeps: int = 100000) -> np.ndarray:
    """Optimal ``Q*`` of ``mdp`` by repeated Bellman optimality backups."""
    table = np.zeros(mdp.transitions.shape)
    for _ in range(max_sweeps):
        updated = mdp.rewards + gamma * table.max(axis=1)[mdp.transitions]
        if np.max(np.abs(updated - table)) <= tolerance:
            return updated
        table = updated
    return table


def tabular_q_learning(mdp: FiniteMDP, alpha: float, gamma: float, epsilon: float, episodes: int, seed: Seed,
                       steps_per_episode: int = 10, initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Epsilon-greedy Q-learning.

    Each episode starts in a uniformly drawn state and runs
    ``steps_per_episode`` updates ``Q(s, a) += alpha * (r + gamma * max Q(s') - Q(s, a))``.
    Greedy ties go to the lowest action index.

    """
    if not 0 < alpha <= 1 or not 0 <= epsilon <= 1:
        raise ArgumentError('alpha must lie in (0, 1] and epsilon in [0, 1]')
    rng = make_generator(seed)
    table = np.zeros(mdp.transitions.shape) if initial is None else np.array(initial, dtype=float)
    for _ in range(episodes):
        state = int(rng.integers(mdp.num_states))
        for _ in range(steps_per_episode):
            if rng.random() < epsilon:
                action = int(rng.integers(mdp.num_actions))
            else:
                action = int(np.argmax(table[state]))
            successor = int(mdp.transitions[state, action])
            target = mdp.rewards[state, action] + gamma * table[successor].max()
            table[state, action] += alpha * (target - table[state, action])
            state = successor
    return table


###############################################################################
# Model Factories


def classical_parameter_count(state_dim: int, num_assets: int, hidden: Sequence[int]) -> int:
    """Actor plus critic parameters of MLPs with the given hidden widths."""
    total = 0
    for sizes in ([state_dim] + list(hidden) + [num_assets], [state_dim + num_assets] + list(hidden) + [1]):
        total += sum(fan_out * (fan_in + 1) for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))
    return total


def classical_hidden_width(target: int, state_dim: int, num_assets: int) -> int:
    """Single hidden width whose actor plus critic total lies closest to ``target``.

    With one hidden layer of width ``h`` the total is
    ``h * (2d + 2N + 3) + N + 1``.

    >>> classical_hidden_width(13500, 555, 15)
    12

    """
    slope = 2 * state_dim + 2 * num_assets + 3
    return max(1, int(round((target - num_assets - 1) / slope)))


def build_actor(kind: ModelKind, state_dim: int, num_assets: int, seed: Seed, *, layers: int = 3,
                pattern: EntanglerPattern = 'ring', qubits: Optional[int] = None,
                hidden: Sequence[int] = ()) -> ActorModel:
    """Actor factory.

    The quantum actor's register holds both the encoded state and one readout
    qubit per asset: ``max(required_qubits(state_dim), num_assets)`` qubits
    unless ``qubits`` asks for more. The classical actor's output bias starts
    at ``1/N`` so the initial readout sum sits away from the guard.

    """
    if kind == 'quantum':
        width = max(required_qubits(state_dim), num_assets, qubits or 0)
        ansatz = build_ansatz(width, layers, pattern)
        return ActorModel(QuantumNetwork.random(ansatz, ObservableSet.first(num_assets), state_dim, seed))
    if kind == 'classical':
        sizes = [state_dim] + list(hidden) + [num_assets]
        return ActorModel(MLP.glorot(sizes, seed, output_bias=1.0 / num_assets))
    raise ArgumentError('unknown model kind %r' % (kind,))


def build_critic(kind: ModelKind, state_dim: int, num_assets: int, seed: Seed, *, layers: int = 3,
                 pattern: EntanglerPattern = 'ring', qubits: Optional[int] = None,
                 hidden: Sequence[int] = ()) -> CriticModel:
    """Critic factory; the quantum critic reads ``<Z_0>`` of ``[s, a]`` encoded together."""
    if kind == 'quantum':
        width = max(required_qubits(state_dim + num_assets), qubits or 0)
        ansatz = build_ansatz(width, layers, pattern)
        network = QuantumNetwork.random(ansatz, ObservableSet.first(1), state_dim + num_assets, seed)
        return CriticModel(network, state_dim)
    if kind == 'classical':
        sizes = [state_dim + num_assets] + list(hidden) + [1]
        return CriticModel(MLP.glorot(sizes, seed), state_dim)
    raise ArgumentError('unknown model kind %r' % (kind,))


def log_model_sizes(actor: ActorModel, critic: CriticModel) -> None:
    logger.info('built %s actor with %d parameters, %s critic with %d parameters',
                actor.kind, actor.network.num_parameters, critic.kind, critic.network.num_parameters)
