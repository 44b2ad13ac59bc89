# -*- coding: utf-8 -*-
"""Off-policy actor-critic training on one cross-validation fold.

One epoch runs an episode from every ``episode_stride``-th start offset inside
the first rebalance period of the fold's training rows, so that together the
episodes visit every training row once. After each environment step the
agent draws one minibatch, updates the critic, then the actor, then blends
both target networks. The epoch ends with a noiseless backtest on the
validation rows, marked to market daily so that short validation blocks still
score; its Sharpe ratio drives early stopping.

"""

import dataclasses
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Literal

from .agents import (ActorModel, AgentConfig, CriticModel, ReplayBuffer, Transition, act, actor_update,
                     build_actor, build_critic, compute_target, critic_update, log_model_sizes)
from .errors import ArgumentError, NumericError, StateError
from .evaluation import ActorPolicy, FoldSplit, run_daily_backtest
from .market import MarketDataset, MarketEnv
from .optim import OptimizerState, soft_update
from .utils import Seed, spawn_seed
from .vqc import EntanglerPattern

__all__ = ['ModelSpec', 'Agent', 'EarlyStopping', 'EpochRecord', 'FoldTraining', 'exploration_sigma',
           'train_fold']

logger = logging.getLogger(__name__)

# stream indices under (seed, fold)
_STREAM_ACTOR, _STREAM_CRITIC, _STREAM_ACT, _STREAM_SAMPLE, _STREAM_TARGET = range(5)


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    """Shape of the actor and critic models.

    Attributes:
        kind: ``quantum`` or ``classical``
        layers: rotation layers of each circuit
        pattern: entangler pattern of each circuit
        qubits: register width floor (0 derives it from the inputs)
        hidden: hidden layer widths of each MLP

    """

    kind: Literal['quantum', 'classical'] = 'quantum'
    layers: int = 3
    pattern: EntanglerPattern = 'ring'
    qubits: int = 0
    hidden: Tuple[int, ...] = ()

    def build(self, state_dim: int, num_assets: int, seed: Seed) -> Tuple[ActorModel, CriticModel]:
        options = dict(layers=self.layers, pattern=self.pattern, qubits=self.qubits or None,
                       hidden=self.hidden)  # type: Dict[str, Any]
        actor = build_actor(self.kind, state_dim, num_assets, spawn_seed(seed, _STREAM_ACTOR), **options)
        critic = build_critic(self.kind, state_dim, num_assets, spawn_seed(seed, _STREAM_CRITIC), **options)
        return actor, critic


class Agent:
    """Online and target models, their optimizers and the replay buffer."""

    def __init__(self, actor: ActorModel, critic: CriticModel, cfg: AgentConfig) -> None:
        self.cfg = cfg
        self.actor = actor
        self.critic = critic
        self.target_actor = actor.copy()
        self.target_critic = critic.copy()
        self.actor_opt = OptimizerState(cfg.optimizer, actor.network.num_parameters,  # type: ignore[arg-type]
                                        cfg.actor_lr, cfg.l2)
        self.critic_opt = OptimizerState(cfg.optimizer, critic.network.num_parameters,  # type: ignore[arg-type]
                                         cfg.critic_lr, cfg.l2)
        self.buffer = ReplayBuffer()

    def learn(self, seed: Seed) -> Tuple[float, float]:
        """One critic step, one actor step and the target blends.

        Returns:
            Tuple[float, float]: critic loss and actor objective before the steps

        Raises:
            NumericError: if the loss, the objective or a parameter turns non-finite

        """
        batch = self.buffer.sample(self.cfg.batch_size, spawn_seed(seed, _STREAM_SAMPLE))
        targets = compute_target(self.cfg.algorithm, batch, self.target_actor, self.target_critic, self.cfg,
                                 spawn_seed(seed, _STREAM_TARGET))
        loss = critic_update(self.critic, batch, targets, self.critic_opt)
        objective = actor_update(self.actor, self.critic, np.array([item.state for item in batch]), self.actor_opt)
        finite = (np.isfinite(loss) and np.isfinite(objective) and np.all(np.isfinite(self.critic.network.params))
                  and np.all(np.isfinite(self.actor.network.params)))
        if not finite:
            raise NumericError('non-finite critic loss %r or actor objective %r' % (loss, objective),
                               payload=_dump_batch(batch, targets))
        self.target_critic.network.set_params(
            soft_update(self.critic.network.params, self.target_critic.network.params, self.cfg.tau))
        self.target_actor.network.set_params(
            soft_update(self.actor.network.params, self.target_actor.network.params, self.cfg.tau))
        return loss, objective

    def to_dict(self) -> Dict[str, Any]:
        """Checkpoint fragment; the replay buffer is not persisted."""
        return {
            'actor': self.actor.to_dict(),
            'critic': self.critic.to_dict(),
            'target_actor': self.target_actor.to_dict(),
            'target_critic': self.target_critic.to_dict(),
            'actor_optimizer': self.actor_opt.to_dict(),
            'critic_optimizer': self.critic_opt.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], cfg: AgentConfig) -> 'Agent':
        agent = cls(ActorModel.from_dict(data['actor']), CriticModel.from_dict(data['critic']), cfg)
        agent.target_actor = ActorModel.from_dict(data['target_actor'])
        agent.target_critic = CriticModel.from_dict(data['target_critic'])
        agent.actor_opt = OptimizerState.from_dict(data['actor_optimizer'])
        agent.critic_opt = OptimizerState.from_dict(data['critic_optimizer'])
        return agent


def _dump_batch(batch: Sequence[Transition], targets: np.ndarray) -> Dict[str, Any]:
    return {
        'states': [item.state.tolist() for item in batch],
        'actions': [item.action.tolist() for item in batch],
        'rewards': [item.reward for item in batch],
        'next_states': [item.next_state.tolist() for item in batch],
        'targets': [float(value) for value in targets],
    }


class EarlyStopping:
    """Stop after ``patience`` epochs without a new best validation score.

    >>> stopper = EarlyStopping(2)
    >>> [stopper.update(score, None) for score in (1.0, 0.5, 0.7, 0.9)]
    [False, False, True, True]

    """

    def __init__(self, patience: int) -> None:
        if patience < 1:
            raise ArgumentError('patience must be at least 1, got %d' % patience)
        self.patience = patience
        self.best_score = None  # type: Optional[float]
        self.best_epoch = -1
        self.best_snapshot = None  # type: Any
        self.epoch = -1
        self.stale = 0

    def update(self, score: float, snapshot: Any) -> bool:
        """Record one epoch; returns whether training should stop."""
        self.epoch += 1
        if self.best_score is None or score > self.best_score:
            self.best_score = score
            self.best_epoch = self.epoch
            self.best_snapshot = snapshot
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def exploration_sigma(epoch: int, epochs: int, start: float, end: float) -> float:
    """Linear decay from ``start`` at epoch 0 to ``end`` at the last epoch."""
    if epochs <= 1:
        return start
    fraction = min(1.0, epoch / (epochs - 1))
    return start + (end - start) * fraction


@dataclasses.dataclass(frozen=True)
class EpochRecord:
    """Metrics of one epoch."""

    fold: int
    epoch: int
    loss: float
    objective: float
    reward: float
    val_sharpe: float
    sigma: float

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class FoldTraining:
    """Outcome of :func:`train_fold`."""

    fold: int
    agent: Agent
    best: Dict[str, Any]
    best_epoch: int
    val_sharpe: float
    stopped_epoch: int
    records: List[EpochRecord]

    def best_actor(self) -> ActorModel:
        return ActorModel.from_dict(self.best['actor'])


def _episode_starts(env: MarketEnv, stride: int) -> List[int]:
    first = env.first_index()
    starts = range(first, first + env.cfg.rebalance_period, stride)
    return [t for t in starts if env.valid(t) and env.valid(t + env.cfg.rebalance_period)]


def train_fold(dataset: MarketDataset, fold: FoldSplit, spec: ModelSpec, cfg: AgentConfig, *, epochs: int = 50,
               patience: int = 10, seed: int = 0, episode_stride: int = 1,
               on_epoch: Optional[Callable[[EpochRecord], None]] = None,
               agent: Optional[Agent] = None) -> FoldTraining:
    """Train one agent on a fold with early stopping on validation Sharpe.

    Args:
        dataset (MarketDataset): market data
        fold (FoldSplit): row ranges; training only sees ``fold.train``
        spec (ModelSpec): model shapes
        cfg (AgentConfig): learning hyperparameters
        epochs (int): epoch limit
        patience (int): epochs without improvement before stopping
        seed (int): root seed; the fold owns stream ``(seed, fold)``
        episode_stride (int): distance between episode start offsets
        on_epoch (Optional[Callable]): called with every :class:`EpochRecord`
        agent (Optional[Agent]): resume from this agent instead of fresh models

    Raises:
        StateError: if the training rows cannot hold an episode, or the validation
            rows fewer than two daily returns
        NumericError: if training diverges

    """
    if epochs < 1 or episode_stride < 1:
        raise ArgumentError('epochs and episode stride must be positive')
    root = spawn_seed(seed, fold.fold)
    env = MarketEnv(dataset, fold.train.start, fold.train.stop)
    starts = _episode_starts(env, episode_stride)
    if not starts:
        raise StateError('fold %d training rows [%d, %d) cannot hold an episode'
                         % (fold.fold, fold.train.start, fold.train.stop))
    if min(fold.val.stop, dataset.num_rows) - 1 - max(fold.val.start, dataset.cfg.lookback) < 2:
        raise StateError('fold %d validation rows [%d, %d) hold fewer than two daily returns'
                         % (fold.fold, fold.val.start, fold.val.stop))
    if agent is None:
        actor, critic = spec.build(dataset.state_dim, dataset.num_assets, root)
        agent = Agent(actor, critic, cfg)
    log_model_sizes(agent.actor, agent.critic)

    stopper = EarlyStopping(patience)
    records = []  # type: List[EpochRecord]
    for epoch in range(epochs):
        sigma = exploration_sigma(epoch, epochs, cfg.sigma_start, cfg.sigma_end)
        losses, objectives, rewards = [], [], []
        for episode, start in enumerate(starts):
            state = env.reset(start)
            step = 0
            done = False
            while not done:
                stream = spawn_seed(root, epoch, episode, step)
                action = act(agent.actor, state.values, sigma, spawn_seed(stream, _STREAM_ACT))
                next_state, value, done = env.step(action)
                agent.buffer.push(Transition(state.values, action, value, next_state.values))
                loss, objective = agent.learn(stream)
                losses.append(loss)
                objectives.append(objective)
                rewards.append(value)
                state = next_state
                step += 1

        val_sharpe = run_daily_backtest(ActorPolicy(agent.actor), dataset, fold.val).sharpe
        record = EpochRecord(fold.fold, epoch, float(np.mean(losses)), float(np.mean(objectives)),
                             float(np.mean(rewards)), val_sharpe, sigma)
        records.append(record)
        logger.info('fold %d epoch %d: loss %.6g, reward %.6g, validation Sharpe %.6g',
                    fold.fold, epoch, record.loss, record.reward, record.val_sharpe)
        if on_epoch is not None:
            on_epoch(record)
        if stopper.update(val_sharpe, agent.to_dict()):
            logger.info('fold %d stopped early at epoch %d (best epoch %d)', fold.fold, epoch, stopper.best_epoch)
            break

    return FoldTraining(fold.fold, agent, stopper.best_snapshot, stopper.best_epoch,
                        float(stopper.best_score), records[-1].epoch, records)
