# -*- coding: utf-8 -*-
"""Random hyperparameter search scored by mean validation Sharpe ratio."""

import dataclasses
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from bpc_utils import map_tasks
from typing_extensions import Literal

from .config import RunConfig, config_from_mapping, plan_folds
from .errors import ArgumentError
from .evaluation import FoldSplit
from .market import MarketDataset, PriceTable
from .training import train_fold
from .utils import Seed, make_generator, spawn_seed

__all__ = ['Dimension', 'SEARCH_SPACE', 'TrialRecord', 'sample_trial', 'run_trial', 'best_trial', 'random_search']

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Dimension:
    """One searched configuration key.

    Attributes:
        key: dotted configuration key
        scale: ``log``, ``linear`` or ``choice``
        low: lower bound (numeric scales)
        high: upper bound (numeric scales)
        choices: candidate values (``choice`` scale)

    """

    key: str
    scale: Literal['log', 'linear', 'choice']
    low: float = 0.0
    high: float = 0.0
    choices: Tuple[str, ...] = ()

    def sample(self, rng: np.random.Generator) -> Any:
        if self.scale == 'choice':
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.scale == 'log':
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            value = rng.uniform(self.low, self.high)
        return float(min(max(value, self.low), self.high))

    def contains(self, value: Any) -> bool:
        if self.scale == 'choice':
            return value in self.choices
        return self.low <= value <= self.high


#: Searched keys and their ranges.
SEARCH_SPACE = (
    Dimension('agent.actor_lr', 'log', 1e-4, 1e-1),
    Dimension('agent.critic_lr', 'log', 1e-4, 1e-1),
    Dimension('agent.l2', 'log', 1e-6, 1e-1),
    Dimension('env.eta', 'linear', -1.0, -1e-2),
    Dimension('agent.gamma', 'log', 1e-3, 1e-1),
    Dimension('agent.optimizer', 'choice', choices=('adam', 'sgd')),
)


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    """Sampled values and validation scores of one trial."""

    trial: int
    params: Dict[str, Any]
    fold_sharpes: Tuple[float, ...]

    @property
    def mean_sharpe(self) -> float:
        return float(np.mean(self.fold_sharpes))

    def to_dict(self) -> Dict[str, Any]:
        return {'trial': self.trial, 'params': dict(self.params), 'fold_sharpes': list(self.fold_sharpes),
                'mean_sharpe': self.mean_sharpe}


def sample_trial(seed: Seed, space: Sequence[Dimension] = SEARCH_SPACE) -> Dict[str, Any]:
    """Draw one value per dimension from the stream ``seed``.

    >>> params = sample_trial((0, 3))
    >>> 1e-4 <= params['agent.actor_lr'] <= 1e-1 and params['agent.optimizer'] in ('adam', 'sgd')
    True

    """
    rng = make_generator(seed)
    return {dimension.key: dimension.sample(rng) for dimension in space}


def run_trial(cfg: RunConfig, table: PriceTable, folds: Sequence[FoldSplit], trial: int,
              params: Dict[str, Any]) -> TrialRecord:
    """Train every fold under ``params`` and record the validation Sharpe ratios."""
    values = cfg.as_dict()
    values.update(params)
    trial_cfg = config_from_mapping(values)
    dataset = MarketDataset(table, trial_cfg.env_config())
    sharpes = []
    for fold in folds:
        result = train_fold(dataset, fold, trial_cfg.model_spec(), trial_cfg.agent_config(),
                            epochs=trial_cfg.train_epochs, patience=trial_cfg.train_patience,
                            seed=trial_cfg.run_seed, episode_stride=trial_cfg.agent_episode_stride)
        sharpes.append(result.val_sharpe)
    logger.info('trial %d: mean validation Sharpe %.6g', trial, float(np.mean(sharpes)))
    return TrialRecord(trial, dict(params), tuple(sharpes))


def best_trial(records: Sequence[TrialRecord]) -> TrialRecord:
    """Highest mean validation Sharpe ratio; ties keep the earlier trial."""
    if not records:
        raise ArgumentError('no trials to choose from')
    best = records[0]
    for record in records[1:]:
        if record.mean_sharpe > best.mean_sharpe:
            best = record
    return best


def _run_indexed_trial(job: Tuple[int, Dict[str, Any]], cfg: RunConfig, table: PriceTable,
                       folds: Sequence[FoldSplit]) -> TrialRecord:
    trial, params = job
    return run_trial(cfg, table, folds, trial, params)


def random_search(cfg: RunConfig, table: PriceTable, n_trials: int, seed: int, *,
                  processes: Optional[int] = None) -> Tuple[List[TrialRecord], RunConfig]:
    """Sample ``n_trials`` configurations and keep the best.

    Trial ``k`` draws from stream ``(seed, k)``, so the trial sequence depends
    only on ``seed``. Ties on mean validation Sharpe keep the earlier trial.

    Returns:
        Tuple[List[TrialRecord], RunConfig]: records in trial order and the best configuration

    Raises:
        ArgumentError: if ``n_trials`` is not positive
        ConfigError: if the data cannot support the fold layout

    """
    if cfg.family == 'baseline':
        raise ArgumentError('baseline %r has no hyperparameters to tune' % (cfg.model_kind,))
    if n_trials < 1:
        raise ArgumentError('number of trials must be positive, got %d' % n_trials)
    folds = plan_folds(cfg, table.num_rows)
    jobs = [(trial, sample_trial(spawn_seed(seed, trial))) for trial in range(n_trials)]
    records = map_tasks(_run_indexed_trial, jobs, kwargs={'cfg': cfg, 'table': table, 'folds': folds},
                        processes=processes)  # type: List[TrialRecord]
    values = cfg.as_dict()
    values.update(best_trial(records).params)
    return list(records), config_from_mapping(values)
