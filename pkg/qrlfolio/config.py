# -*- coding: utf-8 -*-
"""Run configuration files.

A run configuration is a flat text file of ``key = value`` lines with dotted
section keys; ``#`` starts a comment. Every key is declared in
:data:`SCHEMA` with its type, default and admissible values, and unknown keys
are rejected. :func:`dump_config` writes a file that parses back to the same
values.

.. code-block:: ini

   # two-asset quantum DDPG
   data.path = prices.csv
   model.kind = quantum_ddpg
   model.layers = 5
   train.epochs = 20

"""

import dataclasses
import os
import re
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from bpc_utils import Config

from .agents import AgentConfig
from .errors import ArgumentError, ConfigError
from .evaluation import FoldSplit, expanding_folds
from .market import EnvConfig
from .training import ModelSpec

__all__ = ['SCHEMA', 'MODEL_KINDS', 'RunConfig', 'default_config', 'parse_config', 'load_config', 'dump_config',
           'write_config', 'config_from_mapping', 'plan_folds']

#: Accepted values of ``model.kind``.
MODEL_KINDS = ('quantum_ddpg', 'quantum_dqn', 'classical_ddpg', 'classical_dqn', 'equal_weights', 'mvo')

Value = Union[str, int, float, Tuple[int, ...]]


@dataclasses.dataclass(frozen=True)
class Option:
    """Schema entry of one configuration key."""

    kind: type
    default: Value
    doc: str
    choices: Tuple[str, ...] = ()
    check: Optional[Callable[[Any], bool]] = None
    requirement: str = ''


def _positive(value: Any) -> bool:
    return value > 0


def _non_negative(value: Any) -> bool:
    return value >= 0


def _unit(value: Any) -> bool:
    return 0 <= value <= 1


#: Every accepted key, in file order.
SCHEMA = {
    'data.path': Option(str, '', 'canonical price file'),
    'model.kind': Option(str, 'quantum_ddpg', 'model family and algorithm', choices=MODEL_KINDS),
    'model.layers': Option(int, 3, 'rotation layers per circuit', check=_positive, requirement='positive'),
    'model.pattern': Option(str, 'ring', 'entangler pattern', choices=('ring', 'asset_temporal')),
    'model.qubits': Option(int, 0, 'register width floor, 0 derives it from the inputs',
                           check=_non_negative, requirement='non-negative'),
    'model.hidden': Option(tuple, (), 'comma-separated hidden widths of each MLP',
                           check=lambda value: all(width > 0 for width in value), requirement='positive widths'),
    'model.mvo_grid_step': Option(float, 0.25, 'weight grid resolution of the MVO baseline',
                                  check=lambda value: 0 < value <= 1, requirement='in (0, 1]'),
    'agent.gamma': Option(float, 0.01, 'discount factor', check=_unit, requirement='in [0, 1]'),
    'agent.tau': Option(float, 0.005, 'soft-update coefficient', check=_unit, requirement='in [0, 1]'),
    'agent.sigma_start': Option(float, 0.05, 'exploration noise at the first epoch',
                                check=_non_negative, requirement='non-negative'),
    'agent.sigma_end': Option(float, 0.005, 'exploration noise at the last epoch',
                              check=_non_negative, requirement='non-negative'),
    'agent.dqn_samples': Option(int, 10, 'candidate next actions per transition (DQN)',
                                check=_positive, requirement='positive'),
    'agent.batch_size': Option(int, 32, 'minibatch size', check=_positive, requirement='positive'),
    'agent.actor_lr': Option(float, 0.01, 'actor learning rate', check=_positive, requirement='positive'),
    'agent.critic_lr': Option(float, 0.01, 'critic learning rate', check=_positive, requirement='positive'),
    'agent.l2': Option(float, 1e-4, 'L2 regularization coefficient', check=_non_negative,
                       requirement='non-negative'),
    'agent.optimizer': Option(str, 'adam', 'optimizer', choices=('adam', 'sgd')),
    'agent.episode_stride': Option(int, 1, 'distance between episode start offsets',
                                   check=_positive, requirement='positive'),
    'env.lookback': Option(int, 30, 'price window length in days', check=_positive, requirement='positive'),
    'env.horizon': Option(int, 7, 'forecast length in days', check=_positive, requirement='positive'),
    'env.rebalance_period': Option(int, 30, 'days between decisions', check=_positive, requirement='positive'),
    'env.cost_rate': Option(float, 0.0015, 'transaction cost per unit turnover',
                            check=_non_negative, requirement='non-negative'),
    'env.eta': Option(float, 0.5, 'risk preference of the reward'),
    'env.risk_free': Option(float, 0.0418, 'annualised risk-free rate'),
    'env.trading_days': Option(int, 252, 'trading days per year', check=_positive, requirement='positive'),
    'env.cost_convention': Option(str, 'literal', 'transaction cost accounting', choices=('literal', 'subtractive')),
    'env.forecast_min_history': Option(int, 30, 'rows needed before the AR forecaster is used',
                                       check=_positive, requirement='positive'),
    'folds.count': Option(int, 7, 'expanding-window folds', check=_positive, requirement='positive'),
    'folds.val_fraction': Option(float, 0.2, 'share of each training span held out for validation',
                                 check=lambda value: 0 < value < 1, requirement='in (0, 1)'),
    'train.epochs': Option(int, 50, 'epoch limit', check=_positive, requirement='positive'),
    'train.patience': Option(int, 10, 'epochs without improvement before stopping',
                             check=_positive, requirement='positive'),
    'run.seed': Option(int, 0, 'root random seed', check=_non_negative, requirement='non-negative'),
    'run.shots': Option(int, 0, 'measurement shots for backtests, 0 reads exact expectations',
                        check=_non_negative, requirement='non-negative'),
}  # type: Dict[str, Option]


def _attribute(key: str) -> str:
    return key.replace('.', '_')


class RunConfig(Config):
    """Parsed run configuration.

    Keys are exposed as attributes with the dot replaced by an underscore,
    e.g. ``cfg.model_kind`` for ``model.kind``.

    """

    def as_dict(self) -> Dict[str, Value]:
        """Mapping of dotted keys to values in schema order."""
        return {key: getattr(self, _attribute(key)) for key in SCHEMA}

    def replace(self, **changes: Value) -> 'RunConfig':
        """Copy with dotted-key changes, given as ``model_kind='mvo'``."""
        values = self.as_dict()
        for name, value in changes.items():
            key = name.replace('_', '.', 1)
            if key not in SCHEMA:
                raise ConfigError('unknown configuration key %r' % key)
            values[key] = value
        return config_from_mapping(values)

    @property
    def family(self) -> str:
        """``quantum``, ``classical`` or ``baseline``."""
        if self.model_kind in ('equal_weights', 'mvo'):
            return 'baseline'
        return self.model_kind.split('_')[0]

    @property
    def algorithm(self) -> str:
        """``ddpg`` or ``dqn`` for agent kinds."""
        if self.family == 'baseline':
            raise ArgumentError('baseline %r has no learning algorithm' % (self.model_kind,))
        return self.model_kind.split('_')[1]

    def agent_config(self) -> AgentConfig:
        return AgentConfig(algorithm=self.algorithm, gamma=self.agent_gamma, tau=self.agent_tau,  # type: ignore
                           sigma_start=self.agent_sigma_start, sigma_end=self.agent_sigma_end,
                           dqn_samples=self.agent_dqn_samples, batch_size=self.agent_batch_size,
                           actor_lr=self.agent_actor_lr, critic_lr=self.agent_critic_lr, l2=self.agent_l2,
                           optimizer=self.agent_optimizer)

    def env_config(self) -> EnvConfig:
        return EnvConfig(lookback=self.env_lookback, horizon=self.env_horizon,
                         rebalance_period=self.env_rebalance_period, cost_rate=self.env_cost_rate,
                         eta=self.env_eta, risk_free=self.env_risk_free, trading_days=self.env_trading_days,
                         cost_convention=self.env_cost_convention,
                         forecast_min_history=self.env_forecast_min_history)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(kind=self.family, layers=self.model_layers, pattern=self.model_pattern,  # type: ignore
                         qubits=self.model_qubits, hidden=self.model_hidden)


def _coerce(key: str, raw: Any) -> Value:
    option = SCHEMA[key]
    try:
        if option.kind is tuple:
            if isinstance(raw, str):
                items = [item.strip() for item in raw.split(',') if item.strip()]  # type: Iterable[Any]
            else:
                items = raw
            value = tuple(int(item) for item in items)  # type: Value
        elif option.kind is int:
            if isinstance(raw, float) or isinstance(raw, bool):
                raise ValueError(raw)
            value = int(raw)
        elif option.kind is float:
            value = float(raw)
        else:
            value = str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError('invalid value %r for %s (expected %s)' % (raw, key, option.kind.__name__)) from None
    if option.choices and value not in option.choices:
        raise ConfigError('invalid value %r for %s (choose from %s)' % (value, key, ', '.join(option.choices)))
    if option.check is not None and not option.check(value):
        raise ConfigError('invalid value %r for %s (must be %s)' % (value, key, option.requirement))
    return value


def config_from_mapping(values: Mapping[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig` from dotted keys; absent keys take defaults.

    Raises:
        ConfigError: on unknown keys or invalid values

    """
    unknown = sorted(set(values) - set(SCHEMA))
    if unknown:
        raise ConfigError('unknown configuration key %r' % unknown[0])
    parsed = {}
    for key, option in SCHEMA.items():
        parsed[_attribute(key)] = _coerce(key, values[key]) if key in values else option.default
    return RunConfig(**parsed)


def default_config() -> RunConfig:
    return config_from_mapping({})


_LINE = re.compile(r'^\s*(?P<key>[A-Za-z_][\w.]*)\s*=\s*(?P<value>.*?)\s*$')


def parse_config(text: str, source: str = '<string>') -> RunConfig:
    """Parse configuration text.

    Args:
        text (str): file content
        source (str): name used in error messages

    Raises:
        ConfigError: on malformed lines, repeated or unknown keys and invalid values

    """
    values = {}  # type: Dict[str, str]
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split('#', 1)[0]
        if not content.strip():
            continue
        match = _LINE.match(content)
        if match is None:
            raise ConfigError('%s:%d: expected "key = value", got %r' % (source, lineno, line.strip()))
        key = match.group('key')
        if key not in SCHEMA:
            raise ConfigError('%s:%d: unknown configuration key %r' % (source, lineno, key))
        if key in values:
            raise ConfigError('%s:%d: repeated configuration key %r' % (source, lineno, key))
        values[key] = match.group('value')
    try:
        return config_from_mapping(values)
    except ConfigError as error:
        raise ConfigError('%s: %s' % (source, error)) from None


def load_config(path: Union[str, os.PathLike]) -> RunConfig:
    """Read and parse a configuration file; relative data paths resolve against its directory."""
    try:
        with open(path, 'r', encoding='utf-8') as file:
            cfg = parse_config(file.read(), source=os.fspath(path))
    except OSError as error:
        raise ConfigError('cannot read configuration %r: %s' % (os.fspath(path), error.strerror)) from None
    if cfg.data_path and not os.path.isabs(cfg.data_path):
        cfg.data_path = os.path.normpath(os.path.join(os.path.dirname(os.fspath(path)), cfg.data_path))
    return cfg


def _format(value: Value) -> str:
    if isinstance(value, tuple):
        return ','.join(str(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Render every key with its documentation comment."""
    lines = []  # type: List[str]
    section = None
    for key, value in cfg.as_dict().items():
        head = key.split('.', 1)[0]
        if head != section:
            if section is not None:
                lines.append('')
            lines.append('# %s' % head)
            section = head
        lines.append('%s = %s  # %s' % (key, _format(value), SCHEMA[key].doc))
    return '\n'.join(lines) + '\n'


def write_config(cfg: RunConfig, path: Union[str, os.PathLike]) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(dump_config(cfg))


def plan_folds(cfg: RunConfig, num_rows: int) -> List[FoldSplit]:
    """Expanding folds that can be trained, validated and tested.

    Training rows must hold an episode of two decisions, validation rows two
    daily returns (validation is marked to market daily), and test rows two
    rebalance decisions.

    Raises:
        ConfigError: if the data cannot support the fold layout

    """
    env = cfg.env_config()
    try:
        folds = expanding_folds(num_rows, cfg.folds_count, cfg.folds_val_fraction, env.min_block)
    except ArgumentError as error:
        raise ConfigError('%d rows cannot hold %d folds: %s' % (num_rows, cfg.folds_count, error)) from None
    period = env.rebalance_period
    for fold in folds:
        if env.lookback + period + env.horizon >= fold.train.stop:
            raise ConfigError('fold %d training rows [%d, %d) cannot hold an episode of two decisions'
                              % (fold.fold, fold.train.start, fold.train.stop))
        daily = len(range(max(fold.val.start, env.lookback), fold.val.stop - 1))
        if daily < 2:
            raise ConfigError('fold %d validation rows [%d, %d) hold %d daily returns, need 2'
                              % (fold.fold, fold.val.start, fold.val.stop, daily))
        decisions = len(range(max(fold.test.start, env.lookback), fold.test.stop - period, period))
        if decisions < 2:
            raise ConfigError('fold %d test rows [%d, %d) hold %d rebalance decisions, need 2'
                              % (fold.fold, fold.test.start, fold.test.stop, decisions))
    return folds
