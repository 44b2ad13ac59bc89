# -*- coding: utf-8 -*-
"""Versioned checkpoint files.

A checkpoint is a JSON document holding the run configuration and, per fold,
the best-validation agent: online and target parameters, optimizer moments,
the random stream that produced them and the epoch counters. Keys are sorted
and floats are written in their shortest round-trip form, so saving a loaded
checkpoint reproduces the original bytes.

"""

import dataclasses
import json
import os
from typing import Any, Dict, List, Union

from .agents import ActorModel
from .config import RunConfig, config_from_mapping
from .errors import CheckpointError, ConfigError, UnsupportedVersionError
from .training import Agent, FoldTraining

__all__ = ['FORMAT', 'VERSION', 'FoldState', 'Checkpoint', 'dump_checkpoint', 'parse_checkpoint', 'save_checkpoint',
           'load_checkpoint']

#: Format tag of checkpoint documents.
FORMAT = 'qrlfolio-checkpoint'
#: Current checkpoint version.
VERSION = 1

_FOLD_KEYS = ('fold', 'agent', 'rng', 'epoch', 'best_epoch', 'val_sharpe')
_AGENT_KEYS = ('actor', 'critic', 'target_actor', 'target_critic', 'actor_optimizer', 'critic_optimizer')


@dataclasses.dataclass
class FoldState:
    """Best-validation agent of one fold.

    Attributes:
        fold: fold number
        agent: serialized :class:`~qrlfolio.training.Agent`
        rng: root seed and stream path of the fold
        epoch: last epoch trained
        best_epoch: epoch of the stored agent
        val_sharpe: validation Sharpe ratio of the stored agent

    """

    fold: int
    agent: Dict[str, Any]
    rng: Dict[str, Any]
    epoch: int
    best_epoch: int
    val_sharpe: float

    @classmethod
    def from_training(cls, result: FoldTraining, seed: int) -> 'FoldState':
        return cls(result.fold, result.best, {'seed': seed, 'stream': [seed, result.fold]},
                   result.stopped_epoch, result.best_epoch, result.val_sharpe)

    def actor(self) -> ActorModel:
        return ActorModel.from_dict(self.agent['actor'])

    def restore(self, cfg: RunConfig) -> Agent:
        return Agent.from_dict(self.agent, cfg.agent_config())

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class Checkpoint:
    """Run configuration plus one :class:`FoldState` per trained fold."""

    config: RunConfig
    folds: List[FoldState]
    version: int = VERSION

    def fold(self, number: int) -> FoldState:
        for state in self.folds:
            if state.fold == number:
                return state
        raise CheckpointError('checkpoint holds no fold %d' % number)


def dump_checkpoint(checkpoint: Checkpoint) -> str:
    document = {
        'format': FORMAT,
        'version': checkpoint.version,
        'config': {key: list(value) if isinstance(value, tuple) else value
                   for key, value in checkpoint.config.as_dict().items()},
        'folds': [state.to_dict() for state in checkpoint.folds],
    }
    return json.dumps(document, sort_keys=True, indent=1, allow_nan=False) + '\n'


def _require(mapping: Any, keys: Any, where: str) -> None:
    if not isinstance(mapping, dict):
        raise CheckpointError('%s is not an object' % where)
    missing = [key for key in keys if key not in mapping]
    if missing:
        raise CheckpointError('%s lacks %r' % (where, missing[0]))


def parse_checkpoint(text: str) -> Checkpoint:
    """Decode checkpoint text.

    Raises:
        CheckpointError: on malformed JSON (with the byte offset) or missing fields
        UnsupportedVersionError: on a version other than :data:`VERSION`

    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise CheckpointError('malformed checkpoint: %s' % error.msg, offset=error.pos) from None
    _require(document, ('format', 'version', 'config', 'folds'), 'checkpoint')
    if document['format'] != FORMAT:
        raise CheckpointError('not a checkpoint: format %r' % (document['format'],), offset=0)
    if document['version'] != VERSION:
        raise UnsupportedVersionError('checkpoint version %r is not supported (expected %d)'
                                      % (document['version'], VERSION))
    try:
        config = config_from_mapping(document['config'])
    except ConfigError as error:
        raise CheckpointError('invalid checkpoint configuration: %s' % error) from None
    folds = []
    for index, entry in enumerate(document['folds']):
        where = 'fold entry %d' % index
        _require(entry, _FOLD_KEYS, where)
        _require(entry['agent'], _AGENT_KEYS, where + ' agent')
        folds.append(FoldState(**{key: entry[key] for key in _FOLD_KEYS}))
    return Checkpoint(config, folds)


def save_checkpoint(path: Union[str, os.PathLike], checkpoint: Checkpoint) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(dump_checkpoint(checkpoint))


def load_checkpoint(path: Union[str, os.PathLike]) -> Checkpoint:
    """Read a checkpoint file.

    Raises:
        CheckpointError: if the file is unreadable or malformed

    """
    try:
        with open(path, 'r', encoding='utf-8') as file:
            text = file.read()
    except OSError as error:
        raise CheckpointError('cannot read checkpoint %r: %s' % (os.fspath(path), error.strerror)) from None
    return parse_checkpoint(text)
