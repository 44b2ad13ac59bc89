import json
import os

import numpy as np
import pytest

from qrlfolio.checkpoint import (FORMAT, VERSION, Checkpoint, FoldState, dump_checkpoint, load_checkpoint,
                                 parse_checkpoint, save_checkpoint)
from qrlfolio.config import RunConfig
from qrlfolio.errors import CheckpointError, UnsupportedVersionError
from qrlfolio.market import MarketDataset
from qrlfolio.training import Agent

from .testutils import read_text_file, write_text_file


def make_checkpoint(cfg: RunConfig, dataset: MarketDataset) -> Checkpoint:
    states = []
    for fold in (1, 2):
        actor, critic = cfg.model_spec().build(dataset.state_dim, dataset.num_assets, (cfg.run_seed, fold))
        agent = Agent(actor, critic, cfg.agent_config())
        states.append(FoldState(fold, agent.to_dict(), {'seed': cfg.run_seed, 'stream': [cfg.run_seed, fold]},
                                0, 0, 0.1 * fold))
    return Checkpoint(cfg, states)


class TestDocument:

    def test_round_trip_is_byte_identical(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        text = dump_checkpoint(make_checkpoint(tiny_config, tiny_dataset))
        loaded = parse_checkpoint(text)
        assert loaded.config == tiny_config
        assert [state.fold for state in loaded.folds] == [1, 2]
        assert dump_checkpoint(loaded) == text

    def test_header(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        document = json.loads(dump_checkpoint(make_checkpoint(tiny_config, tiny_dataset)))
        assert (document['format'], document['version']) == (FORMAT, VERSION)
        assert document['config']['model.hidden'] == [4]

    def test_restored_actor_agrees(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        original = make_checkpoint(tiny_config, tiny_dataset)
        loaded = parse_checkpoint(dump_checkpoint(original))
        state = tiny_dataset.state(70).values
        np.testing.assert_array_equal(loaded.fold(2).actor().weights(state),
                                      original.fold(2).actor().weights(state))
        agent = loaded.fold(1).restore(loaded.config)
        assert agent.to_dict() == original.fold(1).agent
        with pytest.raises(CheckpointError):
            loaded.fold(3)


class TestErrors:

    def test_truncated(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        text = dump_checkpoint(make_checkpoint(tiny_config, tiny_dataset))
        with pytest.raises(CheckpointError) as excinfo:
            parse_checkpoint(text[:200])
        assert excinfo.value.offset is not None
        assert 0 < excinfo.value.offset <= 200
        assert 'at offset' in str(excinfo.value)

    def test_unsupported_version(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        document = json.loads(dump_checkpoint(make_checkpoint(tiny_config, tiny_dataset)))
        document['version'] = VERSION + 1
        with pytest.raises(UnsupportedVersionError):
            parse_checkpoint(json.dumps(document))

    @pytest.mark.parametrize('document, fragment', [
        ({'format': 'other', 'version': 1, 'config': {}, 'folds': []}, 'not a checkpoint'),
        ({'format': FORMAT, 'version': 1, 'config': {}}, "lacks 'folds'"),
        ({'format': FORMAT, 'version': 1, 'config': {'model.colour': 'red'}, 'folds': []}, 'configuration'),
        ({'format': FORMAT, 'version': 1, 'config': {}, 'folds': [{'fold': 1}]}, 'fold entry 0'),
        ([], 'not an object'),
    ])
    def test_malformed(self, document: object, fragment: str) -> None:
        with pytest.raises(CheckpointError) as excinfo:
            parse_checkpoint(json.dumps(document))
        assert fragment in str(excinfo.value)

    def test_missing_agent_key(self, tiny_config: RunConfig, tiny_dataset: MarketDataset) -> None:
        document = json.loads(dump_checkpoint(make_checkpoint(tiny_config, tiny_dataset)))
        del document['folds'][1]['agent']['critic_optimizer']
        with pytest.raises(CheckpointError, match='fold entry 1 agent'):
            parse_checkpoint(json.dumps(document))


class TestFiles:

    def test_save_and_load(self, tmp_path: 'os.PathLike[str]', tiny_config: RunConfig,
                           tiny_dataset: MarketDataset) -> None:
        path = os.path.join(str(tmp_path), 'run.ckpt')
        checkpoint = make_checkpoint(tiny_config, tiny_dataset)
        save_checkpoint(path, checkpoint)
        assert read_text_file(path) == dump_checkpoint(checkpoint)
        assert dump_checkpoint(load_checkpoint(path)) == dump_checkpoint(checkpoint)

    def test_missing_file(self, tmp_path: 'os.PathLike[str]') -> None:
        with pytest.raises(CheckpointError, match='cannot read checkpoint'):
            load_checkpoint(os.path.join(str(tmp_path), 'absent.ckpt'))

    def test_not_json(self, tmp_path: 'os.PathLike[str]') -> None:
        path = os.path.join(str(tmp_path), 'bad.ckpt')
        write_text_file(path, '{"format": ')
        with pytest.raises(CheckpointError) as excinfo:
            load_checkpoint(path)
        assert excinfo.value.offset == 11
