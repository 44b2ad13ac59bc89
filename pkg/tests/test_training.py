import math

import numpy as np
import pytest

from qrlfolio.agents import AgentConfig
from qrlfolio.errors import ArgumentError, NumericError, StateError
from qrlfolio.encoding import required_qubits
from qrlfolio.evaluation import ActorPolicy, FoldSplit, equal_weight_policy, expanding_folds, run_backtest
from qrlfolio.market import EnvConfig, MarketDataset, PriceTable
from qrlfolio.training import Agent, EarlyStopping, EpochRecord, ModelSpec, exploration_sigma, train_fold

from .testutils import MonkeyPatch, synthetic_prices

FOLD = FoldSplit(1, range(0, 64), range(64, 80), range(80, 160))
SMALL = AgentConfig(batch_size=8)
CLASSICAL = ModelSpec('classical', hidden=(4,))


class TestSchedules:

    def test_early_stopping(self) -> None:
        stopper = EarlyStopping(2)
        assert [stopper.update(score, score) for score in (1.0, 0.5, 0.7, 0.9)] == [False, False, True, True]
        assert (stopper.best_epoch, stopper.best_snapshot) == (0, 1.0)

    def test_improvement_resets_patience(self) -> None:
        stopper = EarlyStopping(2)
        assert [stopper.update(score, None) for score in (0.1, 0.0, 0.2, 0.1)] == [False, False, False, False]
        assert stopper.best_epoch == 2

    def test_patience_must_be_positive(self) -> None:
        with pytest.raises(ArgumentError):
            EarlyStopping(0)

    def test_sigma(self) -> None:
        assert exploration_sigma(0, 10, 0.05, 0.005) == 0.05
        assert exploration_sigma(9, 10, 0.05, 0.005) == pytest.approx(0.005)
        assert exploration_sigma(3, 1, 0.05, 0.005) == 0.05

    @pytest.mark.parametrize('layers, count', [(3, 30), (6, 60)])
    def test_ten_qubit_register_sizes(self, layers: int, count: int) -> None:
        actor, critic = ModelSpec('quantum', layers=layers, qubits=10).build(74, 2, 0)
        assert actor.network.ansatz.num_qubits == critic.network.ansatz.num_qubits == 10
        assert actor.network.num_parameters == critic.network.num_parameters == count


class TestTrainFold:

    def test_classical_run_is_reproducible(self, tiny_dataset: MarketDataset) -> None:
        seen = []
        first = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=2, patience=5, seed=11,
                           episode_stride=5, on_epoch=seen.append)
        second = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=2, patience=5, seed=11,
                            episode_stride=5)
        assert first.records == second.records
        assert seen == first.records
        assert [record.epoch for record in first.records] == [0, 1]
        assert all(isinstance(record, EpochRecord) and math.isfinite(record.loss) for record in first.records)
        assert first.stopped_epoch == 1
        assert first.val_sharpe == max(record.val_sharpe for record in first.records)
        np.testing.assert_array_equal(first.agent.actor.network.params, second.agent.actor.network.params)

    def test_best_snapshot_matches_best_epoch(self, tiny_dataset: MarketDataset) -> None:
        result = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=3, patience=1, seed=2, episode_stride=5)
        assert result.val_sharpe == result.records[result.best_epoch].val_sharpe
        assert result.best_actor().network.num_parameters == result.agent.actor.network.num_parameters

    def test_seeds_differ(self, tiny_dataset: MarketDataset) -> None:
        one = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, patience=1, seed=1, episode_stride=5)
        two = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, patience=1, seed=2, episode_stride=5)
        assert not np.array_equal(one.agent.actor.network.params, two.agent.actor.network.params)

    @pytest.mark.slow
    def test_quantum_epoch(self, tiny_dataset: MarketDataset) -> None:
        spec = ModelSpec('quantum', layers=1)
        cfg = AgentConfig(batch_size=4, algorithm='dqn', dqn_samples=2)
        result = train_fold(tiny_dataset, FOLD, spec, cfg, epochs=1, patience=1, seed=0, episode_stride=5)
        assert len(result.records) == 1
        assert math.isfinite(result.records[0].val_sharpe)

    @pytest.mark.slow
    def test_quantum_agent_follows_a_trend(self) -> None:
        cfg = EnvConfig(lookback=5, horizon=2, rebalance_period=10)
        spec = ModelSpec('quantum', layers=5)
        fold = expanding_folds(800)[2]
        wins = 0
        for seed in range(5):
            prices = synthetic_prices(800, 2, seed=seed, drift=np.array([2e-3, -2e-3]), volatility=0.004)
            dataset = MarketDataset(PriceTable.from_array(prices), cfg)
            assert required_qubits(dataset.state_dim) == 6
            result = train_fold(dataset, fold, spec, AgentConfig(), epochs=20, patience=5, seed=seed,
                                episode_stride=5)
            assert result.agent.actor.network.num_parameters == 30
            learned = run_backtest(ActorPolicy(result.best_actor()), dataset, fold)
            baseline = run_backtest(equal_weight_policy(2), dataset, fold)
            wins += learned.sharpe >= baseline.sharpe
        assert wins >= 4

    def test_resume_from_agent(self, tiny_dataset: MarketDataset) -> None:
        first = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, patience=1, seed=4, episode_stride=5)
        before = first.agent.actor.network.params.copy()
        resumed = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, patience=1, seed=4, episode_stride=5,
                             agent=first.agent)
        assert resumed.agent is first.agent
        assert not np.array_equal(resumed.agent.actor.network.params, before)

    def test_first_fold_of_the_default_layout(self) -> None:
        dataset = MarketDataset(PriceTable.from_array(synthetic_prices(800, 2, seed=6)), EnvConfig())
        fold = expanding_folds(800)[0]
        result = train_fold(dataset, fold, CLASSICAL, SMALL, epochs=2, patience=2, seed=0, episode_stride=5)
        assert [record.epoch for record in result.records] == [0, 1]
        assert all(math.isfinite(record.val_sharpe) for record in result.records)

    def test_short_training_span(self, tiny_dataset: MarketDataset) -> None:
        fold = FoldSplit(1, range(0, 12), range(12, 30), range(30, 60))
        with pytest.raises(StateError):
            train_fold(tiny_dataset, fold, CLASSICAL, SMALL, epochs=1)
        with pytest.raises(StateError, match='validation rows'):
            train_fold(tiny_dataset, FoldSplit(1, range(0, 64), range(64, 66), range(66, 100)), CLASSICAL, SMALL,
                       epochs=1)

    def test_invalid_arguments(self, tiny_dataset: MarketDataset) -> None:
        with pytest.raises(ArgumentError):
            train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=0)
        with pytest.raises(ArgumentError):
            train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, episode_stride=0)


class TestDivergence:

    def test_non_finite_loss_carries_the_batch(self, tiny_dataset: MarketDataset, monkeypatch: MonkeyPatch) -> None:
        monkeypatch.setattr('qrlfolio.training.critic_update', lambda *args, **kwargs: math.nan)
        with pytest.raises(NumericError) as excinfo:
            train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, episode_stride=5)
        payload = excinfo.value.payload
        assert set(payload) == {'states', 'actions', 'rewards', 'next_states', 'targets'}
        assert len(payload['states']) == SMALL.batch_size
        assert len(payload['states'][0]) == tiny_dataset.state_dim


def test_agent_serialisation(tiny_dataset: MarketDataset) -> None:
    result = train_fold(tiny_dataset, FOLD, CLASSICAL, SMALL, epochs=1, patience=1, seed=3, episode_stride=5)
    data = result.agent.to_dict()
    restored = Agent.from_dict(data, SMALL)
    assert restored.to_dict() == data
    assert len(restored.buffer) == 0
    state = tiny_dataset.state(70).values
    np.testing.assert_array_equal(restored.actor.weights(state), result.agent.actor.weights(state))
