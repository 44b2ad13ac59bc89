import os
import sys

import numpy as np
import pytest
from bpc_utils.typing import TYPE_CHECKING

from qrlfolio import cli
from qrlfolio.config import RunConfig, config_from_mapping
from qrlfolio.market import EnvConfig, MarketDataset, PriceTable

from .testutils import TINY_ROWS, TINY_SETTINGS, MonkeyPatch, synthetic_prices, write_price_file

if TYPE_CHECKING:
    from bpc_utils.typing import Generator


@pytest.fixture(scope='class')
def monkeypatch_class() -> 'Generator[MonkeyPatch, None, None]':
    """Class-scoped monkeypatch fixture."""
    mpatch = MonkeyPatch()
    yield mpatch
    mpatch.undo()


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: MonkeyPatch) -> None:
    """Keep option environment variables of the host out of the tests."""
    for name in ('QRLFOLIO_QUIET', 'QRLFOLIO_THREADS', 'QRLFOLIO_LOG'):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(autouse=True)
def fresh_log_stream(monkeypatch: MonkeyPatch) -> None:
    """Point the module-level CLI log handler at this test's stderr, not a closed capture stream."""
    monkeypatch.setattr(cli._handler, 'stream', sys.stderr)


@pytest.fixture(scope='session')
def tiny_prices() -> np.ndarray:
    """Two synthetic assets over :data:`TINY_ROWS` trading days."""
    return synthetic_prices(TINY_ROWS, 2, seed=7)


@pytest.fixture
def price_file(tmp_path: 'os.PathLike[str]', tiny_prices: np.ndarray) -> str:
    return write_price_file(os.path.join(str(tmp_path), 'prices.csv'), tiny_prices)


@pytest.fixture
def tiny_config(price_file: str) -> RunConfig:
    settings = dict(TINY_SETTINGS)
    settings['data.path'] = price_file
    return config_from_mapping(settings)


@pytest.fixture
def tiny_dataset(tiny_prices: np.ndarray) -> MarketDataset:
    cfg = EnvConfig(lookback=5, horizon=2, rebalance_period=5)
    return MarketDataset(PriceTable.from_array(tiny_prices), cfg)
