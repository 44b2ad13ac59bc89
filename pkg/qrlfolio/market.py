# -*- coding: utf-8 -*-
"""Market data, forecasts, states, rewards and the rebalancing environment.

Price files are delimited text with a ``date,TICKER1,...,TICKERn`` header,
ISO-8601 dates and one row per trading day. Row ``t`` of a price table is
trading day ``t``; return row ``t`` is ``ln(p[t+1] / p[t])``.

The state at index ``t`` is the lookback window ``p[t-L .. t-1]`` followed by
an ``F``-step forecast, both divided by ``p[t-L]`` per asset and laid out
asset-major within each block. Forecasts are fitted on rows ``<= t`` only.

"""

import dataclasses
import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from typing_extensions import Literal

from .errors import ArgumentError, DataError, StateError
from .utils import as_matrix, as_vector

__all__ = ['CostConvention', 'PriceTable', 'load_prices', 'write_prices', 'log_returns', 'AssetForecast',
           'ForecastModel', 'fit_forecaster', 'forecast', 'EnvConfig', 'MarketState', 'build_state', 'reward',
           'net_period_return', 'clip_short_positions', 'per_period_risk_free', 'persistence_forecaster',
           'MarketDataset', 'MarketEnv', 'MAX_AR_ORDER', 'UNIT_ROOT_THRESHOLD']

logger = logging.getLogger(__name__)

CostConvention = Literal['literal', 'subtractive']

#: Largest autoregressive order searched.
MAX_AR_ORDER = 5

#: Lag-one autocorrelation of demeaned levels at or above which the level
#: model is ruled out and the series is differenced.
UNIT_ROOT_THRESHOLD = 0.95

#: Allowed deviation of an action's weight sum from one.
WEIGHT_TOLERANCE = 1e-9

# residual variance floor, relative to the series scale
_VARIANCE_FLOOR = 1e-10

###############################################################################
# Price Tables


class PriceTable:
    """Validated daily closing prices.

    Args:
        dates (Sequence[str]): strictly increasing ISO dates
        tickers (Sequence[str]): asset names
        prices: ``(T, N)`` array of prices

    """

    __slots__ = ('dates', 'tickers', 'prices')

    def __init__(self, dates: Sequence[str], tickers: Sequence[str], prices: object) -> None:
        values = np.array(prices, dtype=float)
        if values.ndim != 2:
            raise DataError('price table must be two-dimensional')
        if values.shape != (len(dates), len(tickers)):
            raise DataError('price table shape %r does not match %d dates and %d tickers'
                            % (values.shape, len(dates), len(tickers)))
        if not tickers:
            raise DataError('price table has no tickers')
        for index in range(1, len(dates)):
            if dates[index] <= dates[index - 1]:
                raise DataError('dates are not strictly increasing', date=dates[index])
        values.setflags(write=False)
        self.dates = tuple(dates)  # type: Tuple[str, ...]
        self.tickers = tuple(tickers)  # type: Tuple[str, ...]
        self.prices = values

    @classmethod
    def from_array(cls, prices: object, tickers: Optional[Sequence[str]] = None,
                   start: str = '2000-01-03') -> 'PriceTable':
        """Wrap an array, labelling rows with consecutive business days."""
        values = as_matrix(prices, 'prices')
        if values.shape[0] == 1 and np.ndim(prices) == 1:
            values = values.T
        names = list(tickers) if tickers is not None else ['A%d' % index for index in range(values.shape[1])]
        dates = [stamp.strftime('%Y-%m-%d') for stamp in pd.bdate_range(start, periods=values.shape[0])]
        return cls(dates, names, values)

    @property
    def num_rows(self) -> int:
        return self.prices.shape[0]

    @property
    def num_assets(self) -> int:
        return self.prices.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.prices, index=pd.Index(self.dates, name='date'), columns=list(self.tickers))


def load_prices(path: Union[str, os.PathLike]) -> PriceTable:
    """Read and validate a price file; rows are sorted by date.

    Raises:
        DataError: on an unreadable or empty file, a bad header, a missing or malformed cell,
            a non-positive price, or duplicate dates

    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as error:
        raise DataError('price file %s is empty' % os.fspath(path)) from error
    except pd.errors.ParserError as error:
        raise DataError('price file %s is malformed: %s' % (os.fspath(path), error)) from error
    except OSError as error:
        raise DataError('cannot read price file %s: %s' % (os.fspath(path), error.strerror)) from None
    columns = [str(column).strip() for column in frame.columns]
    if len(columns) < 2 or columns[0].lower() != 'date':
        raise DataError('header must read date,TICKER1,...,TICKERn')
    if frame.empty:
        raise DataError('price file %s has no rows' % os.fspath(path))
    tickers = columns[1:]

    rows = []  # type: List[Tuple[pd.Timestamp, str, List[float]]]
    for position, record in enumerate(frame.itertuples(index=False, name=None)):
        line = position + 2
        raw_date = str(record[0]).strip()
        try:
            stamp = pd.to_datetime(raw_date, format='%Y-%m-%d')
        except (ValueError, TypeError) as error:
            raise DataError('unparseable date %r' % raw_date, row=line) from error
        values = []
        for ticker, cell in zip(tickers, record[1:]):
            # short rows come back as NaN floats
            text = '' if isinstance(cell, float) else str(cell).strip()
            if not text:
                raise DataError('missing price', date=raw_date, ticker=ticker, row=line)
            try:
                value = float(text)
            except ValueError as error:
                raise DataError('malformed price %r' % text, date=raw_date, ticker=ticker, row=line) from error
            if not math.isfinite(value) or value <= 0:
                raise DataError('price must be positive and finite, got %r' % text,
                                date=raw_date, ticker=ticker, row=line)
            values.append(value)
        rows.append((stamp, stamp.strftime('%Y-%m-%d'), values))

    rows.sort(key=lambda item: item[0])
    for index in range(1, len(rows)):
        if rows[index][0] == rows[index - 1][0]:
            raise DataError('duplicate date', date=rows[index][1])
    return PriceTable([item[1] for item in rows], tickers, [item[2] for item in rows])


def write_prices(table: PriceTable, path: Union[str, os.PathLike]) -> None:
    """Write the canonical form: ``\\n`` line endings, shortest round-trip floats."""
    lines = [','.join(('date',) + table.tickers)]
    for date, row in zip(table.dates, table.prices):
        lines.append(','.join([date] + [repr(float(value)) for value in row]))
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write('\n'.join(lines) + '\n')


def log_returns(prices: Union[PriceTable, np.ndarray]) -> np.ndarray:
    """``(T-1, N)`` log returns ``ln(p[t+1] / p[t])``.

    Raises:
        DataError: on fewer than two rows or a non-positive price

    """
    values = prices.prices if isinstance(prices, PriceTable) else np.asarray(prices, dtype=float)
    if values.ndim == 1:
        values = values[:, np.newaxis]
    if values.shape[0] < 2:
        raise DataError('need at least two price rows for returns')
    if np.any(values <= 0):
        row, column = np.argwhere(values <= 0)[0]
        raise DataError('non-positive price %r' % values[row, column], row=int(row))
    return np.diff(np.log(values), axis=0)


###############################################################################
# Forecasting


@dataclasses.dataclass(frozen=True)
class AssetForecast:
    """AR(p) model on the ``d``-times differenced series of one asset.

    Attributes:
        order: AR order ``p`` (0 for the persistence model)
        diff: differencing ``d`` in ``{0, 1}``
        intercept: constant term
        coefficients: ``phi_1 .. phi_p``
        aic: information criterion of the selected fit
        tail: last ``p + d`` price levels, oldest first

    """

    order: int
    diff: int
    intercept: float
    coefficients: Tuple[float, ...]
    aic: float
    tail: Tuple[float, ...]

    def predict(self, horizon: int) -> np.ndarray:
        levels = list(self.tail)
        if self.order == 0:
            return np.full(horizon, levels[-1])
        series = list(np.diff(levels)) if self.diff else list(levels)
        result = []
        for _ in range(horizon):
            lags = series[::-1][:self.order]
            value = self.intercept + float(np.dot(self.coefficients, lags))
            series.append(value)
            levels.append(levels[-1] + value if self.diff else value)
            result.append(levels[-1])
        return np.array(result)


@dataclasses.dataclass(frozen=True)
class ForecastModel:
    """Per-asset forecasters plus the last row index they were fitted on."""

    assets: Tuple[AssetForecast, ...]
    fitted_through: int


def _lag_one_autocorrelation(levels: np.ndarray) -> float:
    centred = levels - levels.mean()
    denominator = float(np.dot(centred, centred))
    if denominator <= 0:
        return 0.0
    return float(np.dot(centred[1:], centred[:-1]) / denominator)


def _fit_order(levels: np.ndarray, order: int, diff: int) -> Tuple[float, np.ndarray, float]:
    """Least-squares AR fit on the common target rows ``MAX_AR_ORDER + 1 ..``."""
    series = np.diff(levels) if diff else levels
    shift = diff
    first = MAX_AR_ORDER + 1 - shift
    targets = series[first:]
    design = np.column_stack([np.ones(targets.shape[0])]
                             + [series[first - lag:series.shape[0] - lag] for lag in range(1, order + 1)])
    solution = np.linalg.lstsq(design, targets, rcond=None)[0]
    residual = targets - design @ solution
    scale = max(1.0, float(np.mean(np.abs(levels))))
    variance = max(float(np.mean(residual ** 2)), (_VARIANCE_FLOOR * scale) ** 2)
    aic = targets.shape[0] * math.log(variance) + 2 * (order + 1)
    return float(solution[0]), solution[1:], aic


def _fit_asset(levels: np.ndarray) -> AssetForecast:
    candidates = [1]
    if _lag_one_autocorrelation(levels) < UNIT_ROOT_THRESHOLD:
        candidates.insert(0, 0)
    best = None  # type: Optional[AssetForecast]
    for diff in candidates:
        for order in range(1, MAX_AR_ORDER + 1):
            intercept, coefficients, aic = _fit_order(levels, order, diff)
            if best is None or aic < best.aic:
                tail = tuple(float(value) for value in levels[levels.shape[0] - order - diff:])
                best = AssetForecast(order, diff, intercept, tuple(float(c) for c in coefficients), aic, tail)
    assert best is not None
    return best


def fit_forecaster(history: object, min_history: int = 30, fitted_through: Optional[int] = None) -> ForecastModel:
    """Fit one AR model per asset.

    For every asset, AR(p) for ``p`` in ``1..5`` is fitted by least squares on
    the levels (``d=0``) and on first differences (``d=1``) over the same target
    rows, and the lowest AIC wins; ties keep ``d=0`` and the smaller ``p``. Levels
    whose lag-one autocorrelation reaches :data:`UNIT_ROOT_THRESHOLD` are only
    fitted differenced.

    Args:
        history: ``(T, N)`` prices (or a 1-D series)
        min_history (int): shortest accepted history
        fitted_through (Optional[int]): row index of the last history row,
            ``T - 1`` when omitted

    Raises:
        ArgumentError: if ``T < min_history``

    """
    values = np.asarray(history, dtype=float)
    if values.ndim == 1:
        values = values[:, np.newaxis]
    if values.ndim != 2 or not np.all(np.isfinite(values)):
        raise ArgumentError('history must be a finite (T, N) array')
    if values.shape[0] < max(min_history, MAX_AR_ORDER + 3):
        raise ArgumentError('forecaster needs at least %d rows of history, got %d'
                            % (max(min_history, MAX_AR_ORDER + 3), values.shape[0]))
    assets = tuple(_fit_asset(values[:, column]) for column in range(values.shape[1]))
    return ForecastModel(assets, values.shape[0] - 1 if fitted_through is None else fitted_through)


def persistence_forecaster(history: object, fitted_through: Optional[int] = None) -> ForecastModel:
    """Forecast the last observed price for every future step."""
    values = as_matrix(history, 'history')
    if np.ndim(history) == 1:
        values = values.T
    assets = tuple(AssetForecast(0, 0, 0.0, (), math.nan, (float(value),)) for value in values[-1])
    return ForecastModel(assets, values.shape[0] - 1 if fitted_through is None else fitted_through)


def forecast(model: ForecastModel, horizon: int) -> np.ndarray:
    """``(N, horizon)`` iterated one-step-ahead price forecasts."""
    if horizon < 0:
        raise ArgumentError('horizon must be non-negative, got %d' % horizon)
    if horizon == 0:
        return np.zeros((len(model.assets), 0))
    return np.array([asset.predict(horizon) for asset in model.assets])


###############################################################################
# States & Rewards


@dataclasses.dataclass(frozen=True)
class EnvConfig:
    """Environment and accounting constants.

    Attributes:
        lookback: window length ``L`` in days
        horizon: forecast length ``F`` in days
        rebalance_period: days between decisions
        cost_rate: transaction cost per unit turnover
        eta: risk preference, applied literally as ``w.mu - eta * w.Sigma.w``
        risk_free: annualised risk-free rate
        trading_days: trading days per year
        cost_convention: ``literal`` or ``subtractive``
        forecast_min_history: rows needed before the AR forecaster is used

    """

    lookback: int = 30
    horizon: int = 7
    rebalance_period: int = 30
    cost_rate: float = 0.0015
    eta: float = 0.5
    risk_free: float = 0.0418
    trading_days: int = 252
    cost_convention: CostConvention = 'literal'
    forecast_min_history: int = 30

    def __post_init__(self) -> None:
        if min(self.lookback, self.horizon, self.rebalance_period) < 1:
            raise ArgumentError('lookback, horizon and rebalance period must be at least 1')
        if self.cost_rate < 0:
            raise ArgumentError('cost rate must be non-negative')
        if self.cost_convention not in ('literal', 'subtractive'):
            raise ArgumentError('unknown cost convention %r' % (self.cost_convention,))
        if self.trading_days < 1:
            raise ArgumentError('trading days per year must be positive')

    @property
    def min_block(self) -> int:
        """Smallest data span that holds one full decision."""
        return self.lookback + self.horizon + self.rebalance_period


@dataclasses.dataclass(frozen=True)
class MarketState:
    """State vector at row ``index`` and the last row its forecast saw."""

    values: np.ndarray
    index: int
    fitted_through: int


def build_state(prices: Union[PriceTable, np.ndarray], t: int, cfg: EnvConfig) -> MarketState:
    """Normalised lookback window plus forecasts at row ``t``.

    Raises:
        ArgumentError: if ``t < L`` or ``t`` is past the last row

    """
    values = prices.prices if isinstance(prices, PriceTable) else np.asarray(prices, dtype=float)
    if values.ndim == 1:
        values = values[:, np.newaxis]
    if t < cfg.lookback or t >= values.shape[0]:
        raise ArgumentError('state index %d outside [%d, %d)' % (t, cfg.lookback, values.shape[0]))
    base = values[t - cfg.lookback]
    window = values[t - cfg.lookback:t] / base
    history = values[:t + 1]
    if history.shape[0] >= max(cfg.forecast_min_history, MAX_AR_ORDER + 3):
        model = fit_forecaster(history, cfg.forecast_min_history, fitted_through=t)
    else:
        model = persistence_forecaster(history, fitted_through=t)
    if model.fitted_through > t:
        raise StateError('forecaster saw row %d while building the state at %d' % (model.fitted_through, t))
    predicted = forecast(model, cfg.horizon) / base[:, np.newaxis]
    state = np.concatenate([window.T.ravel(), predicted.ravel()])
    return MarketState(state, t, model.fitted_through)


def reward(weights: object, returns_window: object, eta: float) -> float:
    """``w.mu - eta * w.Sigma.w`` over a window of log returns.

    ``mu`` holds the column means and ``Sigma`` the sample covariance
    (denominator ``rows - 1``).

    Raises:
        ArgumentError: on fewer than two rows or mismatched widths

    """
    w = as_vector(weights, 'weights')
    window = as_matrix(returns_window, 'returns window')
    if np.ndim(returns_window) == 1:
        window = window.T
    if window.shape[0] < 2:
        raise ArgumentError('reward needs at least two return rows, got %d' % window.shape[0])
    if window.shape[1] != w.shape[0]:
        raise ArgumentError('%d weights for %d assets' % (w.shape[0], window.shape[1]))
    mean = window.mean(axis=0)
    covariance = np.atleast_2d(np.cov(window, rowvar=False, ddof=1))
    return float(w @ mean - eta * (w @ covariance @ w))


def net_period_return(weights: object, previous: object, asset_returns: object, cost_rate: float,
                      convention: CostConvention = 'literal') -> float:
    """Portfolio return of one period net of transaction costs.

    ``literal``: ``sum_i r_i * (w_i - c * |w_i - w_prev_i|)``.
    ``subtractive``: ``sum_i r_i * w_i - c * sum_i |w_i - w_prev_i|``.

    >>> round(net_period_return([0.6, 0.4], [0.5, 0.5], [0.02, -0.01], 0.0015), 12)
    0.0079985

    """
    w = as_vector(weights, 'weights')
    prev = as_vector(previous, 'previous weights')
    r = as_vector(asset_returns, 'asset returns')
    if not w.shape == prev.shape == r.shape:
        raise ArgumentError('weights, previous weights and returns differ in length')
    turnover = np.abs(w - prev)
    if convention == 'literal':
        return float(np.sum(r * (w - cost_rate * turnover)))
    if convention == 'subtractive':
        return float(np.sum(r * w) - cost_rate * np.sum(turnover))
    raise ArgumentError('unknown cost convention %r' % (convention,))


def clip_short_positions(weights: object, cap: float = 1.0) -> Tuple[np.ndarray, bool]:
    """Enforce ``sum_i max(0, -w_i) <= cap``.

    Violating allocations have their shorts scaled to total ``-cap`` and their
    longs to ``1 + cap``, so the weights still sum to one.

    Returns:
        Tuple[numpy.ndarray, bool]: the weights and whether they were clipped

    """
    w = as_vector(weights, 'weights')
    short = float(np.sum(np.maximum(0.0, -w)))
    if short <= cap + WEIGHT_TOLERANCE:
        return w, False
    negative = w < 0
    long = float(np.sum(w[~negative]))
    clipped = np.where(negative, w * (cap / short), w * ((1.0 + cap) / long))
    return clipped, True


def per_period_risk_free(annual: float, period: int, trading_days: int = 252) -> float:
    """Simple conversion ``annual * period / trading_days``."""
    return annual * period / trading_days


###############################################################################
# Dataset & Environment


class MarketDataset:
    """Prices, returns and cached states for one price table.

    Args:
        table (PriceTable): validated prices
        cfg (EnvConfig): environment constants

    """

    def __init__(self, table: PriceTable, cfg: EnvConfig) -> None:
        if table.num_rows < cfg.lookback + cfg.horizon + 2:
            raise DataError('%d price rows cannot hold a %d-day window and a %d-day forecast'
                            % (table.num_rows, cfg.lookback, cfg.horizon))
        self.table = table
        self.cfg = cfg
        self.prices = table.prices
        self.returns = log_returns(table)
        self._states = {}  # type: Dict[int, MarketState]

    @property
    def num_rows(self) -> int:
        return self.prices.shape[0]

    @property
    def num_assets(self) -> int:
        return self.prices.shape[1]

    @property
    def state_dim(self) -> int:
        return self.num_assets * (self.cfg.lookback + self.cfg.horizon)

    def state(self, t: int) -> MarketState:
        if t not in self._states:
            self._states[t] = build_state(self.prices, t, self.cfg)
        return self._states[t]

    def reward_window(self, t: int) -> np.ndarray:
        """Return rows ``t-L .. t+F-1``, i.e. prices ``t-L .. t+F``."""
        if t < self.cfg.lookback or t + self.cfg.horizon >= self.num_rows:
            raise ArgumentError('no complete reward window at %d' % t)
        return self.returns[t - self.cfg.lookback:t + self.cfg.horizon]

    def period_returns(self, t: int) -> np.ndarray:
        """Per-asset log return from row ``t`` to ``t + rebalance_period``."""
        stop = t + self.cfg.rebalance_period
        if t < 0 or stop >= self.num_rows:
            raise ArgumentError('no complete rebalance period at %d' % t)
        return np.log(self.prices[stop] / self.prices[t])


class MarketEnv:
    """Rebalancing environment over rows ``[start, end)`` of a dataset.

    A decision at ``t`` is valid when ``t >= max(start, L)`` and ``t + F < end``.
    Each step earns :func:`reward` on the window around ``t`` and moves to
    ``t + rebalance_period``; the episode is done when no further decision
    would be valid after the next one.

    """

    def __init__(self, dataset: MarketDataset, start: int = 0, end: Optional[int] = None) -> None:
        self.dataset = dataset
        self.cfg = dataset.cfg
        self.start = start
        self.end = dataset.num_rows if end is None else end
        if not 0 <= self.start < self.end <= dataset.num_rows:
            raise ArgumentError('invalid environment span [%d, %d)' % (self.start, self.end))
        self.index = -1
        self.done = True
        self.clip_count = 0

    def valid(self, t: int) -> bool:
        return t >= max(self.start, self.cfg.lookback) and t + self.cfg.horizon < self.end

    def first_index(self) -> int:
        return max(self.start, self.cfg.lookback)

    def reset(self, t: Optional[int] = None) -> MarketState:
        """Start an episode at ``t`` (the first valid index when omitted).

        Raises:
            StateError: if fewer than two decisions fit after ``t``

        """
        index = self.first_index() if t is None else t
        if not (self.valid(index) and self.valid(index + self.cfg.rebalance_period)):
            raise StateError('an episode starting at %d does not fit [%d, %d)' % (index, self.start, self.end))
        self.index = index
        self.done = False
        return self.dataset.state(index)

    def step(self, action: object) -> Tuple[MarketState, float, bool]:
        """Apply ``action`` at the current index.

        Raises:
            StateError: if the episode is over
            ArgumentError: if the weights do not sum to one

        """
        if self.done:
            raise StateError('episode is done; call reset first')
        weights = as_vector(action, 'action')
        if weights.shape[0] != self.dataset.num_assets:
            raise ArgumentError('%d weights for %d assets' % (weights.shape[0], self.dataset.num_assets))
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ArgumentError('action weights sum to %.12g, not 1' % weights.sum())
        weights, clipped = clip_short_positions(weights)
        if clipped:
            self.clip_count += 1
            logger.warning('clipped short positions at row %d (%d so far)', self.index, self.clip_count)
        value = reward(weights, self.dataset.reward_window(self.index), self.cfg.eta)
        self.index += self.cfg.rebalance_period
        self.done = not self.valid(self.index + self.cfg.rebalance_period)
        return self.dataset.state(self.index), value, self.done
