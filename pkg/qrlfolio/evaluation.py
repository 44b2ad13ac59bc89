# -*- coding: utf-8 -*-
"""Walk-forward evaluation: folds, Sharpe ratios, baselines and backtests."""

import dataclasses
import itertools
import math
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Literal

from .agents import ActorModel, weights_from_readout
from .errors import ArgumentError
from .market import MarketDataset, clip_short_positions, net_period_return, per_period_risk_free
from .networks import QuantumNetwork
from .utils import Seed, as_matrix, as_vector, spawn_seed

__all__ = ['FoldSplit', 'expanding_folds', 'sharpe', 'BaselinePolicy', 'ActorPolicy', 'equal_weight_policy',
           'mvo_bruteforce', 'period_returns', 'BacktestResult', 'run_backtest', 'run_daily_backtest', 'FoldSummary',
           'aggregate_folds', 'SHARPE_EPSILON']

#: Added to the volatility so constant return series stay finite.
SHARPE_EPSILON = 1e-7

# relative score difference below which two grid points tie
_TIE_TOLERANCE = 1e-9

###############################################################################
# Folds


@dataclasses.dataclass(frozen=True)
class FoldSplit:
    """Row ranges of one expanding-window fold (``fold`` counts from 1)."""

    fold: int
    train: range
    val: range
    test: range

    def to_dict(self) -> Dict[str, Any]:
        return {'fold': self.fold,
                'train': [self.train.start, self.train.stop],
                'val': [self.val.start, self.val.stop],
                'test': [self.test.start, self.test.stop]}


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def expanding_folds(num_rows: int, n_folds: int = 7, val_fraction: float = 0.2,
                    min_block: int = 1) -> List[FoldSplit]:
    """Split ``num_rows`` rows into ``n_folds`` expanding-window folds.

    The timeline is cut into ``n_folds + 1`` blocks of ``num_rows // (n_folds + 1)``
    rows. Fold ``k`` trains on blocks ``1..k``, holding out the last
    ``val_fraction`` of that span for validation, and tests on block ``k + 1``.
    Trailing rows that do not fill a block are unused.

    Raises:
        ArgumentError: if a block is shorter than ``min_block`` rows

    >>> [(f.train, f.val, f.test) for f in expanding_folds(800)][0]
    (range(0, 80), range(80, 100), range(100, 200))

    """
    if n_folds < 1:
        raise ArgumentError('need at least one fold, got %d' % n_folds)
    if not 0.0 <= val_fraction < 1.0:
        raise ArgumentError('validation fraction must lie in [0, 1), got %r' % val_fraction)
    block = num_rows // (n_folds + 1)
    if block < max(1, min_block):
        raise ArgumentError('%d rows give %d-row blocks for %d folds; at least %d rows per block are needed'
                            % (num_rows, block, n_folds, max(1, min_block)))
    folds = []
    for fold in range(1, n_folds + 1):
        span = fold * block
        held_out = _round_half_up(val_fraction * span)
        folds.append(FoldSplit(fold, range(0, span - held_out), range(span - held_out, span),
                               range(span, span + block)))
    return folds


###############################################################################
# Metrics


def sharpe(returns: object, risk_free: float = 0.0, epsilon: float = SHARPE_EPSILON) -> float:
    """``(mean - r_f) / (std + epsilon)`` with the ``n - 1`` standard deviation.

    Raises:
        ArgumentError: on fewer than two returns

    >>> round(sharpe([0.2, 0.0], 0.0418), 5)
    0.41154

    """
    values = as_vector(returns, 'returns')
    if values.shape[0] < 2:
        raise ArgumentError('Sharpe ratio needs at least two returns, got %d' % values.shape[0])
    return float((values.mean() - risk_free) / (values.std(ddof=1) + epsilon))


###############################################################################
# Policies


class BaselinePolicy:
    """Static allocation (``equal_weights`` or ``mvo``)."""

    def __init__(self, kind: Literal['equal_weights', 'mvo'], weights: object) -> None:
        values = as_vector(weights, 'weights')
        if abs(values.sum() - 1.0) > 1e-9:
            raise ArgumentError('static weights sum to %.12g, not 1' % values.sum())
        self.kind = kind
        self.weights = values

    def decide(self, dataset: MarketDataset, t: int) -> np.ndarray:
        return self.weights.copy()


class ActorPolicy:
    """A trained actor run without exploration noise.

    With ``shots`` set, a quantum actor's readouts are estimated from that
    many simulated measurements, drawing decision ``t`` from stream
    ``(seed, t)``.

    """

    def __init__(self, actor: ActorModel, shots: Optional[int] = None, seed: Seed = 0) -> None:
        if shots is not None and shots < 1:
            raise ArgumentError('shots must be at least 1, got %d' % shots)
        self.actor = actor
        self.shots = shots
        self.seed = seed
        self.kind = actor.kind

    def decide(self, dataset: MarketDataset, t: int) -> np.ndarray:
        state = dataset.state(t).values
        network = self.actor.network
        if self.shots is not None and isinstance(network, QuantumNetwork):
            readout = network.forward_sampled(state, self.shots, spawn_seed(self.seed, t))[0]
        else:
            readout = network.forward(state)[0]
        return weights_from_readout(readout)


def equal_weight_policy(num_assets: int) -> BaselinePolicy:
    """``1/N`` in every asset."""
    if num_assets < 1:
        raise ArgumentError('need at least one asset')
    return BaselinePolicy('equal_weights', np.full(num_assets, 1.0 / num_assets))


def _grid_units(step: float) -> int:
    units = 1.0 / step
    if step <= 0 or abs(units - round(units)) > 1e-9:
        raise ArgumentError('grid step must divide 1, got %r' % step)
    return int(round(units))


def _admissible_points(num_assets: int, units: int, low: int, high: int, cap: int) -> Iterator[Tuple[int, ...]]:
    """Integer unit vectors in ``[low, high]**N`` summing to ``units`` with shorts ``<= cap``."""
    for head in itertools.product(range(low, high + 1), repeat=num_assets - 1):
        last = units - sum(head)
        if low <= last <= high:
            point = head + (last,)
            if -sum(value for value in point if value < 0) <= cap:
                yield point


def mvo_bruteforce(train_returns: object, grid_step: float = 0.25, bounds: Tuple[float, float] = (-1.0, 2.0),
                   risk_free: float = 0.0, short_cap: float = 1.0, max_exhaustive_assets: int = 4) -> BaselinePolicy:
    """Static weights maximising the in-sample Sharpe ratio on a grid.

    Every admissible grid point (weights in ``bounds``, summing to one, shorts
    at most ``short_cap``) is scored for up to ``max_exhaustive_assets``
    assets. Larger universes start from the grid point nearest equal weights
    and apply the best single-step transfer between two assets until no
    transfer improves the score. Ties (relative ``1e-9``) go to the point
    closest to equal weights in L1 distance, then to the lexicographically
    smallest weights.

    Args:
        train_returns: ``(K, N)`` per-period asset returns
        grid_step (float): weight increment; must divide 1
        bounds (Tuple[float, float]): per-asset weight range
        risk_free (float): per-period risk-free rate
        short_cap (float): largest total short exposure
        max_exhaustive_assets (int): largest universe scored exhaustively

    Raises:
        ArgumentError: if no grid point is admissible

    """
    returns = as_matrix(train_returns, 'train returns')
    if returns.shape[0] < 2:
        raise ArgumentError('MVO needs at least two return periods, got %d' % returns.shape[0])
    num_assets = returns.shape[1]
    units = _grid_units(grid_step)
    low = int(math.ceil(bounds[0] * units - 1e-9))
    high = int(math.floor(bounds[1] * units + 1e-9))
    cap = int(math.floor(short_cap * units + 1e-9))
    equal = np.full(num_assets, 1.0 / num_assets)

    def rank(point: Tuple[int, ...]) -> Tuple[float, float, Tuple[int, ...]]:
        weights = np.array(point) / units
        return sharpe(returns @ weights, risk_free), float(np.abs(weights - equal).sum()), point

    def better(candidate: Tuple[float, float, Tuple[int, ...]],
               incumbent: Optional[Tuple[float, float, Tuple[int, ...]]]) -> bool:
        if incumbent is None:
            return True
        margin = _TIE_TOLERANCE * max(1.0, abs(incumbent[0]))
        if candidate[0] > incumbent[0] + margin:
            return True
        if candidate[0] < incumbent[0] - margin:
            return False
        return candidate[1:] < incumbent[1:]

    best = None  # type: Optional[Tuple[float, float, Tuple[int, ...]]]
    if num_assets <= max_exhaustive_assets:
        for point in _admissible_points(num_assets, units, low, high, cap):
            scored = rank(point)
            if better(scored, best):
                best = scored
    else:
        start = [units // num_assets] * num_assets
        for index in range(units - sum(start)):
            start[index] += 1
        if all(low <= value <= high for value in start):
            best = rank(tuple(start))
        while best is not None:
            incumbent = best
            for source, sink in itertools.permutations(range(num_assets), 2):
                point = list(incumbent[2])
                point[source] -= 1
                point[sink] += 1
                if not (low <= point[source] and point[sink] <= high):
                    continue
                if -sum(value for value in point if value < 0) > cap:
                    continue
                scored = rank(tuple(point))
                if better(scored, best):
                    best = scored
            if best is incumbent:
                break
    if best is None:
        raise ArgumentError('no admissible grid point for step %r and bounds %r' % (grid_step, bounds))
    return BaselinePolicy('mvo', np.array(best[2]) / units)


def period_returns(dataset: MarketDataset, start: int, stop: int) -> np.ndarray:
    """Per-asset returns of consecutive rebalance periods inside rows ``[start, stop)``."""
    period = dataset.cfg.rebalance_period
    rows = [dataset.period_returns(t) for t in range(start, stop - period, period)]
    return np.array(rows).reshape(len(rows), dataset.num_assets)


###############################################################################
# Backtesting


@dataclasses.dataclass
class BacktestResult:
    """Decisions and net returns of one policy on one test range.

    Attributes:
        indices: decision rows
        weights: ``(K, N)`` allocations, one row per decision
        returns: ``(K,)`` net period returns
        sharpe: Sharpe ratio of ``returns`` against ``risk_free``
        turnover: mean total absolute weight change per decision
        risk_free: per-period risk-free rate used
        degenerate: whether the returns have zero spread
        period: rows between decisions
        clipped: decisions whose shorts were clipped

    """

    indices: List[int]
    weights: np.ndarray
    returns: np.ndarray
    sharpe: float
    turnover: float
    risk_free: float
    degenerate: bool
    period: int
    clipped: int = 0

    def equity_curve(self) -> List[Tuple[int, float]]:
        """``(row, growth of one unit)`` at the first decision and after every period."""
        points = [(self.indices[0], 1.0)]
        value = 1.0
        for index, period_return in zip(self.indices, self.returns):
            value *= math.exp(period_return)
            points.append((index + self.period, value))
        return points

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BacktestResult):
            return NotImplemented
        return (self.indices == other.indices and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.returns, other.returns) and self.sharpe == other.sharpe
                and self.turnover == other.turnover and self.degenerate == other.degenerate)


def run_backtest(policy: Any, dataset: MarketDataset, fold: FoldSplit) -> BacktestResult:
    """Run ``policy`` over the fold's test rows at the rebalance cadence.

    Decisions happen at ``t = max(test.start, L), t + P, ...`` while
    ``t + P < test.stop``; each earns :func:`~qrlfolio.market.net_period_return`
    of the asset log returns from ``t`` to ``t + P``, starting from an empty
    portfolio.

    Raises:
        ArgumentError: if the test range holds fewer than two decisions

    """
    cfg = dataset.cfg
    period = cfg.rebalance_period
    first = max(fold.test.start, cfg.lookback)
    stop = min(fold.test.stop, dataset.num_rows)
    indices = list(range(first, stop - period, period))
    if len(indices) < 2:
        raise ArgumentError('fold %d test range [%d, %d) holds %d rebalance periods, need 2'
                            % (fold.fold, fold.test.start, fold.test.stop, len(indices)))
    previous = np.zeros(dataset.num_assets)
    weights, returns, turnover = [], [], []
    clipped_count = 0
    for t in indices:
        chosen, clipped = clip_short_positions(policy.decide(dataset, t))
        clipped_count += clipped
        returns.append(net_period_return(chosen, previous, dataset.period_returns(t), cfg.cost_rate,
                                         cfg.cost_convention))
        turnover.append(float(np.abs(chosen - previous).sum()))
        weights.append(chosen)
        previous = chosen
    series = np.array(returns)
    risk_free = per_period_risk_free(cfg.risk_free, period, cfg.trading_days)
    return BacktestResult(indices, np.array(weights), series, sharpe(series, risk_free),
                          float(np.mean(turnover)), risk_free, bool(series.std(ddof=1) < 1e-12), period,
                          clipped_count)


def run_daily_backtest(policy: Any, dataset: MarketDataset, span: range) -> BacktestResult:
    """Mark ``policy``'s rebalance decisions to market on every day of ``span``.

    Decisions happen at ``t = max(span.start, L), t + P, ...`` as in
    :func:`run_backtest`, but each allocation earns the daily asset log
    returns until the next decision or the end of the span, and its turnover
    cost is charged on its first day. Spans shorter than two rebalance periods
    still score, which is what validation blocks of early folds need.

    The result has one entry per day (``period`` is 1) and its Sharpe ratio
    is taken against the daily risk-free rate.

    Raises:
        ArgumentError: if the span holds fewer than two daily returns

    >>> from qrlfolio.market import EnvConfig, PriceTable
    >>> prices = np.exp(np.cumsum(np.full((12, 2), 0.01), axis=0))
    >>> dataset = MarketDataset(PriceTable.from_array(prices), EnvConfig(lookback=2, horizon=1, rebalance_period=3))
    >>> result = run_daily_backtest(equal_weight_policy(2), dataset, range(4, 10))
    >>> result.indices, result.period
    ([4, 5, 6, 7, 8], 1)

    """
    cfg = dataset.cfg
    first = max(span.start, cfg.lookback)
    stop = min(span.stop, dataset.num_rows)
    days = list(range(first, stop - 1))
    if len(days) < 2:
        raise ArgumentError('rows [%d, %d) hold %d daily returns after the lookback, need 2'
                            % (span.start, span.stop, len(days)))
    previous = held = np.zeros(dataset.num_assets)
    weights, returns, turnover = [], [], []
    clipped_count = 0
    for day in days:
        if (day - first) % cfg.rebalance_period == 0:
            held, clipped = clip_short_positions(policy.decide(dataset, day))
            clipped_count += clipped
            turnover.append(float(np.abs(held - previous).sum()))
        returns.append(net_period_return(held, previous, dataset.returns[day], cfg.cost_rate, cfg.cost_convention))
        weights.append(held)
        previous = held
    series = np.array(returns)
    risk_free = per_period_risk_free(cfg.risk_free, 1, cfg.trading_days)
    return BacktestResult(days, np.array(weights), series, sharpe(series, risk_free), float(np.mean(turnover)),
                          risk_free, bool(series.std(ddof=1) < 1e-12), 1, clipped_count)


@dataclasses.dataclass(frozen=True)
class FoldSummary:
    """Mean and ``n - 1`` standard deviation of fold Sharpe ratios."""

    mean: float
    std: Optional[float]
    per_fold: Tuple[float, ...]


def aggregate_folds(results: Sequence[BacktestResult]) -> FoldSummary:
    """Reduce fold results in the order given; the spread is absent for one fold."""
    if not results:
        raise ArgumentError('no fold results to aggregate')
    values = np.array([result.sharpe for result in results])
    spread = float(values.std(ddof=1)) if values.shape[0] > 1 else None
    return FoldSummary(float(values.mean()), spread, tuple(float(value) for value in values))
