# -*- coding: utf-8 -*-
"""Command line interface for qrlfolio."""

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Any, Dict, Generator, List, NoReturn, Optional, Sequence, Tuple

import pandas as pd
from bpc_utils import TaskLock, first_non_none, map_tasks, parse_boolean_state, parse_positive_integer

from . import __version__
from .checkpoint import Checkpoint, FoldState, load_checkpoint, save_checkpoint
from .config import RunConfig, default_config, load_config, plan_folds, write_config
from .errors import ConfigError, DataError, NumericError, QrlfolioError
from .evaluation import (ActorPolicy, BacktestResult, FoldSplit, FoldSummary, aggregate_folds, equal_weight_policy,
                         mvo_bruteforce, period_returns, run_backtest)
from .market import MarketDataset, PriceTable, load_prices, per_period_risk_free, write_prices
from .training import EpochRecord, train_fold
from .tuning import random_search

__all__ = ['main', 'get_parser', 'cmd_ingest', 'cmd_train', 'cmd_backtest', 'cmd_tune', 'cmd_report']

logger = logging.getLogger('qrlfolio')

#: Exit code of a successful command.
EXIT_SUCCESS = 0
#: Exit code of usage and configuration errors.
EXIT_USAGE = 1
#: Exit code of market data errors.
EXIT_DATA = 2
#: Exit code of a non-finite training loss.
EXIT_NUMERIC = 3

# output file names under ``--out``
CHECKPOINT_FILE = 'checkpoint.json'
METRICS_FILE = 'metrics.jsonl'
RESULTS_FILE = 'results.csv'
EQUITY_FILE = 'equity.csv'
SUMMARY_FILE = 'summary.csv'
TRIALS_FILE = 'trials.jsonl'
BEST_CONFIG_FILE = 'best.cfg'
FAILURE_FILE = 'numeric_failure.json'

RESULT_COLUMNS = ['model', 'fold', 'readout', 'sharpe', 'mean_return', 'turnover', 'decisions', 'clipped',
                  'degenerate']
EQUITY_COLUMNS = ['model', 'fold', 'readout', 'x', 'y']

###############################################################################
# Auxiliaries

# option default values
#: Default value for the ``quiet`` option.
_default_quiet = False
#: Default value for the ``threads`` option.
_default_threads = 1
#: Default value for the ``log`` option.
_default_log = 'warning'
#: Default value for the ``out`` option.
_default_out = '.'

_LOG_LEVELS = {
    'quiet': logging.CRITICAL + 1,
    'error': logging.ERROR,
    'warning': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}

# option getter utility functions
# option value precedence is: explicit value (CLI/API arguments) > environment variable > default value


def _get_quiet_option(explicit: Optional[bool] = None) -> bool:
    """Get the value for the ``quiet`` option.

    Args:
        explicit (Optional[bool]): the value explicitly specified by user,
            :data:`None` if not specified

    Returns:
        bool: the value for the ``quiet`` option

    :Environment Variables:
        :envvar:`QRLFOLIO_QUIET` -- the value in environment variable

    See Also:
        :data:`_default_quiet`

    """
    def _option_layers() -> Generator[Optional[bool], None, None]:
        yield explicit
        yield parse_boolean_state(os.getenv('QRLFOLIO_QUIET'))
        yield _default_quiet
    return first_non_none(_option_layers())


def _get_threads_option(explicit: Optional[int] = None) -> int:
    """Get the value for the ``threads`` option.

    Args:
        explicit (Optional[int]): the value explicitly specified by user,
            :data:`None` if not specified

    Returns:
        int: the number of worker processes for folds and trials

    :Environment Variables:
        :envvar:`QRLFOLIO_THREADS` -- the value in environment variable

    See Also:
        :data:`_default_threads`

    """
    return parse_positive_integer(explicit or os.getenv('QRLFOLIO_THREADS') or _default_threads)


def _get_log_option(explicit: Optional[str] = None) -> int:
    """Get the logging level from the ``log`` option.

    :Environment Variables:
        :envvar:`QRLFOLIO_LOG` -- one of ``quiet``, ``error``, ``warning``, ``info``, ``debug``

    Raises:
        ConfigError: on an unknown level name

    """
    name = (explicit or os.getenv('QRLFOLIO_LOG') or _default_log).strip().lower()
    if name not in _LOG_LEVELS:
        raise ConfigError('unknown log level %r (choose from %s)' % (name, ', '.join(_LOG_LEVELS)))
    return _LOG_LEVELS[name]


_handler = logging.StreamHandler()
_handler.setFormatter(logging.Formatter('%(levelname)s: %(name)s: %(message)s'))


def _configure_logging(level: int) -> None:
    if _handler not in logger.handlers:
        logger.addHandler(_handler)
    _handler.setStream(sys.stderr)
    logger.setLevel(level)


def _progress(message: str, quiet: bool) -> None:
    if not quiet:
        with TaskLock():
            print(message, file=sys.stderr)


def _append_csv(frame: pd.DataFrame, path: str) -> None:
    exists = os.path.exists(path) and os.path.getsize(path) > 0
    frame.to_csv(path, mode='a', header=not exists, index=False, lineterminator='\n', float_format='%.12g')


def _append_jsonl(records: Sequence[Dict[str, Any]], path: str) -> None:
    with open(path, 'a', encoding='utf-8', newline='\n') as file:
        for record in records:
            file.write(json.dumps(record, sort_keys=True) + '\n')


def _load_table(cfg: RunConfig) -> PriceTable:
    if not cfg.data_path:
        raise ConfigError('data.path is not set')
    if not os.path.isfile(cfg.data_path):
        raise ConfigError('data file %r does not exist' % cfg.data_path)
    return load_prices(cfg.data_path)


###############################################################################
# Commands


def cmd_ingest(raw: str, out: str) -> str:
    """Validate a raw price file and write its canonical form.

    Raises:
        DataError: with the line, date and ticker of the first bad cell

    """
    table = load_prices(raw)
    write_prices(table, out)
    logger.info('ingested %d rows of %d assets into %s', table.num_rows, table.num_assets, out)
    return out


@dataclasses.dataclass
class _FoldOutcome:
    fold: int
    state: Optional[FoldState]
    records: List[EpochRecord]
    failure: Optional[Dict[str, Any]] = None


def _train_fold_task(fold: FoldSplit, *, cfg: RunConfig, table: PriceTable, quiet: bool) -> _FoldOutcome:
    _progress('Now training fold %d' % fold.fold, quiet)
    dataset = MarketDataset(table, cfg.env_config())
    records = []  # type: List[EpochRecord]
    try:
        result = train_fold(dataset, fold, cfg.model_spec(), cfg.agent_config(), epochs=cfg.train_epochs,
                            patience=cfg.train_patience, seed=cfg.run_seed,
                            episode_stride=cfg.agent_episode_stride, on_epoch=records.append)
    except NumericError as error:
        return _FoldOutcome(fold.fold, None, records,
                            {'fold': fold.fold, 'epoch': len(records), 'message': str(error),
                             'minibatch': error.payload})
    return _FoldOutcome(fold.fold, FoldState.from_training(result, cfg.run_seed), records)


def cmd_train(cfg: RunConfig, out: str, *, threads: int = 1, quiet: bool = False) -> str:
    """Train one agent per fold and write the best-validation checkpoint.

    An epoch runs one episode from each start offset inside the first
    rebalance period of the fold's training rows, so together the episodes
    cover the whole training span. Each epoch appends one line to the
    metrics log.

    Returns:
        str: path of the written checkpoint

    Raises:
        ConfigError: if the configuration or the data cannot support training
        NumericError: if a fold diverges; the offending minibatch is written
            to ``numeric_failure.json`` first

    """
    if cfg.family == 'baseline':
        raise ConfigError('model.kind %r has nothing to train' % (cfg.model_kind,))
    cfg.agent_config()
    table = _load_table(cfg)
    folds = plan_folds(cfg, table.num_rows)
    os.makedirs(out, exist_ok=True)

    outcomes = map_tasks(_train_fold_task, folds, kwargs={'cfg': cfg, 'table': table, 'quiet': quiet},
                         processes=threads)  # type: List[_FoldOutcome]
    _append_jsonl([record.to_dict() for outcome in outcomes for record in outcome.records],
                  os.path.join(out, METRICS_FILE))
    for outcome in outcomes:
        if outcome.failure is not None:
            with open(os.path.join(out, FAILURE_FILE), 'w', encoding='utf-8', newline='\n') as file:
                json.dump(outcome.failure, file, sort_keys=True, indent=1)
                file.write('\n')
            raise NumericError('fold %d diverged: %s' % (outcome.fold, outcome.failure['message']),
                               payload=outcome.failure)
    for outcome in outcomes:
        logger.info('fold %d: best epoch %d of %d, validation Sharpe %.6g', outcome.fold,
                    outcome.state.best_epoch, outcome.state.epoch, outcome.state.val_sharpe)  # type: ignore

    path = os.path.join(out, CHECKPOINT_FILE)
    save_checkpoint(path, Checkpoint(cfg, [outcome.state for outcome in outcomes]))  # type: ignore[misc]
    return path


def _result_rows(model: str, readout: str, fold: int, result: BacktestResult) -> Tuple[Dict[str, Any],
                                                                                      List[Dict[str, Any]]]:
    row = {
        'model': model,
        'fold': fold,
        'readout': readout,
        'sharpe': result.sharpe,
        'mean_return': float(result.returns.mean()),
        'turnover': result.turnover,
        'decisions': len(result.indices),
        'clipped': result.clipped,
        'degenerate': result.degenerate,
    }
    curve = [{'model': model, 'fold': fold, 'readout': readout, 'x': x, 'y': y} for x, y in result.equity_curve()]
    return row, curve


def cmd_backtest(cfg: RunConfig, out: str, *, checkpoint: Optional[Checkpoint] = None,
                 quiet: bool = False) -> Tuple[pd.DataFrame, Dict[str, FoldSummary]]:
    """Backtest every fold's test rows and append the results and plot data.

    Agents come from ``checkpoint``; baselines are fitted from the
    configuration alone. With ``run.shots`` set, quantum agents are run once
    with exact readout and once with sampled readout.

    Returns:
        Tuple[pandas.DataFrame, Dict[str, FoldSummary]]: the appended result rows
        and the fold summary of each readout

    Raises:
        ConfigError: if an agent kind has no checkpoint or the checkpoint lacks a fold

    """
    table = _load_table(cfg)
    dataset = MarketDataset(table, cfg.env_config())
    folds = plan_folds(cfg, table.num_rows)
    if cfg.family != 'baseline' and checkpoint is None:
        raise ConfigError('model.kind %r needs a checkpoint to backtest' % (cfg.model_kind,))

    rows, curves = [], []  # type: List[Dict[str, Any]], List[Dict[str, Any]]
    collected = {}  # type: Dict[str, List[BacktestResult]]
    for fold in folds:
        _progress('Now backtesting fold %d' % fold.fold, quiet)
        if cfg.model_kind == 'equal_weights':
            runs = [('exact', equal_weight_policy(dataset.num_assets))]  # type: List[Tuple[str, Any]]
        elif cfg.model_kind == 'mvo':
            history = period_returns(dataset, 0, fold.test.start)
            policy = mvo_bruteforce(history, grid_step=cfg.model_mvo_grid_step,
                                    risk_free=_risk_free(dataset))
            runs = [('exact', policy)]
        else:
            try:
                actor = checkpoint.fold(fold.fold).actor()  # type: ignore[union-attr]
            except QrlfolioError as error:
                raise ConfigError(str(error)) from None
            runs = [('exact', ActorPolicy(actor))]
            if cfg.run_shots and cfg.family == 'quantum':
                runs.append(('shots=%d' % cfg.run_shots,
                             ActorPolicy(actor, shots=cfg.run_shots, seed=(cfg.run_seed, fold.fold))))
        for readout, policy in runs:
            result = run_backtest(policy, dataset, fold)
            collected.setdefault(readout, []).append(result)
            row, curve = _result_rows(cfg.model_kind, readout, fold.fold, result)
            rows.append(row)
            curves.extend(curve)

    os.makedirs(out, exist_ok=True)
    results = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    _append_csv(results, os.path.join(out, RESULTS_FILE))
    _append_csv(pd.DataFrame(curves, columns=EQUITY_COLUMNS), os.path.join(out, EQUITY_FILE))
    return results, {readout: aggregate_folds(series) for readout, series in collected.items()}


def _risk_free(dataset: MarketDataset) -> float:
    cfg = dataset.cfg
    return per_period_risk_free(cfg.risk_free, cfg.rebalance_period, cfg.trading_days)


def cmd_tune(cfg: RunConfig, out: str, n_trials: int, *, threads: int = 1) -> RunConfig:
    """Random search over the tuned keys; writes the trial log and the best configuration."""
    table = _load_table(cfg)
    records, best = random_search(cfg, table, n_trials, cfg.run_seed, processes=threads)
    os.makedirs(out, exist_ok=True)
    _append_jsonl([record.to_dict() for record in records], os.path.join(out, TRIALS_FILE))
    write_config(best, os.path.join(out, BEST_CONFIG_FILE))
    return best


def cmd_report(results_path: str, out: Optional[str] = None) -> pd.DataFrame:
    """Summarise a results file per model and readout.

    Returns:
        pandas.DataFrame: one row per (model, readout) with the mean and
        spread of the fold Sharpe ratios and the per-fold values, where
        degenerate folds read ``degenerate``

    Raises:
        DataError: if the results file is missing or malformed

    """
    try:
        results = pd.read_csv(results_path)
    except (OSError, pd.errors.EmptyDataError) as error:
        raise DataError('cannot read results %r: %s' % (results_path, error)) from None
    missing = [column for column in RESULT_COLUMNS if column not in results.columns]
    if missing:
        raise DataError('results %r lack column %r' % (results_path, missing[0]))

    rows = []
    for (model, readout), group in results.groupby(['model', 'readout'], sort=False):
        group = group.sort_values('fold', kind='stable')
        degenerate = group['degenerate'].astype(str).str.lower() == 'true'
        per_fold = ['degenerate' if flag else '%.6g' % value for value, flag in zip(group['sharpe'], degenerate)]
        valid = group.loc[~degenerate.values, 'sharpe']
        rows.append({
            'model': model,
            'readout': readout,
            'folds': len(group),
            'mean_sharpe': float(valid.mean()) if len(valid) else float('nan'),
            'std_sharpe': float(valid.std(ddof=1)) if len(valid) > 1 else float('nan'),
            'degenerate_folds': int(degenerate.sum()),
            'per_fold': ' '.join(per_fold),
        })
    summary = pd.DataFrame(rows, columns=['model', 'readout', 'folds', 'mean_sharpe', 'std_sharpe',
                                          'degenerate_folds', 'per_fold'])
    if out is not None:
        os.makedirs(out, exist_ok=True)
        summary.to_csv(os.path.join(out, SUMMARY_FILE), index=False, lineterminator='\n', float_format='%.12g')
    return summary


###############################################################################
# CLI & Entry Point

# option values display
# these values are only intended for argparse help messages
# this shows default values by default, environment variables may override them
__qrlfolio_quiet__ = 'quiet mode' if _get_quiet_option() else 'non-quiet mode'
__qrlfolio_threads__ = _get_threads_option()


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with :data:`EXIT_USAGE`."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.prog, message))


def get_parser() -> argparse.ArgumentParser:
    """Generate CLI parser.

    Returns:
        argparse.ArgumentParser: CLI parser for qrlfolio

    """
    parser = _Parser(prog='qrlfolio', description='Quantum and classical reinforcement learning '
                                                  'for dynamic portfolio optimization.')
    parser.add_argument('-V', '--version', action='version', version=__version__)
    parser.add_argument('-q', '--quiet', action='store_true', default=None,
                        help='suppress progress lines (current: %s)' % __qrlfolio_quiet__)
    parser.add_argument('-c', '--config', action='store', metavar='PATH', help='run configuration file')
    parser.add_argument('-s', '--seed', action='store', type=int, metavar='SEED',
                        help='root random seed, overrides run.seed')
    parser.add_argument('-j', '--threads', action='store', type=int, metavar='N',
                        help='worker processes for folds and trials (current: %s)' % __qrlfolio_threads__)
    parser.add_argument('--shots', action='store', type=int, metavar='N',
                        help='measurement shots for backtests, overrides run.shots')
    parser.add_argument('-o', '--out', action='store', default=_default_out, metavar='DIR',
                        help='output directory (current: %(default)s)')
    parser.add_argument('--set', action='append', dest='overrides', default=[], metavar='KEY=VALUE',
                        help='override one configuration key; may be repeated')
    parser.add_argument('--log', action='store', choices=sorted(_LOG_LEVELS),
                        help='log verbosity, overrides QRLFOLIO_LOG (current: %s)'
                        % (os.getenv('QRLFOLIO_LOG') or _default_log))

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    ingest = commands.add_parser('ingest', help='validate a price file and write its canonical form')
    ingest.add_argument('raw', metavar='RAW', help='input price file')
    ingest.add_argument('canonical', metavar='OUT', help='canonical price file to write')
    commands.add_parser('train', help='train one agent per fold and write a checkpoint')
    backtest = commands.add_parser('backtest', help='backtest every fold and append results')
    backtest.add_argument('--checkpoint', action='store', metavar='PATH',
                          help='trained checkpoint (its configuration replaces --config)')
    tune = commands.add_parser('tune', help='random hyperparameter search')
    tune.add_argument('-n', '--trials', action='store', type=int, default=10, metavar='N',
                      help='number of trials (default: %(default)s)')
    report = commands.add_parser('report', help='summarise a results file')
    report.add_argument('results', nargs='?', metavar='RESULTS', help='results file (default: OUT/results.csv)')
    return parser


def _resolve_config(args: argparse.Namespace, checkpoint: Optional[Checkpoint] = None) -> RunConfig:
    if checkpoint is not None:
        cfg = checkpoint.config
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = default_config()
    changes = {}  # type: Dict[str, Any]
    for item in args.overrides:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError('override %r is not KEY=VALUE' % item)
        changes[key.strip().replace('.', '_', 1)] = value.strip()
    if args.seed is not None:
        changes['run_seed'] = args.seed
    if args.shots is not None:
        changes['run_shots'] = args.shots
    return cfg.replace(**changes) if changes else cfg


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for qrlfolio.

    Args:
        argv (Optional[List[str]]): CLI arguments

    Returns:
        int: exit code; 0 on success, 1 on usage or configuration errors,
        2 on data errors and 3 when training diverges

    :Environment Variables:
     - :envvar:`QRLFOLIO_QUIET` -- same as the ``--quiet`` option in CLI
     - :envvar:`QRLFOLIO_THREADS` -- same as the ``--threads`` option in CLI
     - :envvar:`QRLFOLIO_LOG` -- same as the ``--log`` option in CLI

    """
    parser = get_parser()
    args = parser.parse_args(argv)

    try:
        _configure_logging(_get_log_option(args.log))
        quiet = _get_quiet_option(args.quiet)
        threads = _get_threads_option(args.threads)

        if args.command == 'ingest':
            cmd_ingest(args.raw, args.canonical)
        elif args.command == 'train':
            print(cmd_train(_resolve_config(args), args.out, threads=threads, quiet=quiet))
        elif args.command == 'backtest':
            checkpoint = load_checkpoint(args.checkpoint) if args.checkpoint else None
            results, summaries = cmd_backtest(_resolve_config(args, checkpoint), args.out, checkpoint=checkpoint,
                                              quiet=quiet)
            for _, row in results.iterrows():
                print('%s fold %d %s: Sharpe %.6g' % (row['model'], row['fold'], row['readout'], row['sharpe']))
            for readout, summary in summaries.items():
                spread = 'n/a' if summary.std is None else '%.6g' % summary.std
                print('%s %s: mean Sharpe %.6g (std %s) over %d folds'
                      % (results['model'].iloc[0], readout, summary.mean, spread, len(summary.per_fold)))
        elif args.command == 'tune':
            best = cmd_tune(_resolve_config(args), args.out, args.trials, threads=threads)
            print(os.path.join(args.out, BEST_CONFIG_FILE))
            logger.info('best configuration: %r', best.as_dict())
        else:
            summary = cmd_report(args.results or os.path.join(args.out, RESULTS_FILE), args.out)
            print(summary.to_string(index=False))
    except NumericError as error:
        print('qrlfolio: numeric failure: %s' % error, file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as error:
        print('qrlfolio: data error: %s' % error, file=sys.stderr)
        return EXIT_DATA
    except QrlfolioError as error:
        print('qrlfolio: error: %s' % error, file=sys.stderr)
        return EXIT_USAGE
    return EXIT_SUCCESS


if __name__ == '__main__':
    sys.exit(main())
