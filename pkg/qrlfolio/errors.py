# -*- coding: utf-8 -*-
"""Exception hierarchy shared by all :mod:`qrlfolio` modules.

Every error raised on purpose by the engine derives from :exc:`QrlfolioError`
and, in addition, from the builtin exception a caller would naturally expect,
so ``except ValueError`` keeps working for argument and data problems.

"""

import pathlib
from typing import Any, Optional

import tbtrim

__all__ = ['QrlfolioError', 'CapacityError', 'QubitIndexError', 'ArgumentError', 'DegenerateInputError',
           'StateError', 'DataError', 'NumericError', 'ConfigError', 'CheckpointError',
           'UnsupportedVersionError']


class QrlfolioError(Exception):
    """Base class of all engine errors."""


class CapacityError(QrlfolioError, ValueError):
    """A register or vector is too small (or too large) for the request."""


class QubitIndexError(QrlfolioError, IndexError):
    """A qubit index does not exist on the state it addresses."""


class ArgumentError(QrlfolioError, ValueError):
    """An argument violates the operation's precondition."""


class DegenerateInputError(ArgumentError):
    """The input carries no information (e.g. an all-zero feature map)."""


class StateError(QrlfolioError, RuntimeError):
    """An object was used in a state that does not allow the operation."""


class DataError(QrlfolioError, ValueError):
    """Market data is missing, malformed or outside its domain.

    Args:
        message (str): human readable description

    Keyword Args:
        date (Optional[str]): ISO date of the offending row
        ticker (Optional[str]): column name of the offending cell
        row (Optional[int]): 1-based line number in the source file

    """

    def __init__(self, message: str, *, date: Optional[str] = None, ticker: Optional[str] = None,
                 row: Optional[int] = None) -> None:
        context = []
        if row is not None:
            context.append('line %d' % row)
        if date is not None:
            context.append('date %s' % date)
        if ticker is not None:
            context.append('ticker %s' % ticker)
        if context:
            message = '%s (%s)' % (message, ', '.join(context))
        super().__init__(message)

        #: Optional[str]: ISO date of the offending row.
        self.date = date
        #: Optional[str]: Column name of the offending cell.
        self.ticker = ticker
        #: Optional[int]: Line number in the source file.
        self.row = row


class NumericError(QrlfolioError, ArithmeticError):
    """A loss or model output became non-finite.

    Args:
        message (str): human readable description
        payload (Any): diagnostic data (the offending minibatch)

    """

    def __init__(self, message: str, payload: Any = None) -> None:
        super().__init__(message)
        #: Any: Diagnostic dump attached by the raiser.
        self.payload = payload


class ConfigError(QrlfolioError, ValueError):
    """The run configuration is invalid."""


class CheckpointError(QrlfolioError, ValueError):
    """A checkpoint file cannot be parsed.

    Args:
        message (str): human readable description
        offset (Optional[int]): character offset of the failure in the file

    """

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        if offset is not None:
            message = '%s at offset %d' % (message, offset)
        super().__init__(message)
        #: Optional[int]: Character offset of the failure.
        self.offset = offset


class UnsupportedVersionError(CheckpointError):
    """The checkpoint declares a format version this build cannot read."""


###############################################################################
# Traceback Trimming (tbtrim)

# root path
ROOT = pathlib.Path(__file__).resolve().parent


def predicate(filename: str) -> bool:
    return pathlib.Path(filename).parent == ROOT


tbtrim.set_trim_rule(predicate, strict=True, target=QrlfolioError)
