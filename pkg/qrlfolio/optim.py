# -*- coding: utf-8 -*-
"""First-order optimizers and target-network blending."""

from typing import Any, Dict

import numpy as np
from typing_extensions import Literal

from .errors import ArgumentError
from .utils import as_vector

__all__ = ['OptimizerKind', 'OptimizerState', 'optimizer_step', 'soft_update']

OptimizerKind = Literal['adam', 'sgd']

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


class OptimizerState:
    """Learning rate, L2 coefficient and (for Adam) the moment estimates.

    Args:
        kind (OptimizerKind): ``adam`` or ``sgd``
        size (int): parameter dimension
        learning_rate (float): step size
        l2 (float): coefficient of the ``l2 * |theta|**2`` penalty

    """

    def __init__(self, kind: OptimizerKind, size: int, learning_rate: float, l2: float = 0.0) -> None:
        kind = kind.lower()  # type: ignore[assignment]
        if kind not in ('adam', 'sgd'):
            raise ArgumentError('unknown optimizer %r' % (kind,))
        if learning_rate <= 0 or l2 < 0:
            raise ArgumentError('learning rate must be positive and l2 non-negative')
        self.kind = kind  # type: OptimizerKind
        self.learning_rate = float(learning_rate)
        self.l2 = float(l2)
        self.step = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'learning_rate': self.learning_rate,
            'l2': self.l2,
            'step': self.step,
            'm': self.m.tolist(),
            'v': self.v.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'OptimizerState':
        state = cls(data['kind'], len(data['m']), data['learning_rate'], data['l2'])
        state.step = int(data['step'])
        state.m = np.array(data['m'], dtype=float)
        state.v = np.array(data['v'], dtype=float)
        return state


def optimizer_step(opt: OptimizerState, params: object, grads: object) -> np.ndarray:
    """One descent step; the L2 term ``2 * l2 * theta`` is added to ``grads``.

    >>> opt = OptimizerState('sgd', 1, 0.1)
    >>> optimizer_step(opt, [1.0], [2.0])
    array([0.8])

    """
    values = as_vector(params, 'parameters')
    gradient = as_vector(grads, 'gradients')
    if values.shape != gradient.shape or values.shape != opt.m.shape:
        raise ArgumentError('parameters (%d), gradients (%d) and optimizer state (%d) differ in size'
                            % (values.shape[0], gradient.shape[0], opt.m.shape[0]))
    if opt.l2:
        gradient = gradient + 2.0 * opt.l2 * values
    opt.step += 1
    if opt.kind == 'sgd':
        update = opt.learning_rate * gradient
    else:
        opt.m = BETA1 * opt.m + (1.0 - BETA1) * gradient
        opt.v = BETA2 * opt.v + (1.0 - BETA2) * gradient ** 2
        m_hat = opt.m / (1.0 - BETA1 ** opt.step)
        v_hat = opt.v / (1.0 - BETA2 ** opt.step)
        update = opt.learning_rate * m_hat / (np.sqrt(v_hat) + EPSILON)
    return values - update


def soft_update(online: object, target: object, tau: float) -> np.ndarray:
    """``tau * online + (1 - tau) * target``.

    >>> soft_update([1.0], [0.0], 0.005)
    array([0.005])

    """
    source = as_vector(online, 'online parameters')
    blended = as_vector(target, 'target parameters')
    if source.shape != blended.shape:
        raise ArgumentError('online (%d) and target (%d) parameters differ in size'
                            % (source.shape[0], blended.shape[0]))
    if not 0.0 <= tau <= 1.0:
        raise ArgumentError('soft-update coefficient must lie in [0, 1], got %r' % tau)
    if tau == 1.0:
        return source.copy()
    if tau == 0.0:
        return blended.copy()
    return tau * source + (1.0 - tau) * blended
