# -*- coding: utf-8 -*-
"""Variational circuits: ansatz layout, Pauli-Z readout and parameter-shift gradients.

An ansatz alternates rotation layers (one trainable angle per qubit) with
CNOT entangler layers; the entanglers follow every rotation layer except the
last. Angles are laid out layer-major, so parameter ``l * n + q`` rotates
qubit ``q`` in layer ``l``. Layer axes cycle ``Y, Z, Y, Z, ...``.

"""

import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal, final

from .encoding import AmplitudeVector
from .errors import ArgumentError
from .statevector import (GateKind, GateOp, GateProgram, QuantumState, evolve_block, expectation_z_block,
                          sample_counts)
from .utils import Seed, as_vector

__all__ = ['EntanglerPattern', 'Ansatz', 'ParameterVector', 'ObservableSet', 'CircuitInput',
           'build_ansatz', 'lower', 'evaluate', 'evaluate_batch', 'evaluate_sampled',
           'gradient_parameter_shift', 'jacobian_parameter_shift', 'ansatz_from_descriptor']

EntanglerPattern = Literal['ring', 'asset_temporal']

#: Rotation axes assigned to layers ``0, 1, 2, ...`` in turn.
AXIS_CYCLE = ('RY', 'RZ')  # type: Tuple[GateKind, ...]

#: Shift applied to one angle by the parameter-shift rule.
SHIFT = math.pi / 2

#: Anything a circuit accepts as its input state.
CircuitInput = Union[QuantumState, AmplitudeVector, np.ndarray]

###############################################################################
# Typings


@final
class Ansatz:
    """Circuit topology of a layered variational ansatz.

    Args:
        num_qubits (int): register width
        num_layers (int): number of rotation layers
        pattern (EntanglerPattern): entangler tag the CNOT pairs were built from
        axis_schedule (Sequence[GateKind]): rotation kind of each layer
        entanglers (Sequence[Tuple[int, int]]): ordered ``(control, target)`` pairs

    """

    __slots__ = ('num_qubits', 'num_layers', 'pattern', 'axis_schedule', 'entanglers')

    def __init__(self, num_qubits: int, num_layers: int, pattern: EntanglerPattern,
                 axis_schedule: Sequence[GateKind], entanglers: Sequence[Tuple[int, int]]) -> None:
        if num_qubits < 1 or num_layers < 1:
            raise ArgumentError('an ansatz needs at least one qubit and one layer, got %d qubits, %d layers'
                                % (num_qubits, num_layers))
        if len(axis_schedule) != num_layers:
            raise ArgumentError('axis schedule names %d layers, expected %d' % (len(axis_schedule), num_layers))
        for axis in axis_schedule:
            if axis not in ('RX', 'RY', 'RZ'):
                raise ArgumentError('not a rotation axis: %r' % (axis,))
        for control, target in entanglers:
            if control == target or not (0 <= control < num_qubits and 0 <= target < num_qubits):
                raise ArgumentError('invalid entangler pair (%d, %d) on %d qubits' % (control, target, num_qubits))

        self.num_qubits = num_qubits
        self.num_layers = num_layers
        self.pattern = pattern
        self.axis_schedule = tuple(axis_schedule)  # type: Tuple[GateKind, ...]
        self.entanglers = tuple((int(c), int(t)) for c, t in entanglers)  # type: Tuple[Tuple[int, int], ...]

    @property
    def num_parameters(self) -> int:
        return self.num_qubits * self.num_layers

    def descriptor(self) -> Dict[str, Any]:
        """Plain mapping stored in checkpoints; see :func:`ansatz_from_descriptor`."""
        return {
            'qubits': self.num_qubits,
            'layers': self.num_layers,
            'pattern': self.pattern,
            'axes': list(self.axis_schedule),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ansatz):
            return NotImplemented
        return (self.num_qubits, self.num_layers, self.axis_schedule, self.entanglers) == \
            (other.num_qubits, other.num_layers, other.axis_schedule, other.entanglers)

    def __repr__(self) -> str:
        return 'Ansatz(qubits=%d, layers=%d, pattern=%r)' % (self.num_qubits, self.num_layers, self.pattern)


class ParameterVector:
    """Trainable rotation angles of an ansatz, in radians."""

    __slots__ = ('values',)

    def __init__(self, values: object) -> None:
        self.values = as_vector(values, 'parameter vector')

    def __len__(self) -> int:
        return self.values.shape[0]

    def copy(self) -> 'ParameterVector':
        return ParameterVector(self.values.copy())


class ObservableSet:
    """Qubits read out with single-qubit Pauli-Z."""

    __slots__ = ('qubits',)

    def __init__(self, qubits: Iterable[int]) -> None:
        qubits = tuple(int(qubit) for qubit in qubits)
        if not qubits:
            raise ArgumentError('an observable set needs at least one qubit')
        if len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise ArgumentError('observable qubits must be distinct and non-negative: %r' % (qubits,))
        self.qubits = qubits  # type: Tuple[int, ...]

    @classmethod
    def first(cls, count: int) -> 'ObservableSet':
        """Read out qubits ``0 .. count-1``."""
        return cls(range(count))

    def __len__(self) -> int:
        return len(self.qubits)


###############################################################################
# Auxiliaries


def _ring_pairs(num_qubits: int) -> List[Tuple[int, int]]:
    if num_qubits == 1:
        return []
    return [(qubit, (qubit + 1) % num_qubits) for qubit in range(num_qubits)]


def _params_of(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray]) -> np.ndarray:
    values = params.values if isinstance(params, ParameterVector) else as_vector(params, 'parameters')
    if values.shape[0] != ansatz.num_parameters:
        raise ArgumentError('ansatz takes %d parameters, got %d' % (ansatz.num_parameters, values.shape[0]))
    return values


def _input_block(ansatz: Ansatz, source: CircuitInput) -> np.ndarray:
    if isinstance(source, QuantumState):
        block = source.amplitudes[:, np.newaxis]
    elif isinstance(source, AmplitudeVector):
        block = source.values[:, np.newaxis]
    else:
        block = np.asarray(source, dtype=complex)
        if block.ndim == 1:
            block = block[:, np.newaxis]
    if block.ndim != 2 or block.shape[0] != 1 << ansatz.num_qubits:
        raise ArgumentError('a %d-qubit ansatz needs %d input amplitudes, got shape %r'
                            % (ansatz.num_qubits, 1 << ansatz.num_qubits, block.shape))
    return block.astype(complex)


def _check_observables(ansatz: Ansatz, obs: ObservableSet) -> None:
    if max(obs.qubits) >= ansatz.num_qubits:
        raise ArgumentError('observable qubit %d is not on a %d-qubit ansatz' % (max(obs.qubits), ansatz.num_qubits))


def _readout(ansatz: Ansatz, values: np.ndarray, block: np.ndarray, obs: ObservableSet) -> np.ndarray:
    return expectation_z_block(evolve_block(lower(ansatz, values), block), obs.qubits)


###############################################################################
# Public Interface


def build_ansatz(num_qubits: int, num_layers: int, pattern: EntanglerPattern = 'ring') -> Ansatz:
    """Build a layered ansatz.

    ``ring`` couples ``(i, i+1 mod n)``; ``asset_temporal`` adds the pairs
    ``(i, i + n//2 mod n)`` that are not already in the ring, so every qubit is
    coupled to its neighbour and to its partner half a register away.

    Args:
        num_qubits (int): register width
        num_layers (int): number of rotation layers
        pattern (EntanglerPattern): entangler layout

    Returns:
        Ansatz: the topology; its parameter count is ``num_qubits * num_layers``

    Raises:
        ArgumentError: on zero qubits or layers, or an unknown pattern

    >>> build_ansatz(10, 3).num_parameters
    30

    """
    if num_qubits < 1 or num_layers < 1:
        raise ArgumentError('an ansatz needs at least one qubit and one layer, got %d qubits, %d layers'
                            % (num_qubits, num_layers))
    pairs = _ring_pairs(num_qubits)
    if pattern == 'asset_temporal':
        offset = num_qubits // 2
        for qubit in range(num_qubits):
            pair = (qubit, (qubit + offset) % num_qubits)
            if pair[0] != pair[1] and pair not in pairs:
                pairs.append(pair)
    elif pattern != 'ring':
        raise ArgumentError('unknown entangler pattern %r' % (pattern,))
    axes = [AXIS_CYCLE[layer % len(AXIS_CYCLE)] for layer in range(num_layers)]
    return Ansatz(num_qubits, num_layers, pattern, axes, pairs)


def ansatz_from_descriptor(descriptor: Dict[str, Any]) -> Ansatz:
    """Rebuild an ansatz from :meth:`Ansatz.descriptor` output."""
    try:
        ansatz = build_ansatz(int(descriptor['qubits']), int(descriptor['layers']), descriptor['pattern'])
        axes = list(descriptor['axes'])
    except (KeyError, TypeError) as error:
        raise ArgumentError('malformed ansatz descriptor: %r' % (descriptor,)) from error
    if axes != list(ansatz.axis_schedule):
        return Ansatz(ansatz.num_qubits, ansatz.num_layers, ansatz.pattern, axes, ansatz.entanglers)
    return ansatz


def lower(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray]) -> GateProgram:
    """The gate program of ``U(params)``."""
    values = _params_of(ansatz, params)
    program = GateProgram(ansatz.num_qubits)
    for layer, axis in enumerate(ansatz.axis_schedule):
        base = layer * ansatz.num_qubits
        for qubit in range(ansatz.num_qubits):
            program.append(GateOp(axis, qubit, angle=float(values[base + qubit])))
        if layer < ansatz.num_layers - 1:
            for control, target in ansatz.entanglers:
                program.append(GateOp('CNOT', target, control=control))
    return program


def evaluate(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray], source: CircuitInput,
             obs: ObservableSet) -> np.ndarray:
    """Exact ``<psi| U^dagger Z_q U |psi>`` for every observable qubit.

    Raises:
        ArgumentError: on any dimension mismatch

    """
    return evaluate_batch(ansatz, params, _input_block(ansatz, source), obs)[0]


def evaluate_batch(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray], block: np.ndarray,
                   obs: ObservableSet) -> np.ndarray:
    """:func:`evaluate` over the columns of a ``(2**n, B)`` input block; returns ``(B, len(obs))``."""
    _check_observables(ansatz, obs)
    return _readout(ansatz, _params_of(ansatz, params), _input_block(ansatz, block), obs)


def evaluate_sampled(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray], source: CircuitInput,
                     obs: ObservableSet, shots: int, seed: Seed) -> np.ndarray:
    """Estimate each ``<Z_q>`` from ``shots`` simulated measurements.

    All observables are read from the same set of shots, as on hardware.

    """
    _check_observables(ansatz, obs)
    block = evolve_block(lower(ansatz, params), _input_block(ansatz, source))
    state = QuantumState(ansatz.num_qubits, block[:, 0])
    counts = sample_counts(state, shots, seed)
    return np.array([counts.expectation_z(qubit) for qubit in obs.qubits])


def jacobian_parameter_shift(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray], block: np.ndarray,
                             obs: ObservableSet) -> np.ndarray:
    """Readout Jacobian ``d<Z_q>/d theta_i`` per input column.

    Each coordinate costs two circuit runs shifted by ``+-pi/2``; coordinates
    are processed in index order so the result is reproducible.

    Returns:
        numpy.ndarray: array of shape ``(B, len(obs), num_parameters)``

    """
    _check_observables(ansatz, obs)
    values = _params_of(ansatz, params)
    block = _input_block(ansatz, block)
    jacobian = np.empty((block.shape[1], len(obs), values.shape[0]))
    for index in range(values.shape[0]):
        shifted = values.copy()
        shifted[index] = values[index] + SHIFT
        forward = _readout(ansatz, shifted, block, obs)
        shifted[index] = values[index] - SHIFT
        backward = _readout(ansatz, shifted, block, obs)
        jacobian[:, :, index] = 0.5 * (forward - backward)
    return jacobian


def gradient_parameter_shift(ansatz: Ansatz, params: Union[ParameterVector, np.ndarray], source: CircuitInput,
                             readout_weights: object, obs: Optional[ObservableSet] = None) -> np.ndarray:
    """Gradient of ``f = sum_q w_q <Z_q>`` with respect to every angle.

    Args:
        ansatz (Ansatz): circuit topology
        params: current angles
        source: input state
        readout_weights: one weight per observable
        obs (Optional[ObservableSet]): observables; the first ``len(weights)``
            qubits when omitted

    Returns:
        numpy.ndarray: ``df/dtheta`` of length ``num_parameters``

    """
    weights = as_vector(readout_weights, 'readout weights')
    if obs is None:
        obs = ObservableSet.first(weights.shape[0])
    if len(obs) != weights.shape[0]:
        raise ArgumentError('%d readout weights for %d observables' % (weights.shape[0], len(obs)))
    jacobian = jacobian_parameter_shift(ansatz, params, _input_block(ansatz, source), obs)
    return weights @ jacobian[0]
