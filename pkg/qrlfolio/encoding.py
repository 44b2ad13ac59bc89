# -*- coding: utf-8 -*-
"""Classical feature vectors to amplitude-encoded quantum states.

The pipeline is ``standardize -> feature_map -> to_amplitudes``: a raw vector
``x`` of length ``n`` is standardised with the population standard deviation,
expanded to ``Z = [x, x**2, sin(x), cos(x)]`` (length ``4n``), normalised and
zero-padded to ``2**q`` amplitudes. Expanding before normalising breaks the
radial symmetry a plain ``x / |x|`` embedding would have.

Angle encoding (one feature per qubit as a rotation angle) and basis encoding
(a bitstring per sample) are the other common embeddings; they are not
offered here because every circuit in this package reads its input through an
amplitude embedding.

"""

import math
from typing import Optional

import numpy as np
from typing_extensions import Literal

from .errors import ArgumentError, CapacityError, DegenerateInputError
from .statevector import (MAX_QUBITS, QuantumState, init_amplitudes_direct, mottonen_prepare, run_program,
                          zero_state)
from .utils import as_matrix, as_vector

__all__ = ['EncodingMode', 'FeatureMap', 'AmplitudeVector', 'standardize', 'feature_map', 'to_amplitudes',
           'encode_state', 'encode_batch', 'required_qubits']

EncodingMode = Literal['direct', 'gate_synthesis']

# below this spread a feature window is treated as constant
_STD_GUARD = 1e-9
# below this norm a feature map carries no direction
_NORM_GUARD = 1e-9


class FeatureMap:
    """Expanded feature vector ``[x, x**2, sin(x), cos(x)]``."""

    __slots__ = ('values',)

    def __init__(self, values: np.ndarray) -> None:
        values = as_vector(values, 'feature map')
        if values.shape[0] % 4:
            raise ArgumentError('feature map length must be a multiple of 4, got %d' % values.shape[0])
        self.values = values

    @property
    def base_length(self) -> int:
        return self.values.shape[0] // 4

    def __len__(self) -> int:
        return self.values.shape[0]


class AmplitudeVector:
    """Real unit vector of length ``2**num_qubits``, zero padded at the tail."""

    __slots__ = ('values', 'num_qubits')

    def __init__(self, values: np.ndarray, num_qubits: int) -> None:
        self.values = np.asarray(values, dtype=float)
        self.num_qubits = num_qubits

    def to_state(self) -> QuantumState:
        return init_amplitudes_direct(self.values)


def required_qubits(num_features: int) -> int:
    """Smallest register holding the ``4 * num_features`` expanded features.

    >>> required_qubits(3)
    4

    """
    if num_features < 1:
        raise ArgumentError('need at least one feature')
    return max(1, math.ceil(math.log2(4 * num_features)))


def standardize(raw: object) -> np.ndarray:
    """Shift to zero mean and scale to unit population standard deviation.

    Constant inputs (spread below ``1e-9``) map to the all-zero vector.

    >>> standardize([5, 5, 5])
    array([0., 0., 0.])

    """
    values = as_vector(raw, 'raw features')
    if values.shape[0] < 1:
        raise ArgumentError('need at least one feature')
    centred = values - values.mean()
    spread = math.sqrt(float(np.mean(centred ** 2)))
    if spread < _STD_GUARD:
        return np.zeros_like(values)
    return centred / spread


def feature_map(standardized: object) -> FeatureMap:
    """Expand to ``[x, x**2, sin(x), cos(x)]``."""
    values = as_vector(standardized, 'standardized features')
    return FeatureMap(np.concatenate([values, values ** 2, np.sin(values), np.cos(values)]))


def to_amplitudes(features: FeatureMap, qubits: int) -> AmplitudeVector:
    """Normalise ``features`` and pad with zeros to ``2**qubits`` entries.

    Raises:
        CapacityError: if ``2**qubits`` cannot hold the features
        DegenerateInputError: if the feature map has (near) zero norm

    """
    if not 1 <= qubits <= MAX_QUBITS:
        raise CapacityError('register width must lie in [1, %d], got %d' % (MAX_QUBITS, qubits))
    size = len(features)
    if size > 1 << qubits:
        raise CapacityError('%d features do not fit %d amplitudes of a %d-qubit register'
                            % (size, 1 << qubits, qubits))
    norm = float(np.linalg.norm(features.values))
    if norm < _NORM_GUARD:
        raise DegenerateInputError('feature map has zero norm')
    values = np.zeros(1 << qubits)
    values[:size] = features.values / norm
    return AmplitudeVector(values, qubits)


def _uniform_state(qubits: int) -> QuantumState:
    amplitudes = np.full(1 << qubits, 1.0 / math.sqrt(1 << qubits), dtype=complex)
    return QuantumState(qubits, amplitudes)


def encode_state(raw: object, qubits: Optional[int] = None, mode: EncodingMode = 'direct') -> QuantumState:
    """Run the full encoding pipeline and return the prepared state.

    Args:
        raw: raw feature vector
        qubits (Optional[int]): register width; the minimal width when omitted
        mode (EncodingMode): ``direct`` loads the amplitudes verbatim,
            ``gate_synthesis`` executes the Möttönen preparation program

    Returns:
        QuantumState: the encoded state

    """
    values = as_vector(raw, 'raw features')
    if qubits is None:
        qubits = required_qubits(values.shape[0])
    try:
        amplitudes = to_amplitudes(feature_map(standardize(values)), qubits)
    except DegenerateInputError:
        return _uniform_state(qubits)
    if mode == 'direct':
        return init_amplitudes_direct(amplitudes.values)
    if mode == 'gate_synthesis':
        return run_program(mottonen_prepare(amplitudes.values), zero_state(qubits))
    raise ArgumentError('unknown encoding mode %r' % (mode,))


def encode_batch(rows: object, qubits: int) -> np.ndarray:
    """Encode each row of ``rows`` and stack the states as columns.

    This is the direct-mode pipeline vectorised over a minibatch; column ``b``
    equals ``encode_state(rows[b], qubits).amplitudes``.

    Returns:
        numpy.ndarray: complex block of shape ``(2**qubits, len(rows))``

    """
    matrix = as_matrix(rows, 'feature rows')
    count, width = matrix.shape
    if 4 * width > 1 << qubits:
        raise CapacityError('%d features do not fit %d amplitudes of a %d-qubit register'
                            % (4 * width, 1 << qubits, qubits))
    centred = matrix - matrix.mean(axis=1, keepdims=True)
    spread = np.sqrt(np.mean(centred ** 2, axis=1, keepdims=True))
    flat = spread[:, 0] < _STD_GUARD
    scaled = np.where(flat[:, np.newaxis], 0.0, centred / np.where(flat, 1.0, spread[:, 0])[:, np.newaxis])
    expanded = np.concatenate([scaled, scaled ** 2, np.sin(scaled), np.cos(scaled)], axis=1)
    norms = np.linalg.norm(expanded, axis=1)
    block = np.zeros((1 << qubits, count), dtype=complex)
    block[:4 * width, :] = (expanded / np.where(norms < _NORM_GUARD, 1.0, norms)[:, np.newaxis]).T
    degenerate = norms < _NORM_GUARD
    if np.any(degenerate):
        block[:, degenerate] = 1.0 / math.sqrt(1 << qubits)
    return block
