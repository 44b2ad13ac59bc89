# -*- coding: utf-8 -*-
"""Function approximators behind the actor and critic.

Both kinds expose the same small surface used by the training code:
:meth:`~Network.forward` on a ``(B, d_in)`` batch, and the two
vector-Jacobian products :meth:`~Network.parameter_vjp` (summed over the
batch) and :meth:`~Network.input_vjp`. Parameters live in one flat float
array so optimizers and soft updates never need to know the layout.

"""

import abc
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .encoding import encode_batch, required_qubits
from .errors import ArgumentError, CapacityError
from .statevector import QuantumState
from .utils import Seed, as_matrix, as_vector, make_generator, spawn_seed
from .vqc import Ansatz, ObservableSet, ansatz_from_descriptor, evaluate_batch, evaluate_sampled, \
    jacobian_parameter_shift

__all__ = ['Network', 'MLP', 'QuantumNetwork', 'mlp_evaluate', 'mlp_gradient', 'mlp_input_gradient',
           'network_from_dict', 'FD_STEP']

#: Central finite-difference step for input gradients of circuits.
FD_STEP = 1e-4


class Network(abc.ABC):
    """Differentiable map from ``d_in`` inputs to ``d_out`` outputs."""

    #: Flat trainable parameters.
    params = None  # type: np.ndarray

    input_dim = 0  # type: int
    output_dim = 0  # type: int

    @property
    def num_parameters(self) -> int:
        return self.params.shape[0]

    def set_params(self, values: np.ndarray) -> None:
        values = as_vector(values, 'parameters')
        if values.shape != self.params.shape:
            raise ArgumentError('expected %d parameters, got %d' % (self.params.shape[0], values.shape[0]))
        self.params = values.copy()

    def _batch(self, inputs: object) -> np.ndarray:
        batch = as_matrix(inputs, 'network input')
        if batch.shape[1] != self.input_dim:
            raise ArgumentError('network takes %d inputs, got %d' % (self.input_dim, batch.shape[1]))
        return batch

    def _upstream(self, upstream: object, count: int) -> np.ndarray:
        grads = as_matrix(upstream, 'upstream gradient')
        if grads.shape != (count, self.output_dim):
            raise ArgumentError('upstream gradient must have shape (%d, %d), got %r'
                                % (count, self.output_dim, grads.shape))
        return grads

    @abc.abstractmethod
    def forward(self, inputs: object) -> np.ndarray:
        """Outputs of shape ``(B, d_out)``."""

    @abc.abstractmethod
    def parameter_vjp(self, inputs: object, upstream: object) -> np.ndarray:
        """``sum_b upstream[b] . d out[b] / d params``."""

    @abc.abstractmethod
    def input_vjp(self, inputs: object, upstream: object, start: int = 0) -> np.ndarray:
        """``upstream[b] . d out[b] / d inputs[b, start:]`` per row."""

    @abc.abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Checkpoint fragment; see :func:`network_from_dict`."""

    def copy(self) -> 'Network':
        return network_from_dict(self.to_dict())


###############################################################################
# Classical


class MLP(Network):
    """Fully connected network with ``tanh`` hidden layers and a linear output.

    The flat parameter layout is, per layer, the weight matrix
    ``(out, in)`` in row-major order followed by the bias vector.

    Args:
        sizes (Sequence[int]): ``[d_in, hidden..., d_out]``
        params (Optional[numpy.ndarray]): flat parameters, zeros when omitted

    """

    def __init__(self, sizes: Sequence[int], params: Optional[np.ndarray] = None) -> None:
        sizes = [int(size) for size in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ArgumentError('an MLP needs an input and an output size, got %r' % (sizes,))
        self.sizes = sizes
        self.input_dim = sizes[0]
        self.output_dim = sizes[-1]
        self._offsets = []  # type: List[Tuple[int, int, int]]
        offset = 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self._offsets.append((offset, offset + fan_in * fan_out, offset + fan_in * fan_out + fan_out))
            offset += fan_in * fan_out + fan_out
        self.params = np.zeros(offset)
        if params is not None:
            self.set_params(params)

    @classmethod
    def glorot(cls, sizes: Sequence[int], seed: Seed, output_bias: float = 0.0) -> 'MLP':
        """Glorot-uniform weights, zero hidden biases, constant output bias."""
        model = cls(sizes)
        rng = make_generator(seed)
        for index, (fan_in, fan_out) in enumerate(zip(model.sizes[:-1], model.sizes[1:])):
            start, stop, end = model._offsets[index]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            model.params[start:stop] = rng.uniform(-limit, limit, size=stop - start)
        start, stop, end = model._offsets[-1]
        model.params[stop:end] = output_bias
        return model

    def layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """``(weights, bias)`` views into the flat parameter array."""
        views = []
        for (start, stop, end), fan_in, fan_out in zip(self._offsets, self.sizes[:-1], self.sizes[1:]):
            views.append((self.params[start:stop].reshape(fan_out, fan_in), self.params[stop:end]))
        return views

    def _activations(self, batch: np.ndarray) -> List[np.ndarray]:
        values = [batch]
        layers = self.layers()
        for index, (weights, bias) in enumerate(layers):
            out = values[-1] @ weights.T + bias
            values.append(out if index == len(layers) - 1 else np.tanh(out))
        return values

    def _backward(self, batch: np.ndarray, upstream: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values = self._activations(batch)
        grads = np.zeros_like(self.params)
        delta = upstream
        layers = self.layers()
        for index in range(len(layers) - 1, -1, -1):
            weights, _ = layers[index]
            start, stop, end = self._offsets[index]
            grads[start:stop] = (delta.T @ values[index]).ravel()
            grads[stop:end] = delta.sum(axis=0)
            delta = delta @ weights
            if index:
                delta = delta * (1.0 - values[index] ** 2)
        return grads, delta

    def forward(self, inputs: object) -> np.ndarray:
        return self._activations(self._batch(inputs))[-1]

    def parameter_vjp(self, inputs: object, upstream: object) -> np.ndarray:
        batch = self._batch(inputs)
        return self._backward(batch, self._upstream(upstream, batch.shape[0]))[0]

    def input_vjp(self, inputs: object, upstream: object, start: int = 0) -> np.ndarray:
        batch = self._batch(inputs)
        return self._backward(batch, self._upstream(upstream, batch.shape[0]))[1][:, start:]

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': 'classical', 'sizes': list(self.sizes), 'params': self.params.tolist()}


def mlp_evaluate(model: MLP, inputs: object) -> np.ndarray:
    """Forward pass; a 1-D input yields a 1-D output.

    >>> mlp_evaluate(MLP([2, 1], [1.0, 2.0, 0.5]), [3.0, 4.0])
    array([11.5])

    """
    squeeze = np.ndim(inputs) == 1
    outputs = model.forward(inputs)
    return outputs[0] if squeeze else outputs


def mlp_gradient(model: MLP, inputs: object, upstream: object) -> np.ndarray:
    """Reverse-mode parameter gradient of ``upstream . output``, summed over the batch."""
    return model.parameter_vjp(inputs, upstream)


def mlp_input_gradient(model: MLP, inputs: object, upstream: object) -> np.ndarray:
    """Reverse-mode gradient of ``upstream . output`` with respect to the inputs."""
    return model.input_vjp(inputs, upstream)


###############################################################################
# Quantum


class QuantumNetwork(Network):
    """Amplitude-encoded variational circuit read out through Pauli-Z.

    Inputs are encoded row by row (``standardize -> feature_map ->
    to_amplitudes``), evolved by the ansatz and read out on ``readout``.

    Args:
        ansatz (Ansatz): circuit topology
        readout (ObservableSet): qubits whose ``<Z>`` form the outputs
        input_dim (int): raw input width; ``4 * input_dim`` must fit the register
        params (Optional[numpy.ndarray]): angles, zeros when omitted

    """

    def __init__(self, ansatz: Ansatz, readout: ObservableSet, input_dim: int,
                 params: Optional[np.ndarray] = None) -> None:
        if required_qubits(input_dim) > ansatz.num_qubits:
            raise CapacityError('%d inputs need %d qubits, the ansatz has %d'
                                % (input_dim, required_qubits(input_dim), ansatz.num_qubits))
        if max(readout.qubits) >= ansatz.num_qubits:
            raise ArgumentError('readout qubit %d is not on a %d-qubit ansatz'
                                % (max(readout.qubits), ansatz.num_qubits))
        self.ansatz = ansatz
        self.readout = readout
        self.input_dim = input_dim
        self.output_dim = len(readout)
        self.params = np.zeros(ansatz.num_parameters)
        if params is not None:
            self.set_params(params)

    @classmethod
    def random(cls, ansatz: Ansatz, readout: ObservableSet, input_dim: int, seed: Seed,
               scale: float = 0.1) -> 'QuantumNetwork':
        """Angles drawn from ``normal(0, scale)``."""
        params = make_generator(seed).normal(0.0, scale, size=ansatz.num_parameters)
        return cls(ansatz, readout, input_dim, params)

    def encode(self, inputs: object) -> np.ndarray:
        return encode_batch(self._batch(inputs), self.ansatz.num_qubits)

    def forward(self, inputs: object) -> np.ndarray:
        return evaluate_batch(self.ansatz, self.params, self.encode(inputs), self.readout)

    def forward_sampled(self, inputs: object, shots: int, seed: Seed) -> np.ndarray:
        """Shot-based readout; row ``b`` draws from stream ``(seed, b)``."""
        block = self.encode(inputs)
        rows = [evaluate_sampled(self.ansatz, self.params, QuantumState(self.ansatz.num_qubits, block[:, index]),
                                 self.readout, shots, spawn_seed(seed, index))
                for index in range(block.shape[1])]
        return np.array(rows)

    def parameter_vjp(self, inputs: object, upstream: object) -> np.ndarray:
        block = self.encode(inputs)
        grads = self._upstream(upstream, block.shape[1])
        jacobian = jacobian_parameter_shift(self.ansatz, self.params, block, self.readout)
        return np.einsum('bo,bop->p', grads, jacobian)

    def input_vjp(self, inputs: object, upstream: object, start: int = 0) -> np.ndarray:
        """Central finite differences with step :data:`FD_STEP` over columns ``start:``.

        The inputs pass through the normalised amplitude embedding, which is
        not a gate angle, so the shift rule does not apply here.

        """
        batch = self._batch(inputs)
        grads = self._upstream(upstream, batch.shape[0])
        result = np.empty((batch.shape[0], self.input_dim - start))
        for column in range(start, self.input_dim):
            shifted = batch.copy()
            shifted[:, column] += FD_STEP
            forward = self.forward(shifted)
            shifted[:, column] -= 2 * FD_STEP
            backward = self.forward(shifted)
            result[:, column - start] = np.sum(grads * (forward - backward), axis=1) / (2 * FD_STEP)
        return result

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'quantum',
            'ansatz': self.ansatz.descriptor(),
            'readout': list(self.readout.qubits),
            'input_dim': self.input_dim,
            'params': self.params.tolist(),
        }


def network_from_dict(data: Dict[str, Any]) -> Network:
    """Rebuild a network from its :meth:`~Network.to_dict` fragment."""
    try:
        kind = data['kind']
        if kind == 'classical':
            return MLP(data['sizes'], np.array(data['params'], dtype=float))
        if kind == 'quantum':
            return QuantumNetwork(ansatz_from_descriptor(data['ansatz']), ObservableSet(data['readout']),
                                  int(data['input_dim']), np.array(data['params'], dtype=float))
    except (KeyError, TypeError) as error:
        raise ArgumentError('malformed network fragment') from error
    raise ArgumentError('unknown network kind %r' % (kind,))
