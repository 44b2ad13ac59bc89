import math

import numpy as np
import pytest

from qrlfolio.encoding import encode_batch, encode_state
from qrlfolio.errors import ArgumentError
from qrlfolio.statevector import zero_state
from qrlfolio.vqc import (ObservableSet, ParameterVector, ansatz_from_descriptor, build_ansatz, evaluate,
                          evaluate_batch, evaluate_sampled, gradient_parameter_shift, jacobian_parameter_shift, lower)


def finite_difference_jacobian(ansatz, params, block, obs, step=1e-5):  # type: ignore[no-untyped-def]
    columns = []
    for index in range(params.shape[0]):
        shifted = params.copy()
        shifted[index] += step
        forward = evaluate_batch(ansatz, shifted, block, obs)
        shifted[index] -= 2 * step
        backward = evaluate_batch(ansatz, shifted, block, obs)
        columns.append((forward - backward) / (2 * step))
    return np.stack(columns, axis=-1)


class TestAnsatz:

    def test_parameter_count(self) -> None:
        assert build_ansatz(10, 3).num_parameters == 30
        assert build_ansatz(6, 5).num_parameters == 30

    def test_axes_alternate(self) -> None:
        assert build_ansatz(2, 4).axis_schedule == ('RY', 'RZ', 'RY', 'RZ')

    def test_ring_pairs(self) -> None:
        assert build_ansatz(3, 1).entanglers == ((0, 1), (1, 2), (2, 0))
        assert build_ansatz(1, 2).entanglers == ()

    def test_asset_temporal_pairs(self) -> None:
        ansatz = build_ansatz(4, 2, 'asset_temporal')
        assert ansatz.entanglers == ((0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3), (2, 0), (3, 1))
        # on two qubits the partner is the ring neighbour
        assert build_ansatz(2, 2, 'asset_temporal').entanglers == build_ansatz(2, 2, 'ring').entanglers

    def test_invalid(self) -> None:
        with pytest.raises(ArgumentError):
            build_ansatz(0, 3)
        with pytest.raises(ArgumentError):
            build_ansatz(3, 0)
        with pytest.raises(ArgumentError):
            build_ansatz(3, 1, 'star')  # type: ignore[arg-type]

    def test_lowering(self) -> None:
        ansatz = build_ansatz(3, 3)
        program = lower(ansatz, np.arange(9) * 0.1)
        assert program.count('RY') == 6
        assert program.count('RZ') == 3
        # no entangler after the last rotation layer
        assert program.count('CNOT') == 2 * 3
        assert program.ops[-1].kind == 'RY'
        assert program.ops[-1].angle == pytest.approx(0.8)

    def test_parameter_length_checked(self) -> None:
        with pytest.raises(ArgumentError):
            lower(build_ansatz(2, 2), np.zeros(3))

    def test_descriptor(self) -> None:
        ansatz = build_ansatz(5, 3, 'asset_temporal')
        assert ansatz_from_descriptor(ansatz.descriptor()) == ansatz
        with pytest.raises(ArgumentError):
            ansatz_from_descriptor({'qubits': 2})


class TestEvaluation:

    def test_identity_circuit(self) -> None:
        ansatz = build_ansatz(3, 2)
        readout = evaluate(ansatz, np.zeros(6), zero_state(3), ObservableSet.first(3))
        np.testing.assert_allclose(readout, [1.0, 1.0, 1.0])

    def test_single_rotation(self) -> None:
        ansatz = build_ansatz(1, 1)
        for angle in (0.0, 0.4, math.pi / 2, 2.5):
            readout = evaluate(ansatz, ParameterVector([angle]), zero_state(1), ObservableSet([0]))
            assert readout[0] == pytest.approx(math.cos(angle), abs=1e-12)

    def test_readout_range(self) -> None:
        rng = np.random.default_rng(2)
        ansatz = build_ansatz(4, 3, 'asset_temporal')
        for _ in range(10):
            readout = evaluate(ansatz, rng.uniform(-math.pi, math.pi, 12), encode_state(rng.normal(size=3), 4),
                               ObservableSet.first(4))
            assert np.all(np.abs(readout) <= 1.0)

    def test_mismatches(self) -> None:
        ansatz = build_ansatz(2, 1)
        with pytest.raises(ArgumentError):
            evaluate(ansatz, np.zeros(2), zero_state(3), ObservableSet([0]))
        with pytest.raises(ArgumentError):
            evaluate(ansatz, np.zeros(2), zero_state(2), ObservableSet([2]))
        with pytest.raises(ArgumentError):
            ObservableSet([0, 0])

    def test_sampled_readout(self) -> None:
        rng = np.random.default_rng(4)
        ansatz = build_ansatz(3, 2)
        params = rng.normal(size=6)
        state = encode_state([0.3, -1.2], 3)
        exact = evaluate(ansatz, params, state, ObservableSet.first(2))
        sampled = evaluate_sampled(ansatz, params, state, ObservableSet.first(2), 20000, seed=(1, 2))
        again = evaluate_sampled(ansatz, params, state, ObservableSet.first(2), 20000, seed=(1, 2))
        np.testing.assert_array_equal(sampled, again)
        np.testing.assert_allclose(sampled, exact, atol=0.05)


class TestParameterShift:

    @pytest.mark.parametrize('pattern', ['ring', 'asset_temporal'])
    def test_matches_finite_differences(self, pattern: str) -> None:
        rng = np.random.default_rng(12)
        ansatz = build_ansatz(4, 3, pattern)  # type: ignore[arg-type]
        params = rng.uniform(-math.pi, math.pi, ansatz.num_parameters)
        block = encode_batch(rng.normal(size=(3, 4)), 4)
        obs = ObservableSet([0, 2])
        jacobian = jacobian_parameter_shift(ansatz, params, block, obs)
        assert jacobian.shape == (3, 2, 12)
        np.testing.assert_allclose(jacobian, finite_difference_jacobian(ansatz, params, block, obs), atol=1e-6)

    def test_random_circuits(self) -> None:
        rng = np.random.default_rng(100)
        for case in range(100):
            qubits = int(rng.integers(2, 5))
            pattern = ('ring', 'asset_temporal')[case % 2]
            ansatz = build_ansatz(qubits, int(rng.integers(1, 4)), pattern)  # type: ignore[arg-type]
            params = rng.uniform(-math.pi, math.pi, ansatz.num_parameters)
            width = int(rng.integers(1, (1 << qubits) // 4 + 1))
            block = encode_batch(rng.normal(size=(1, width)), qubits)
            obs = ObservableSet.first(qubits)
            np.testing.assert_allclose(jacobian_parameter_shift(ansatz, params, block, obs),
                                       finite_difference_jacobian(ansatz, params, block, obs), atol=1e-6,
                                       err_msg='case %d' % case)

    def test_periodic_in_every_angle(self) -> None:
        rng = np.random.default_rng(21)
        ansatz = build_ansatz(3, 3, 'asset_temporal')
        params = rng.uniform(-math.pi, math.pi, ansatz.num_parameters)
        block = encode_batch(rng.normal(size=(2, 2)), 3)
        obs = ObservableSet.first(3)
        base = evaluate_batch(ansatz, params, block, obs)
        for index in range(ansatz.num_parameters):
            shifted = params.copy()
            shifted[index] += 2 * math.pi
            np.testing.assert_allclose(evaluate_batch(ansatz, shifted, block, obs), base, atol=1e-10)

    def test_weighted_gradient(self) -> None:
        rng = np.random.default_rng(13)
        ansatz = build_ansatz(3, 2)
        params = rng.normal(size=6)
        state = encode_state([1.0, 2.0], 3)
        weights = np.array([0.5, -2.0])
        gradient = gradient_parameter_shift(ansatz, params, state, weights)
        jacobian = jacobian_parameter_shift(ansatz, params, state.amplitudes, ObservableSet.first(2))
        np.testing.assert_allclose(gradient, weights @ jacobian[0])
        with pytest.raises(ArgumentError):
            gradient_parameter_shift(ansatz, params, state, weights, ObservableSet([0]))
