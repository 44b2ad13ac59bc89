import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qrlfolio.encoding import (encode_batch, encode_state, feature_map, required_qubits, standardize,
                               to_amplitudes)
from qrlfolio.errors import ArgumentError, CapacityError
from qrlfolio.statevector import fidelity

finite_rows = hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3))
spread_rows = hnp.arrays(np.float64, st.integers(2, 8), elements=st.floats(-10, 10)).filter(
    lambda raw: raw.std() > 0.1)


@pytest.mark.parametrize('features, qubits', [(1, 2), (2, 3), (3, 4), (4, 4), (14, 6), (555, 12)])
def test_required_qubits(features: int, qubits: int) -> None:
    assert required_qubits(features) == qubits


def test_required_qubits_needs_features() -> None:
    with pytest.raises(ArgumentError):
        required_qubits(0)


class TestPipeline:

    def test_standardize_moments(self) -> None:
        values = standardize([1.0, 2.0, 3.0, 10.0])
        assert values.mean() == pytest.approx(0.0, abs=1e-12)
        # population standard deviation
        assert values.std(ddof=0) == pytest.approx(1.0)

    def test_standardize_constant(self) -> None:
        np.testing.assert_array_equal(standardize([5, 5, 5]), np.zeros(3))

    def test_feature_map_layout(self) -> None:
        x = np.array([-1.0, 0.5])
        features = feature_map(x)
        assert len(features) == 8
        assert features.base_length == 2
        np.testing.assert_allclose(features.values, np.concatenate([x, x ** 2, np.sin(x), np.cos(x)]))

    def test_amplitudes_padded_and_normalised(self) -> None:
        amplitudes = to_amplitudes(feature_map(standardize([1.0, 4.0, 2.0])), 4)
        assert amplitudes.values.shape == (16,)
        assert np.linalg.norm(amplitudes.values) == pytest.approx(1.0)
        np.testing.assert_array_equal(amplitudes.values[12:], 0.0)
        assert amplitudes.to_state().num_qubits == 4

    def test_amplitudes_capacity(self) -> None:
        with pytest.raises(CapacityError):
            to_amplitudes(feature_map([0.1, 0.2, 0.3]), 3)

    def test_constant_input_is_encodable(self) -> None:
        # a flat window standardises to zeros, whose cosine block still has norm
        state = encode_state([7.0, 7.0])
        expected = np.zeros(8)
        expected[6:8] = 1.0 / math.sqrt(2)
        np.testing.assert_allclose(state.amplitudes.real, expected, atol=1e-15)

    @given(finite_rows)
    def test_state_is_normalised(self, raw: np.ndarray) -> None:
        state = encode_state(raw)
        assert state.num_qubits == required_qubits(raw.shape[0])
        assert state.norm() == pytest.approx(1.0, abs=1e-12)

    @given(spread_rows, st.floats(0.1, 100.0), st.floats(-100.0, 100.0))
    def test_affine_invariance(self, raw: np.ndarray, scale: float, shift: float) -> None:
        moved = scale * raw + shift
        np.testing.assert_allclose(standardize(moved), standardize(raw), atol=1e-7)
        np.testing.assert_allclose(encode_state(moved).amplitudes, encode_state(raw).amplitudes, atol=1e-6)

    def test_gate_synthesis_matches_direct(self) -> None:
        rng = np.random.default_rng(3)
        for width in (1, 3, 6):
            raw = rng.normal(size=width)
            direct = encode_state(raw, mode='direct')
            synthesised = encode_state(raw, mode='gate_synthesis')
            assert fidelity(direct, synthesised) >= 1 - 1e-10

    def test_unknown_mode(self) -> None:
        with pytest.raises(ArgumentError):
            encode_state([1.0, 2.0], mode='angle')  # type: ignore[arg-type]


class TestBatch:

    def test_columns_match_single_encoding(self) -> None:
        rng = np.random.default_rng(8)
        rows = rng.normal(size=(5, 3))
        rows[2] = 4.0
        block = encode_batch(rows, 5)
        assert block.shape == (32, 5)
        for index, row in enumerate(rows):
            np.testing.assert_allclose(block[:, index], encode_state(row, 5).amplitudes, atol=1e-12)

    def test_capacity(self) -> None:
        with pytest.raises(CapacityError):
            encode_batch(np.ones((2, 3)), 3)
