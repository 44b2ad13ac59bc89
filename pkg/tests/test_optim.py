import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrlfolio.errors import ArgumentError
from qrlfolio.optim import OptimizerState, optimizer_step, soft_update


class TestOptimizer:

    def test_sgd_step(self) -> None:
        opt = OptimizerState('sgd', 2, 0.1)
        np.testing.assert_allclose(optimizer_step(opt, [1.0, -1.0], [2.0, 0.5]), [0.8, -1.05])
        assert opt.step == 1

    def test_l2_term(self) -> None:
        opt = OptimizerState('sgd', 1, 0.1, l2=0.5)
        # gradient becomes 0 + 2 * 0.5 * 2.0
        np.testing.assert_allclose(optimizer_step(opt, [2.0], [0.0]), [1.8])

    def test_adam_first_step_is_sign_step(self) -> None:
        opt = OptimizerState('adam', 3, 0.01)
        updated = optimizer_step(opt, [0.0, 1.0, -1.0], [5.0, -0.001, 200.0])
        np.testing.assert_allclose(updated, [-0.01, 1.01, -1.01], atol=1e-6)

    def test_adam_minimises_quadratic(self) -> None:
        opt = OptimizerState('adam', 2, 0.05)
        target = np.array([3.0, -2.0])
        params = np.zeros(2)
        for _ in range(2000):
            params = optimizer_step(opt, params, 2 * (params - target))
        np.testing.assert_allclose(params, target, atol=1e-2)

    def test_state_survives_serialisation(self) -> None:
        opt = OptimizerState('adam', 2, 0.01, 1e-4)
        params = optimizer_step(opt, [0.5, 0.5], [1.0, -1.0])
        restored = OptimizerState.from_dict(opt.to_dict())
        np.testing.assert_array_equal(optimizer_step(restored, params, [0.3, 0.2]),
                                      optimizer_step(opt, params, [0.3, 0.2]))

    def test_invalid(self) -> None:
        with pytest.raises(ArgumentError):
            OptimizerState('rmsprop', 1, 0.1)  # type: ignore[arg-type]
        with pytest.raises(ArgumentError):
            OptimizerState('sgd', 1, 0.0)
        with pytest.raises(ArgumentError):
            optimizer_step(OptimizerState('sgd', 2, 0.1), [1.0], [1.0])


class TestSoftUpdate:

    def test_blend(self) -> None:
        np.testing.assert_allclose(soft_update([1.0, 2.0], [0.0, 4.0], 0.25), [0.25, 3.5])

    def test_extremes_copy_exactly(self) -> None:
        online = np.array([0.1, 0.2])
        target = np.array([0.7, 0.3])
        np.testing.assert_array_equal(soft_update(online, target, 1.0), online)
        np.testing.assert_array_equal(soft_update(online, target, 0.0), target)

    @given(st.floats(0.001, 1.0), st.integers(1, 50))
    def test_gap_shrinks_geometrically(self, tau: float, steps: int) -> None:
        online = np.array([1.0, -2.0, 0.5])
        target = np.zeros(3)
        for step in range(1, steps + 1):
            target = soft_update(online, target, tau)
            np.testing.assert_allclose(online - target, online * (1 - tau) ** step, rtol=1e-9, atol=1e-12)

    def test_invalid(self) -> None:
        with pytest.raises(ArgumentError):
            soft_update([1.0], [1.0], 1.5)
        with pytest.raises(ArgumentError):
            soft_update([1.0], [1.0, 2.0], 0.5)
