import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safehold import (
    ContractViolation,
    StateVector,
    double_integrator,
    estimate_lipschitz,
    eval_vector_field,
)

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


def state(entries, t=0.0):
    return StateVector(entries=np.asarray(entries, dtype=float), time=t)


class TestEvalVectorField:
    def test_drift_only(self, plant):
        assert np.allclose(eval_vector_field(plant, state([6.0, 5.0]), [0.0]), [5.0, 0.0])

    def test_input_only(self, plant):
        assert np.allclose(eval_vector_field(plant, state([0.0, 0.0]), [3.0]), [0.0, 3.0])

    def test_both_terms(self, plant):
        assert np.allclose(eval_vector_field(plant, state([1.0, -2.0]), [4.0]), [-2.0, 4.0])

    def test_closed_loop_equilibrium(self, plant):
        assert np.allclose(eval_vector_field(plant, state([-7.0, 0.0]), [0.0]), [0.0, 0.0])

    def test_dimension_mismatch_rejected(self, plant):
        with pytest.raises(ContractViolation):
            eval_vector_field(plant, state([1.0, 2.0]), [1.0, 2.0])
        with pytest.raises(ContractViolation):
            eval_vector_field(plant, state([1.0, 2.0, 3.0]), [1.0])

    def test_pure_and_bitwise_deterministic(self, plant):
        x = state([0.3, -1.7])
        a = eval_vector_field(plant, x, [2.5])
        b = eval_vector_field(plant, x, [2.5])
        assert np.array_equal(a, b)

    @given(x1=finite, x2=finite, u=finite)
    @settings(max_examples=60, deadline=None)
    def test_matches_hand_form(self, x1, x2, u):
        sys_ = double_integrator()
        out = eval_vector_field(sys_, state([x1, x2]), [u])
        assert out[0] == x2 and out[1] == u


class TestDoubleIntegrator:
    def test_dimensions_and_constant(self):
        sys_ = double_integrator()
        assert sys_.state_dim == 2 and sys_.input_dim == 1
        assert sys_.lipschitz_const == 1.0

    def test_nonpositive_lipschitz_rejected(self):
        with pytest.raises(ContractViolation):
            double_integrator(lipschitz_const=0.0)

    @given(
        x1=finite, x2=finite, y1=finite, y2=finite,
        u=st.floats(min_value=-20, max_value=20, allow_nan=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_unit_lipschitz_bound_on_held_field(self, x1, x2, y1, y2, u):
        sys_ = double_integrator()
        fx = eval_vector_field(sys_, state([x1, x2]), [u])
        fy = eval_vector_field(sys_, state([y1, y2]), [u])
        lhs = np.linalg.norm(fx - fy)
        rhs = sys_.lipschitz_const * np.linalg.norm([x1 - y1, x2 - y2])
        assert lhs <= rhs + 1e-12


class TestStateVector:
    def test_rejects_nan_and_negative_time(self):
        with pytest.raises(ContractViolation):
            state([np.nan, 0.0])
        with pytest.raises(ContractViolation):
            state([0.0, 0.0], t=-1.0)

    def test_entries_are_write_locked(self):
        x = state([1.0, 2.0])
        with pytest.raises(ValueError):
            x.entries[0] = 5.0


class TestEstimateLipschitz:
    def test_double_integrator_estimate_close_to_one(self, plant):
        est = estimate_lipschitz(
            plant, (-10.0, -10.0), (10.0, 10.0), (-20.0,), (20.0,),
            pairs=5000, rng=np.random.default_rng(0),
        )
        assert 0.9 <= est.value <= 1.0 + 1e-9
        assert est.pairs == 5000
        assert est.is_certified is False

    def test_invalid_boxes_rejected(self, plant):
        with pytest.raises(ContractViolation):
            estimate_lipschitz(plant, (1.0, 0.0), (0.0, 1.0), (-1.0,), (1.0,))
        with pytest.raises(ContractViolation):
            estimate_lipschitz(plant, (0.0, 0.0), (1.0, 1.0), (-1.0,), (1.0,), pairs=0)
