import numpy as np
import pytest
from hypothesis import given, strategies as st

from kim.adam import AdamState, adam_step


def test_first_step_hand_oracle():
    # t=1 bias correction cancels exactly: step = lr * g / (|g| + eps)
    state, values = adam_step(AdamState(), {"w": 1.0}, {"w": 0.5}, lr=0.03)
    assert values["w"] == pytest.approx(0.9700000006, abs=1e-12)
    assert state.t == 1


def test_momentum_persists_through_zero_gradient():
    # frozen two-step trace: g=0.5 then g=0; the second update still moves
    state, values = adam_step(AdamState(), {"w": 1.0}, {"w": 0.5}, lr=0.03)
    state, values = adam_step(state, values, {"w": 0.0}, lr=0.03)
    assert values["w"] == pytest.approx(0.9498982535446093, abs=1e-12)


def test_zero_gradient_from_rest_is_a_fixed_point():
    _, values = adam_step(AdamState(), {"w": 2.5}, {"w": 0.0}, lr=0.1)
    assert values["w"] == 2.5


def test_untouched_keys_pass_through():
    vec = np.array([1.0, 2.0])
    state, values = adam_step(AdamState(), {"w": 1.0, "frozen": vec},
                              {"w": 1.0}, lr=0.01)
    assert values["frozen"] is vec
    assert "frozen" not in state.m


def test_scalars_stay_floats_vectors_stay_arrays():
    _, values = adam_step(AdamState(), {"s": 1.0, "v": np.ones(3)},
                          {"s": 0.2, "v": np.full(3, 0.2)}, lr=0.01)
    assert isinstance(values["s"], float)
    assert isinstance(values["v"], np.ndarray) and values["v"].shape == (3,)


def test_nonfinite_gradient_aborts_with_name():
    with pytest.raises(FloatingPointError, match="steer_w"):
        adam_step(AdamState(), {"steer_w": 1.0}, {"steer_w": np.nan}, lr=0.01)


def test_input_state_not_mutated():
    state = AdamState()
    values = {"w": 1.0}
    adam_step(state, values, {"w": 0.5}, lr=0.03)
    assert state.t == 0 and state.m == {} and values["w"] == 1.0


@given(st.floats(min_value=1e-6, max_value=1e6),
       st.sampled_from([-1.0, 1.0]))
def test_first_step_moves_against_gradient(mag, sign):
    g = sign * mag
    _, values = adam_step(AdamState(), {"w": 0.0}, {"w": g}, lr=0.05)
    assert np.sign(values["w"]) == -np.sign(g)
    # and never overshoots the corrected first-step bound
    assert abs(values["w"]) <= 0.05 + 1e-12
