import numpy as np
import pytest
from hypothesis import given, strategies as st

from kim.normalize import TRACK_EXTENT, apply_normalizer, fit_normalizer


def test_lander_is_identity():
    n = fit_normalizer("lander")
    assert n.is_identity
    obs = np.array([0.3, 1.2, -0.5, 0.0, 0.1, -0.2, 0.0, 1.0])
    assert apply_normalizer(n, obs) is obs


def test_unknown_env_rejected():
    with pytest.raises(ValueError, match="unknown env"):
        fit_normalizer("pendulum")


def test_racing_extent_maps_to_one():
    # a tile at the declared extent in every scaled feature lands on 1.0
    n = fit_normalizer("racing")
    tiles = np.array([[TRACK_EXTENT] * 4 + [np.pi, 1.0, 1.0, 1.0]])
    indicators = np.zeros(7)
    t, _ = apply_normalizer(n, (tiles, indicators))
    np.testing.assert_allclose(t, np.ones((1, 8)), atol=1e-15)


def test_racing_midpoint_and_clamp():
    n = fit_normalizer("racing")
    tiles = np.array([[40.0, -40.0, 200.0, -200.0, np.pi / 2, 0.5, 2.0, -3.0]])
    t, _ = apply_normalizer(n, (tiles, np.zeros(7)))
    np.testing.assert_allclose(
        t, [[0.5, -0.5, 1.0, -1.0, 0.5, 0.5, 1.0, -1.0]], atol=1e-15)


def test_racing_indicators_clamped_not_rescaled():
    n = fit_normalizer("racing")
    ind = np.array([0.3, -0.3, 1.0, -1.0, 5.0, -5.0, 0.0])
    _, out = apply_normalizer(n, (np.zeros((1, 8)), ind))
    np.testing.assert_array_equal(out, [0.3, -0.3, 1.0, -1.0, 1.0, -1.0, 0.0])


def test_original_arrays_untouched():
    n = fit_normalizer("racing")
    tiles = np.full((2, 8), 7.0)
    ind = np.full(7, 7.0)
    apply_normalizer(n, (tiles, ind))
    assert tiles[0, 0] == 7.0 and ind[0] == 7.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=15, max_size=15))
def test_racing_output_always_in_unit_box(vals):
    n = fit_normalizer("racing")
    tiles = np.array(vals[:8]).reshape(1, 8)
    ind = np.array(vals[8:])
    t, i = apply_normalizer(n, (tiles, ind))
    assert np.all(t >= -1.0) and np.all(t <= 1.0)
    assert np.all(i >= -1.0) and np.all(i <= 1.0)
