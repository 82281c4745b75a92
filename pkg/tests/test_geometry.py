import numpy as np
import pytest
from hypothesis import given, strategies as st

from app.model.geometry import min_image_disp, torus_distance
from app.model.types import SystemState, wrap_positions

L = 11.5
coord = st.floats(min_value=0.0, max_value=L, exclude_max=True, allow_nan=False)


def test_wrap_around_pair():
    assert np.allclose(min_image_disp((0.5, 0.5), (11.0, 11.0), L), (1.0, 1.0), atol=1e-12)


def test_identical_points():
    assert np.array_equal(min_image_disp((3.0, 4.0), (3.0, 4.0), L), (0.0, 0.0))


def test_half_box_tie_goes_to_lower_end():
    assert np.array_equal(min_image_disp((0.0, 0.0), (5.75, 0.0), L), (-5.75, 0.0))
    assert np.array_equal(min_image_disp((5.75, 0.0), (0.0, 0.0), L), (-5.75, 0.0))


@given(coord, coord, coord, coord)
def test_components_in_half_open_interval(ax, ay, bx, by):
    d = min_image_disp((ax, ay), (bx, by), L)
    assert np.all(d >= -L / 2) and np.all(d < L / 2)


@given(coord, coord, coord, coord)
def test_antisymmetric_except_at_tie(ax, ay, bx, by):
    d_ab = min_image_disp((ax, ay), (bx, by), L)
    d_ba = min_image_disp((bx, by), (ax, ay), L)
    for k in range(2):
        if d_ab[k] == -L / 2:
            assert d_ba[k] == -L / 2
        else:
            assert d_ab[k] == pytest.approx(-d_ba[k], abs=1e-12)


@given(coord, coord, coord, coord)
def test_torus_distance_bounded_and_symmetric(ax, ay, bx, by):
    r = torus_distance((ax, ay), (bx, by), L)
    assert 0.0 <= r <= np.sqrt(2) * L / 2 + 1e-12
    assert r == pytest.approx(torus_distance((bx, by), (ax, ay), L), abs=1e-12)


def test_wrap_positions_half_open():
    wrapped = wrap_positions(np.array([[-1e-17, 11.5], [12.0, -0.5]]), L)
    assert np.all(wrapped >= 0.0) and np.all(wrapped < L)
    assert wrapped[0, 0] == 0.0
    assert wrapped[0, 1] == 0.0
    assert wrapped[1] == pytest.approx([0.5, 11.0])


def test_state_creation_zeroes_displacement_and_time():
    state = SystemState.create([[12.0, 1.0], [3.0, -1.0]], [[1.0, 0.0], [0.0, 1.0]], L)
    assert np.all(state.positions >= 0) and np.all(state.positions < L)
    assert np.array_equal(state.displacement, np.zeros((2, 2)))
    assert state.time == 0.0


def test_state_rejects_bad_shapes():
    with pytest.raises(ValueError):
        SystemState.create([[1.0, 2.0, 3.0]], [[0.0, 0.0, 0.0]], L)
