import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.errors import DomainError
from app.model.potential import R_MIN, cutoff_jump, lj_pair_force, lj_potential
from app.model.types import SimConfig


def test_zero_crossing_at_unit_distance():
    assert lj_potential(1.0, 2.5) == 0.0


def test_minimum_value():
    assert lj_potential(R_MIN, 2.5) == pytest.approx(-1.0, rel=1e-14)


def test_value_at_cutoff_is_kept():
    expected = 4.0 * (2.5 ** -12 - 2.5 ** -6)
    assert lj_potential(2.5, 2.5) == pytest.approx(expected, rel=1e-14)
    assert lj_potential(2.5, 2.5) == pytest.approx(-0.0163169, abs=1e-7)


def test_beyond_cutoff_is_exactly_zero():
    assert lj_potential(3.0, 2.5) == 0.0
    assert lj_potential(3.0, 2.5, shift=cutoff_jump(2.5)) == 0.0


def test_zero_distance_is_domain_error():
    with pytest.raises(DomainError):
        lj_potential(0.0, 2.5)
    with pytest.raises(DomainError):
        lj_pair_force((0.0, 0.0), 2.5)


def test_force_vanishes_at_minimum():
    f = lj_pair_force((R_MIN, 0.0), 2.5)
    assert np.allclose(f, 0.0, atol=1e-12)


def test_force_beyond_cutoff_is_zero():
    assert np.array_equal(lj_pair_force((2.0, 2.0), 2.5), (0.0, 0.0))


def test_shifted_energy_is_continuous_at_cutoff():
    config = SimConfig(shift_potential=True)
    assert lj_potential(2.5, 2.5, shift=config.energy_shift) == pytest.approx(0.0, abs=1e-15)
    assert SimConfig().energy_shift == 0.0


@settings(max_examples=200)
@given(
    r=st.floats(min_value=0.9, max_value=2.4),
    angle=st.floats(min_value=0.0, max_value=2 * math.pi),
)
def test_force_is_minus_gradient(r, angle):
    disp = np.array([r * math.cos(angle), r * math.sin(angle)])
    force = lj_pair_force(disp, 2.5)
    h = 1e-6 * r
    # центральная разность: V(r + h) - V(r - h) по радиусу
    dv = (lj_potential(r + h, 2.5) - lj_potential(r - h, 2.5)) / (2 * h)
    expected = -dv * disp / r
    scale = max(np.linalg.norm(expected), 1e-3)
    assert np.linalg.norm(force - expected) / scale < 1e-6
