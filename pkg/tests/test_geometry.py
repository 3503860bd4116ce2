import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergwehrl.geometry import (BallSpec, Point, as_points, ball_measure_from_radius, hermitian_inner, mobius,
                                mobius_array, measure_of_euclidean_ball, radius_from_measure)


def ball_points(n, rmax=0.97):
    comp = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(lambda t: complex(*t))
    return st.lists(comp, min_size=n, max_size=n).map(
        lambda cs: np.array(cs) * (rmax / max(1.0, math.sqrt(sum(abs(c) ** 2 for c in cs)) + 1e-9)))


def test_point_rejects_boundary_and_nan():
    with pytest.raises(ValueError):
        Point([1.0])
    with pytest.raises(ValueError):
        Point([0.6, 0.8])
    with pytest.raises(ValueError):
        Point([float("nan")])
    assert Point(0.5).dim == 1
    assert Point.origin(3).norm_sq == 0.0


def test_as_points_shapes():
    assert as_points(Point([0.1, 0.2])).shape == (1, 2)
    assert as_points([0.1, 0.2], dim=1).shape == (2, 1)
    with pytest.raises(ValueError):
        as_points(np.zeros((3, 2)), dim=3)


def test_hermitian_inner_is_conjugate_linear_in_second_slot():
    z, w = [1j, 0.5], [0.2, 0.3j]
    assert hermitian_inner(z, w) == pytest.approx(1j * 0.2 + 0.5 * (-0.3j))


def test_mobius_swaps_center_and_origin():
    z0 = Point([0.3 + 0.1j, -0.2j])
    assert np.allclose(mobius(z0, Point.origin(2)).array, z0.array)
    assert np.allclose(mobius(z0, z0).array, 0, atol=1e-15)
    z = Point([0.1, 0.4j])
    assert mobius(Point.origin(2), z) == z


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(ball_points(n), ball_points(n))))
def test_mobius_involution_and_invariant_identity(pair):
    a, z = pair
    w = mobius_array(a, z[None, :])
    back = mobius_array(a, w)[0]
    assert np.allclose(back, z, atol=1e-9)
    # 1 - |Y_a(z)|^2 = (1-|a|^2)(1-|z|^2) / |1 - <z,a>|^2
    lhs = 1 - np.sum(np.abs(w) ** 2)
    rhs = (1 - np.vdot(a, a).real) * (1 - np.vdot(z, z).real) / abs(1 - np.vdot(a, z)) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(ball_points(n, 0.9), st.floats(0, 2 * math.pi))))
def test_mobius_preserves_boundary(args):
    a, theta = args
    n = len(a)
    u = np.zeros(n, complex)
    u[0] = np.exp(1j * theta)
    w = mobius_array(a, u[None, :])[0]
    assert np.vdot(w, w).real == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e6), st.integers(1, 4))
def test_measure_radius_roundtrip(s, n):
    rho, r = radius_from_measure(s, n)
    assert ball_measure_from_radius(rho, n) == pytest.approx(s, rel=1e-9, abs=1e-300)
    if r < 1:
        assert measure_of_euclidean_ball(r, n) == pytest.approx(s, rel=1e-6, abs=1e-12)
    assert math.tanh(rho) == pytest.approx(r, rel=1e-12)


def test_ball_spec_contains_its_center_not_far_points():
    ball = BallSpec(Point([0.5j]), 1.0)
    # |Y_{0.5i}(0)| = 0.5 < sqrt(1/2), so the origin is inside
    z = np.array([[0.5j], [0.0], [-0.9], [0.8j]])
    assert ball.contains(z).tolist() == [True, True, False, True]
    with pytest.raises(ValueError):
        BallSpec(Point([0.0]), float("inf"))


def test_centered_ball_of_measure_one_has_radius_sqrt_half():
    assert BallSpec(Point([0j]), 1.0).euclidean_radius == pytest.approx(math.sqrt(0.5))
