import math

import numpy as np
import pytest

from tensegrity_shape.kinematics import (
    ShapeState,
    StrutPose,
    inclination_of,
    node_positions,
    node_positions_assembled,
    orientation_from_angles,
    orientation_jacobian_theta,
    wrap_angle,
    yaw_of,
)
from tensegrity_shape.model import StructureSpec

from conftest import random_state


def test_orientation_pole_and_equator():
    np.testing.assert_array_equal(orientation_from_angles(0.0, 1.234), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(orientation_from_angles(np.pi / 2, 0.0), [1.0, 0.0, 0.0], atol=1e-16)


def test_orientation_table_strut_one():
    # evaluated at 30 digits with mpmath before the implementation existed
    expected = [-0.81300960526804012521, 0.025693679644171121068, 0.58168308946388349417]
    np.testing.assert_allclose(orientation_from_angles(0.95, 3.11), expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("phi", [-0.1, 3.2, float("nan")])
def test_orientation_rejects_bad_phi(phi):
    with pytest.raises(ValueError):
        orientation_from_angles(phi, 0.0)


def test_jacobian_examples():
    np.testing.assert_array_equal(orientation_jacobian_theta(0.0, 2.0), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(orientation_jacobian_theta(np.pi / 2, 0.0), [0.0, 1.0, 0.0], atol=1e-16)


def test_jacobian_matches_finite_difference():
    rng = np.random.default_rng(1)
    h = 1e-6
    for phi, theta in zip(rng.uniform(0, np.pi, 50), rng.uniform(-np.pi, np.pi, 50)):
        fd = (orientation_from_angles(phi, theta + h) - orientation_from_angles(phi, theta - h)) / (2 * h)
        np.testing.assert_allclose(orientation_jacobian_theta(phi, theta), fd, atol=1e-8)


def test_inclination_examples():
    assert inclination_of([0.0, 0.0, 1.0]) == 0.0
    assert inclination_of([1.0, 0.0, 0.0]) == pytest.approx(np.pi / 2, abs=1e-15)
    with pytest.raises(ValueError):
        inclination_of([1.0, 1.0, 0.0])


def test_inclination_round_trip():
    rng = np.random.default_rng(2)
    phi = rng.uniform(0, np.pi, 1000)
    theta = rng.uniform(-np.pi, np.pi, 1000)
    np.testing.assert_allclose(inclination_of(orientation_from_angles(phi, theta)), phi, rtol=0, atol=1e-12)


def test_yaw_round_trip():
    rng = np.random.default_rng(3)
    phi = rng.uniform(0.1, np.pi - 0.1, 200)
    theta = rng.uniform(-np.pi, np.pi, 200)
    np.testing.assert_allclose(wrap_angle(yaw_of(orientation_from_angles(phi, theta)) - theta), 0, atol=1e-12)


def test_wrap_angle_range():
    a = np.linspace(-20, 20, 4001)
    w = wrap_angle(a)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(a), atol=1e-12)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(np.pi) == pytest.approx(np.pi)


def test_strut_pose_normalises_yaw():
    pose = StrutPose([0, 0, 0], 0.5, 3 * np.pi)
    assert pose.theta == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        StrutPose([0, 0, 0], 4.0, 0.0)


def test_vertical_strut_nodes():
    spec = StructureSpec((0.37,), ())
    nodes = node_positions(ShapeState(np.zeros((1, 3)), [0.0], [0.0]), spec)
    np.testing.assert_allclose(nodes, [[0, 0, 0.185], [0, 0, -0.185]], atol=1e-16)


def test_midpoint_and_length(prism):
    rng = np.random.default_rng(4)
    for _ in range(20):
        state = random_state(rng)
        nodes = node_positions(state, prism)
        np.testing.assert_allclose((nodes[:4] + nodes[4:]) / 2, state.centers, atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(nodes[:4] - nodes[4:], axis=1), 0.37, rtol=1e-14)


def test_assembled_form_agrees(prism):
    rng = np.random.default_rng(5)
    for _ in range(20):
        state = random_state(rng)
        np.testing.assert_allclose(node_positions_assembled(state, prism), node_positions(state, prism),
                                   rtol=0, atol=1e-12)


def test_linear_in_centers(prism):
    rng = np.random.default_rng(6)
    state = random_state(rng)
    delta = rng.normal(size=(4, 3))
    moved = node_positions(state.replace(centers=state.centers + delta), prism) - node_positions(state, prism)
    np.testing.assert_allclose(moved, np.vstack([delta, delta]), atol=1e-14)


def test_state_validation(prism):
    with pytest.raises(ValueError):
        ShapeState(np.zeros((4, 3)), np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        ShapeState(np.zeros((1, 3)), [0.0], [-0.5])
    with pytest.raises(ValueError):
        node_positions(ShapeState(np.zeros((2, 3)), [0, 0], [0, 0]), prism)


def test_state_arrays_are_frozen():
    state = ShapeState(np.zeros((2, 3)), [0.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        state.centers[0, 0] = 1.0


def test_from_orientations_round_trip():
    rng = np.random.default_rng(7)
    state = random_state(rng)
    again = ShapeState.from_orientations(state.centers, state.orientations)
    np.testing.assert_allclose(again.phis, state.phis, atol=1e-12)
    np.testing.assert_allclose(wrap_angle(again.thetas - state.thetas), 0, atol=1e-12)
    assert math.isclose(np.linalg.norm(state.orientations[0]), 1.0, rel_tol=1e-15)
