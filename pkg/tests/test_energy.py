import numpy as np
import pytest

from tensegrity_shape.energy import (
    EnergyModel,
    SingularConfigurationError,
    cable_vectors,
    grad_p,
    grad_theta,
    total_energy,
)
from tensegrity_shape.kinematics import ShapeState, node_positions
from tensegrity_shape.model import CableSpec, StructureSpec, build_connectivity
from tensegrity_shape.simulate import _pack, oracle_energy

from conftest import random_state
from test_model import PUBLISHED_CS_X


def two_struts(k=64.0, b=0.0):
    # strut 0 vertical at the origin, strut 1 vertical 0.25 m away along x;
    # the single cable joins their top nodes
    spec = StructureSpec((0.37, 0.37), (CableSpec(0, 1, k, b),))
    state = ShapeState([[0, 0, 0], [0.25, 0, 0]], [0.0, 0.0], [0.0, 0.0])
    return spec, state


def test_single_cable_zero_rest():
    spec, state = two_struts()
    rep = total_energy(state, spec)
    assert rep.total == pytest.approx(2.0, rel=1e-14)
    assert rep.cable_lengths[0] == pytest.approx(0.25, rel=1e-14)


def test_single_cable_with_rest():
    spec, state = two_struts(b=0.22)
    assert total_energy(state, spec).total == pytest.approx(0.0288, rel=1e-12)


def test_all_cables_at_rest_length(prism):
    rng = np.random.default_rng(0)
    state = random_state(rng)
    conn = build_connectivity(prism)
    lengths = np.linalg.norm(cable_vectors(node_positions(state, prism), conn), axis=1)
    relaxed = prism.with_rest_lengths(lengths)
    assert total_energy(state, relaxed).total == pytest.approx(0.0, abs=1e-25)
    np.testing.assert_allclose(grad_p(state, relaxed), 0.0, atol=1e-12)
    np.testing.assert_allclose(grad_theta(state, relaxed), 0.0, atol=1e-12)


def test_cable_vector_examples(prism):
    spec = StructureSpec((1.0,), (CableSpec(0, 1, 1.0),))
    conn = build_connectivity(spec)
    np.testing.assert_array_equal(cable_vectors([[1, 0, 0], [0, 0, 0]], conn), [[1, 0, 0]])
    np.testing.assert_array_equal(cable_vectors([[2, 3, 4], [2, 3, 4]], conn), [[0, 0, 0]])


def test_cable_vectors_equal_published_matrix_product(prism):
    rng = np.random.default_rng(1)
    nodes = node_positions(random_state(rng), prism)
    expected = np.stack([PUBLISHED_CS_X @ nodes[:, axis] for axis in range(3)], axis=1)
    np.testing.assert_allclose(cable_vectors(nodes, build_connectivity(prism)), expected, atol=1e-15)


def test_report_consistency(taut_prism):
    rng = np.random.default_rng(2)
    for _ in range(20):
        rep = total_energy(random_state(rng), taut_prism)
        assert np.all(rep.per_cable >= 0)
        assert rep.total == pytest.approx(rep.per_cable.sum(), rel=1e-12)


def test_quadratic_form_when_rest_is_zero(prism):
    rng = np.random.default_rng(3)
    state = random_state(rng)
    conn = build_connectivity(prism)
    m = conn.block_form("Cs") @ node_positions(state, prism).reshape(-1)
    k = np.repeat(prism.stiffnesses, 3)
    assert total_energy(state, prism).total == pytest.approx(0.5 * m @ (k * m), rel=1e-13)


def test_agrees_with_independent_energy(taut_prism):
    rng = np.random.default_rng(4)
    for _ in range(20):
        state = random_state(rng)
        assert total_energy(state, taut_prism).total == pytest.approx(oracle_energy(_pack(state), taut_prism), rel=1e-13)


def test_zero_rest_center_gradient_closed_form(prism):
    # A Cs^T K Cs n with A summing both nodes of each strut
    rng = np.random.default_rng(5)
    state = random_state(rng)
    conn = build_connectivity(prism)
    n = node_positions(state, prism)
    node_grad = conn.Cs.T @ (prism.stiffnesses[:, None] * (conn.Cs @ n))
    np.testing.assert_allclose(grad_p(state, prism), node_grad[:4] + node_grad[4:], atol=1e-12)


def test_pole_strut_has_no_yaw_gradient(taut_prism):
    rng = np.random.default_rng(6)
    state = random_state(rng)
    phis = state.phis.copy()
    phis[2] = 0.0
    g = grad_theta(state.replace(phis=phis), taut_prism)
    assert g[2] == 0.0


def test_center_gradient_sums_to_zero(taut_prism):
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = grad_p(random_state(rng), taut_prism)
        assert np.all(np.abs(g.sum(axis=0)) < 1e-10 * np.linalg.norm(g))


def test_fast_path_matches_reference_paths(taut_prism):
    model = EnergyModel(taut_prism)
    rng = np.random.default_rng(8)
    for _ in range(20):
        s = random_state(rng)
        e, gp, gt = model.gradients(s.centers, s.phis, s.thetas)
        assert e == pytest.approx(total_energy(s, taut_prism).total, rel=1e-14)
        np.testing.assert_allclose(gp, grad_p(s, taut_prism), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(gt, grad_theta(s, taut_prism), rtol=1e-12, atol=1e-14)


def test_zero_length_taut_cable_is_singular():
    spec, state = two_struts(b=0.1)
    collapsed = state.replace(centers=[[0, 0, 0], [0, 0, 0]])
    with pytest.raises(SingularConfigurationError):
        grad_p(collapsed, spec)
    with pytest.raises(SingularConfigurationError):
        grad_theta(collapsed, spec)


def test_zero_length_slack_cable_is_fine():
    spec, state = two_struts(b=0.0)
    collapsed = state.replace(centers=[[0, 0, 0], [0, 0, 0]])
    assert total_energy(collapsed, spec).total == 0.0
    np.testing.assert_array_equal(grad_p(collapsed, spec), 0.0)


def test_mismatched_state_rejected(prism):
    with pytest.raises(ValueError):
        total_energy(ShapeState(np.zeros((2, 3)), [0, 0], [0, 0]), prism)
