import numpy as np
import pytest

from tensegrity_shape.kinematics import ShapeState, node_positions
from tensegrity_shape.metrics import GaugeTransform, align, angle_errors, node_mae, percent_error

from conftest import random_state


def cloud(seed=0, n=8):
    return np.random.default_rng(seed).normal(size=(n, 3))


def yaw_about_centroid(pts, yaw):
    c = pts.mean(axis=0)
    return GaugeTransform(yaw=yaw, pivot=c).apply(pts)


def test_identity_alignment():
    pts = cloud()
    g = align(pts, pts)
    np.testing.assert_allclose(g.translation, 0, atol=1e-15)
    assert g.yaw == pytest.approx(0.0, abs=1e-15)


def test_translation_recovered():
    pts = cloud()
    g = align(pts, pts + [1.0, 2.0, 3.0])
    np.testing.assert_allclose(g.translation, [1, 2, 3], atol=1e-12)
    assert g.yaw == pytest.approx(0.0, abs=1e-12)


def test_yaw_recovered():
    pts = cloud(1)
    g = align(pts, yaw_about_centroid(pts, 0.3))
    assert g.yaw == pytest.approx(0.3, abs=1e-9)


def test_flat_cloud_has_zero_yaw():
    pts = np.zeros((5, 3))
    pts[:, 2] = np.arange(5)
    assert align(pts, pts + 1.0).yaw == 0.0


def test_align_is_idempotent():
    a, b = cloud(2), cloud(3)
    moved = align(a, b).apply(a)
    again = align(moved, b)
    np.testing.assert_allclose(again.translation, 0, atol=1e-9)
    assert again.yaw == pytest.approx(0.0, abs=1e-9)


def test_mae_examples():
    pts = cloud(4)
    assert node_mae(pts, pts) < 1e-15
    assert node_mae(pts, pts, aligned=False) == 0.0
    shifted = pts + [0.005, 0, 0]
    assert node_mae(shifted, pts, aligned=False) == pytest.approx(0.005, rel=1e-12)
    assert node_mae(shifted, pts) == pytest.approx(0.0, abs=1e-15)


def test_alignment_reduces_squared_error():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
        moved = align(a, b).apply(a)
        assert np.sum((moved - b) ** 2) <= np.sum((a - b) ** 2) + 1e-12


def test_aligned_mae_gauge_invariant():
    a, b = cloud(6), cloud(7)
    base = node_mae(a, b)
    moved = GaugeTransform(translation=[0.3, -1, 2], yaw=1.1, pivot=[0.5, 0, 0]).apply(a)
    assert node_mae(moved, b) == pytest.approx(base, abs=1e-9)
    assert node_mae(a, yaw_about_centroid(b, -2.0) + 4.0) == pytest.approx(base, abs=1e-9)


def test_tilt_is_not_removed():
    pts = cloud(8)
    c = pts.mean(axis=0)
    t = 0.2
    rx = np.array([[1, 0, 0], [0, np.cos(t), -np.sin(t)], [0, np.sin(t), np.cos(t)]])
    assert node_mae((pts - c) @ rx.T + c, pts) > 1e-2


def test_reflection_option():
    pts = cloud(9)
    mirrored = pts * [1, -1, 1]
    assert node_mae(mirrored, pts) > 1e-2
    assert node_mae(mirrored, pts, allow_reflection=True) == pytest.approx(0.0, abs=1e-12)
    g = align(mirrored, pts, allow_reflection=True)
    assert g.reflect


def test_mae_shape_mismatch():
    with pytest.raises(ValueError):
        node_mae(np.zeros((3, 3)), np.zeros((4, 3)))


def test_percent_error_examples():
    assert percent_error(3.11, 2.94) == pytest.approx(5.4662379421221865, rel=1e-12)
    assert percent_error(1.0, 1.0) == 0.0
    # tiny reference angles give no percentage
    assert percent_error(0.02, 0.16) is None


def test_angle_errors_of_gauge_copy(prism):
    rng = np.random.default_rng(10)
    ref = random_state(rng)
    moved = GaugeTransform(translation=[1, 2, 0], yaw=0.7).apply_state(ref)
    records = angle_errors(moved, ref)
    assert len(records) == 8
    for rec in records:
        assert rec.estimated == pytest.approx(rec.actual, abs=1e-9)
        assert rec.percent_error is None or rec.percent_error < 1e-6
    np.testing.assert_allclose(node_positions(moved, prism),
                               GaugeTransform(translation=[1, 2, 0], yaw=0.7).apply(node_positions(ref, prism)),
                               atol=1e-12)


def test_angle_errors_report_inclination_error():
    ref = ShapeState(np.zeros((1, 3)), [1.0], [1.0])
    est = ShapeState(np.zeros((1, 3)), [1.0], [1.1])
    phi = [r for r in angle_errors(est, ref) if r.kind == "phi"][0]
    assert phi.percent_error == pytest.approx(10.0)
    assert phi.as_dict()["strut"] == 0
