"""Comparisons between estimated and reference shapes.

With inclinations fixed, the cable energy is unchanged by translations,
rotations about the vertical axis, and reflections through a vertical
plane.  None of these can be recovered from inclination data, so shapes are
compared after removing them.  Tilting is *not* removed: inclinations are
measured, and a tilt would hide genuine inclination error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import ShapeState, wrap_angle

__all__ = [
    "GaugeTransform",
    "align",
    "node_mae",
    "AngleRecord",
    "angle_errors",
    "NEAR_ZERO_ANGLE",
]

NEAR_ZERO_ANGLE = 0.1  # rad; smaller reference angles give no percentage error
_SPREAD_EPS = 1e-12


@dataclass(frozen=True)
class GaugeTransform:
    """``x -> Rz(yaw) S (x - pivot) + pivot + translation``.

    ``S`` is the identity, or ``diag(1, -1, 1)`` when ``reflect`` is set.
    """

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    pivot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reflect: bool = False

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "pivot", np.asarray(self.pivot, dtype=float).reshape(3))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        if self.reflect:
            rot = rot @ np.diag([1.0, -1.0, 1.0])
        return rot

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return (pts - self.pivot) @ self.matrix.T + self.pivot + self.translation

    def apply_state(self, state: ShapeState) -> ShapeState:
        """Transform strut centers and yaws; inclinations are unchanged."""
        sign = -1.0 if self.reflect else 1.0
        return ShapeState(self.apply(state.centers), wrap_angle(sign * state.thetas + self.yaw), state.phis)


def _best_yaw(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Yaw rotating centred horizontal points ``a`` onto ``b``, and the residual."""
    dot = float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    cross = float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    yaw = 0.0 if math.hypot(dot, cross) < _SPREAD_EPS else math.atan2(cross, dot)
    c, s = math.cos(yaw), math.sin(yaw)
    rotated = np.column_stack([c * a[:, 0] - s * a[:, 1], s * a[:, 0] + c * a[:, 1]])
    return yaw, float(np.sum((rotated - b[:, :2]) ** 2))


def align(est_nodes, ref_nodes, allow_reflection: bool = False) -> GaugeTransform:
    """Least-squares translation + vertical-axis rotation mapping ``est`` onto ``ref``.

    The rotation is about the centroid of ``est``.  With
    ``allow_reflection`` the mirrored cloud is also tried and the better fit
    is returned.
    """
    est = np.asarray(est_nodes, dtype=float).reshape(-1, 3)
    ref = np.asarray(ref_nodes, dtype=float).reshape(-1, 3)
    if est.shape != ref.shape or len(est) == 0:
        raise ValueError(f"need equal, non-empty node sets, got {est.shape} and {ref.shape}")
    c_est, c_ref = est.mean(axis=0), ref.mean(axis=0)
    a, b = est - c_est, ref - c_ref
    yaw, resid = _best_yaw(a, b)
    reflect = False
    if allow_reflection:
        mirrored = a * np.array([1.0, -1.0, 1.0])
        yaw_m, resid_m = _best_yaw(mirrored, b)
        if resid_m < resid:
            yaw, reflect = yaw_m, True
    return GaugeTransform(translation=c_ref - c_est, yaw=yaw, pivot=c_est, reflect=reflect)


def node_mae(est_nodes, ref_nodes, aligned: bool = True, allow_reflection: bool = False) -> float:
    """Mean Euclidean distance between corresponding points, in meters.

    Works for node clouds and strut-center clouds alike.
    """
    est = np.asarray(est_nodes, dtype=float).reshape(-1, 3)
    ref = np.asarray(ref_nodes, dtype=float).reshape(-1, 3)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {ref.shape}")
    if aligned:
        est = align(est, ref, allow_reflection).apply(est)
    return float(np.mean(np.linalg.norm(est - ref, axis=1)))


@dataclass(frozen=True)
class AngleRecord:
    strut: int
    kind: str  # "theta" or "phi"
    actual: float
    estimated: float
    percent_error: float | None  # None when |actual| is too small to divide by

    def as_dict(self) -> dict:
        return {
            "strut": self.strut,
            "kind": self.kind,
            "actual": self.actual,
            "estimated": self.estimated,
            "percent_error": self.percent_error,
        }


def percent_error(actual: float, estimated: float, near_zero: float = NEAR_ZERO_ANGLE) -> float | None:
    if abs(actual) < near_zero:
        return None
    return abs(actual - estimated) / abs(actual) * 100.0


def angle_errors(est_state: ShapeState, ref_state: ShapeState, gauge: GaugeTransform | None = None,
                 allow_reflection: bool = False) -> list[AngleRecord]:
    """Per-strut yaw and inclination errors.

    Yaws are compared after mapping the estimate through ``gauge`` (default:
    the alignment of the two node-free center clouds plus orientations), and
    the estimated yaw is unwrapped to the branch nearest the actual one.
    """
    if est_state.strut_count != ref_state.strut_count:
        raise ValueError("strut counts differ")
    if gauge is None:
        # align on centers and axis tips so that a single strut still fixes the yaw
        est_pts = np.vstack([est_state.centers, est_state.centers + est_state.orientations])
        ref_pts = np.vstack([ref_state.centers, ref_state.centers + ref_state.orientations])
        gauge = align(est_pts, ref_pts, allow_reflection)
    mapped = gauge.apply_state(est_state)
    records = []
    for i in range(ref_state.strut_count):
        actual = float(ref_state.thetas[i])
        estimated = actual + wrap_angle(mapped.thetas[i] - actual)
        records.append(AngleRecord(i, "theta", actual, estimated, percent_error(actual, estimated)))
    for i in range(ref_state.strut_count):
        actual, estimated = float(ref_state.phis[i]), float(est_state.phis[i])
        records.append(AngleRecord(i, "phi", actual, estimated, percent_error(actual, estimated)))
    return records
