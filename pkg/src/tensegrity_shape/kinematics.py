"""Strut poses, orientation vectors and node positions.

Gravity points along ``-z``.  The inclination ``phi`` is measured from the
``+z`` axis and the yaw ``theta`` is the azimuth about it, so a strut axis is

    q = (sin(phi) cos(theta), sin(phi) sin(theta), cos(phi)).

At ``phi = 0`` the yaw is undefined; the stored value is kept and its
derivatives vanish there, so an optimizer simply cannot move it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import StructureSpec

__all__ = [
    "StrutPose",
    "ShapeState",
    "wrap_angle",
    "orientation_from_angles",
    "orientation_jacobian_theta",
    "inclination_of",
    "yaw_of",
    "node_positions",
    "node_positions_assembled",
    "assembly_matrices",
]

_UNIT_TOL = 1e-9


def wrap_angle(a):
    """Map angles to (-pi, pi]; values already in range are returned unchanged."""
    a = np.asarray(a, dtype=float)
    w = np.where((a > -np.pi) & (a <= np.pi), a, np.pi - np.mod(np.pi - a, 2 * np.pi))
    return float(w) if np.ndim(w) == 0 else w


def _check_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(phi)) or np.any(phi < 0) or np.any(phi > np.pi):
        raise ValueError(f"inclination must lie in [0, pi], got {phi}")
    return phi


def orientation_from_angles(phi, theta) -> np.ndarray:
    """Unit strut axis from inclination and yaw; vectorised over leading shape."""
    phi = _check_phi(phi)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(phi)
    return np.stack([s * np.cos(theta), s * np.sin(theta), np.cos(phi)], axis=-1)


def orientation_jacobian_theta(phi, theta) -> np.ndarray:
    """Derivative of :func:`orientation_from_angles` with respect to yaw."""
    phi = _check_phi(phi)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(phi)
    return np.stack([-s * np.sin(theta), s * np.cos(theta), np.zeros_like(s * theta)], axis=-1)


def inclination_of(q) -> float | np.ndarray:
    """Angle between a unit axis and ``+z``, in [0, pi]."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > _UNIT_TOL):
        raise ValueError(f"expected unit vector(s), got norm {norm}")
    out = np.arccos(np.clip(q[..., 2], -1.0, 1.0))
    return float(out) if out.ndim == 0 else out


def yaw_of(q) -> float | np.ndarray:
    q = np.asarray(q, dtype=float)
    out = np.arctan2(q[..., 1], q[..., 0])
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StrutPose:
    center: np.ndarray
    phi: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "phi", float(_check_phi(self.phi)))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def orientation(self) -> np.ndarray:
        return orientation_from_angles(self.phi, self.theta)


@dataclass(frozen=True)
class ShapeState:
    """Strut centers ``(m_b, 3)``, yaws ``(m_b,)`` and measured inclinations ``(m_b,)``.

    ``p`` gives the flattened center vector in (x, y, z) interleaved order.
    """

    centers: np.ndarray
    thetas: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, 3)
        thetas = np.array(self.thetas, dtype=float).reshape(-1)
        phis = np.array(self.phis, dtype=float).reshape(-1)
        if not (len(centers) == len(thetas) == len(phis)):
            raise ValueError(
                f"inconsistent strut counts: {len(centers)} centers, "
                f"{len(thetas)} thetas, {len(phis)} phis"
            )
        _check_phi(phis)
        for arr in (centers, thetas, phis):
            arr.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "phis", phis)

    @property
    def strut_count(self) -> int:
        return len(self.thetas)

    @property
    def p(self) -> np.ndarray:
        return self.centers.reshape(-1)

    @property
    def orientations(self) -> np.ndarray:
        return orientation_from_angles(self.phis, self.thetas)

    def replace(self, centers=None, thetas=None, phis=None) -> "ShapeState":
        return ShapeState(
            self.centers if centers is None else centers,
            self.thetas if thetas is None else thetas,
            self.phis if phis is None else phis,
        )

    def poses(self) -> list[StrutPose]:
        return [StrutPose(c, ph, th) for c, ph, th in zip(self.centers, self.phis, self.thetas)]

    @classmethod
    def from_orientations(cls, centers, q) -> "ShapeState":
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q, axis=-1, keepdims=True)
        return cls(centers, yaw_of(q), inclination_of(q))


def _check_state(state: ShapeState, spec: StructureSpec):
    if state.strut_count != spec.strut_count:
        raise ValueError(
            f"state has {state.strut_count} struts but spec {spec.name!r} has {spec.strut_count}"
        )


def node_positions(state: ShapeState, spec: StructureSpec) -> np.ndarray:
    """Node coordinates, shape ``(2 m_b, 3)``; ``.ravel()`` gives the stacked vector."""
    _check_state(state, spec)
    half = 0.5 * spec.lengths[:, None] * state.orientations
    return np.concatenate([state.centers + half, state.centers - half])


def assembly_matrices(spec: StructureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``A = [I | I]`` and ``B = [L/2 | -L/2]`` of size ``3m_b x 3n``."""
    m3 = 3 * spec.strut_count
    eye = np.eye(m3)
    half_l = np.diag(np.repeat(spec.lengths, 3) / 2.0)
    return np.hstack([eye, eye]), np.hstack([half_l, -half_l])


def node_positions_assembled(state: ShapeState, spec: StructureSpec) -> np.ndarray:
    """Same as :func:`node_positions` via the dense ``A^T p + B^T q`` product."""
    _check_state(state, spec)
    a, b = assembly_matrices(spec)
    n = a.T @ state.p + b.T @ state.orientations.reshape(-1)
    return n.reshape(-1, 3)
