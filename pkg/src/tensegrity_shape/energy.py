"""Cable elastic energy and its analytic gradients.

Each cable is a two-sided linear spring, ``e_k = K_k (|d_k| - b_k)^2 / 2``,
where ``d_k`` is the difference of its two node positions.  With all rest
lengths zero this is the quadratic form ``m_s^T K m_s / 2`` and the
per-cable force is simply ``K_k d_k``.

Gradients are accumulated through the incidence matrix: node forces are
``Cs^T f``; a strut center collects the force on both its nodes, and the
strut axis collects ``L/2`` times their difference, which the yaw gradient
then projects onto ``dq/dtheta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import ShapeState, orientation_from_angles, orientation_jacobian_theta
from .model import ConnectivityMatrices, StructureSpec, build_connectivity

__all__ = [
    "EnergyReport",
    "SingularConfigurationError",
    "EnergyModel",
    "cable_vectors",
    "total_energy",
    "grad_p",
    "grad_theta",
]


class SingularConfigurationError(ArithmeticError):
    """A cable with positive rest length has zero current length."""


@dataclass(frozen=True)
class EnergyReport:
    total: float
    per_cable: np.ndarray
    cable_lengths: np.ndarray


def cable_vectors(nodes, conn: ConnectivityMatrices) -> np.ndarray:
    """``(m_s, 3)`` array; row ``k`` is ``n[node_a] - n[node_b]``."""
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 3)
    if nodes.shape[0] != conn.Cs.shape[1]:
        raise ValueError(f"expected {conn.Cs.shape[1]} nodes, got {nodes.shape[0]}")
    return nodes[conn.cable_a] - nodes[conn.cable_b]


class EnergyModel:
    """Precomputed arrays for repeated energy/gradient evaluation on one structure."""

    def __init__(self, spec: StructureSpec, conn: ConnectivityMatrices | None = None):
        self.spec = spec
        self.conn = build_connectivity(spec) if conn is None else conn
        self.m_b = spec.strut_count
        self.a = self.conn.cable_a
        self.b = self.conn.cable_b
        self.cs_t = np.ascontiguousarray(self.conn.Cs.T)
        self.k = spec.stiffnesses
        self.rest = spec.rest_lengths
        self.taut = self.rest > 0
        self.any_rest = bool(self.taut.any())
        self.half_l = 0.5 * spec.lengths[:, None]
        self.k_rest = self.k * self.rest

    def nodes(self, centers, q) -> np.ndarray:
        half = self.half_l * q
        return np.concatenate([centers + half, centers - half])

    def cable_terms(self, nodes):
        """Cable vectors, lengths, per-cable energies and force vectors."""
        d = nodes[self.a] - nodes[self.b]
        sq = (d * d).sum(axis=1)
        length = np.sqrt(sq)
        if not self.any_rest:
            return d, length, 0.5 * self.k * sq, self.k[:, None] * d
        zero = length == 0.0
        if zero.any():
            if (zero & self.taut).any():
                bad = np.flatnonzero(self.taut & zero).tolist()
                raise SingularConfigurationError(
                    f"cables {bad} have zero length but positive rest length"
                )
            length_safe = length + zero
        else:
            length_safe = length
        stretch = length - self.rest
        per = 0.5 * self.k * stretch * stretch
        force = (self.k - self.k_rest / length_safe)[:, None] * d
        return d, length, per, force

    def node_gradient(self, centers, q) -> np.ndarray:
        """``de/dn`` as an ``(n, 3)`` array."""
        _, _, _, force = self.cable_terms(self.nodes(centers, q))
        return self.cs_t @ force

    def energy(self, centers, q) -> float:
        return float(np.sum(self.cable_terms(self.nodes(centers, q))[2]))

    def split_gradient(self, node_grad):
        """Strut-center gradient and strut-axis gradient from node gradients."""
        top, bottom = node_grad[: self.m_b], node_grad[self.m_b :]
        return top + bottom, self.half_l * (top - bottom)

    def grad_p(self, centers, phis, thetas) -> np.ndarray:
        g = self.node_gradient(centers, orientation_from_angles(phis, thetas))
        return self.split_gradient(g)[0]

    def grad_theta(self, centers, phis, thetas) -> np.ndarray:
        """Chain rule through the explicit orientation Jacobian."""
        g = self.node_gradient(centers, orientation_from_angles(phis, thetas))
        gq = self.split_gradient(g)[1]
        return np.einsum("ij,ij->i", gq, orientation_jacobian_theta(phis, thetas))

    def gradients(self, centers, phis, thetas, trig=None):
        """Energy, center gradient ``(m_b, 3)`` and yaw gradient ``(m_b,)``.

        ``trig`` may carry precomputed ``(sin(phis), cos(phis))``; the
        estimator passes it because inclinations stay fixed during a solve.
        """
        sp, cp = (np.sin(phis), np.cos(phis)) if trig is None else trig
        ct, st = np.cos(thetas), np.sin(thetas)
        q = np.empty((self.m_b, 3))
        q[:, 0] = sp * ct
        q[:, 1] = sp * st
        q[:, 2] = cp
        _, _, per, force = self.cable_terms(self.nodes(centers, q))
        gp, gq = self.split_gradient(self.cs_t @ force)
        # dq/dtheta = (-q_y, q_x, 0)
        gt = gq[:, 1] * q[:, 0] - gq[:, 0] * q[:, 1]
        return float(per.sum()), gp, gt

    def report(self, state: ShapeState) -> EnergyReport:
        _, length, per, _ = self.cable_terms(self.nodes(state.centers, state.orientations))
        return EnergyReport(total=float(np.sum(per)), per_cable=per, cable_lengths=length)


def _model(spec, conn) -> EnergyModel:
    if conn is not None and conn.Cs.shape[1] != spec.node_count:
        raise ValueError(f"connectivity has {conn.Cs.shape[1]} nodes, spec has {spec.node_count}")
    return EnergyModel(spec, conn)


def _check(state: ShapeState, spec: StructureSpec):
    if state.strut_count != spec.strut_count:
        raise ValueError(f"state has {state.strut_count} struts, spec has {spec.strut_count}")


def total_energy(state: ShapeState, spec: StructureSpec, conn=None) -> EnergyReport:
    _check(state, spec)
    return _model(spec, conn).report(state)


def grad_p(state: ShapeState, spec: StructureSpec, conn=None) -> np.ndarray:
    """Gradient of the total energy with respect to strut centers, shape ``(m_b, 3)``."""
    _check(state, spec)
    return _model(spec, conn).grad_p(state.centers, state.phis, state.thetas)


def grad_theta(state: ShapeState, spec: StructureSpec, conn=None) -> np.ndarray:
    _check(state, spec)
    return _model(spec, conn).grad_theta(state.centers, state.phis, state.thetas)
