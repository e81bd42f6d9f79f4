"""Compiled descent loop.

Same arithmetic as :func:`tensegrity_shape.estimator._raw_step` driven by
:class:`tensegrity_shape.energy.EnergyModel`, written as scalar loops so
that numba can compile it.  Without numba the Python function is used as is
(correct but slow); the estimator then prefers the numpy path.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


GD, SGDM, ADAM = 0, 1, 2
STATUS_BUDGET, STATUS_CONVERGED, STATUS_SINGULAR, STATUS_DIVERGED = 0, 1, 2, 3


@njit(cache=True)
def _wrap(x):
    if -math.pi < x <= math.pi:
        return x
    return math.pi - (math.pi - x) % (2.0 * math.pi)


@njit(cache=True)
def _grad(centers, thetas, sp, cp, half_l, ca, cb, k, rest, gp, gt):
    """Fill ``gp`` (m_b, 3) and ``gt`` (m_b,); return (energy, singular)."""
    m_b = centers.shape[0]
    nodes = np.empty((2 * m_b, 3))
    q = np.empty((m_b, 3))
    for i in range(m_b):
        q[i, 0] = sp[i] * math.cos(thetas[i])
        q[i, 1] = sp[i] * math.sin(thetas[i])
        q[i, 2] = cp[i]
        for j in range(3):
            h = half_l[i] * q[i, j]
            nodes[i, j] = centers[i, j] + h
            nodes[i + m_b, j] = centers[i, j] - h
    ng = np.zeros((2 * m_b, 3))
    energy = 0.0
    for c in range(ca.shape[0]):
        a = ca[c]
        b = cb[c]
        d0 = nodes[a, 0] - nodes[b, 0]
        d1 = nodes[a, 1] - nodes[b, 1]
        d2 = nodes[a, 2] - nodes[b, 2]
        sq = d0 * d0 + d1 * d1 + d2 * d2
        if rest[c] > 0.0:
            length = math.sqrt(sq)
            if length == 0.0:
                return 0.0, True
            s = length - rest[c]
            energy += 0.5 * k[c] * s * s
            w = k[c] - k[c] * rest[c] / length
        else:
            energy += 0.5 * k[c] * sq
            w = k[c]
        ng[a, 0] += w * d0
        ng[a, 1] += w * d1
        ng[a, 2] += w * d2
        ng[b, 0] -= w * d0
        ng[b, 1] -= w * d1
        ng[b, 2] -= w * d2
    for i in range(m_b):
        gq0 = 0.0
        gq1 = 0.0
        for j in range(3):
            gp[i, j] = ng[i, j] + ng[i + m_b, j]
        gq0 = half_l[i] * (ng[i, 0] - ng[i + m_b, 0])
        gq1 = half_l[i] * (ng[i, 1] - ng[i + m_b, 1])
        gt[i] = gq1 * q[i, 0] - gq0 * q[i, 1]
    return energy, False


@njit(cache=True)
def _norm(x):
    s = 0.0
    for v in x.flat:
        s += v * v
    return math.sqrt(s)


@njit(cache=True)
def descend(centers, thetas, sp, cp, half_l, ca, cb, k, rest,
            opt, lr_t, lr_p, n_t, n_p, mom, b1, b2, eps, tol_p, tol_t, steps,
            vel_t, vel_p, m_t, v_t, m_p, v_p, counts, trace):
    """Run up to ``steps`` outer steps in place.

    Returns ``(iterations, status)``; ``trace[: iterations + 1]`` holds the
    energy at the start and after every step.  ``counts`` carries Adam step
    counters for the two blocks.
    """
    m_b = centers.shape[0]
    gp = np.empty((m_b, 3))
    gt = np.empty(m_b)
    new_c = centers.copy()
    new_t = thetas.copy()
    e, sing = _grad(centers, thetas, sp, cp, half_l, ca, cb, k, rest, gp, gt)
    if sing:
        trace[0] = np.nan
        return 0, STATUS_SINGULAR
    trace[0] = e
    it = 0
    while True:
        if _norm(gp) < tol_p and _norm(gt) < tol_t:
            return it, STATUS_CONVERGED
        if it >= steps:
            return it, STATUS_BUDGET
        new_c[:, :] = centers
        new_t[:] = thetas
        for jj in range(n_t):
            if jj > 0:
                e, sing = _grad(new_c, new_t, sp, cp, half_l, ca, cb, k, rest, gp, gt)
                if sing:
                    return it, STATUS_SINGULAR
            if opt == GD:
                for i in range(m_b):
                    new_t[i] = _wrap(new_t[i] - lr_t * gt[i])
            elif opt == SGDM:
                for i in range(m_b):
                    vel_t[i] = mom * vel_t[i] + gt[i]
                    new_t[i] = _wrap(new_t[i] - lr_t * vel_t[i])
            else:
                counts[0] += 1
                c1 = 1.0 - b1 ** counts[0]
                c2 = 1.0 - b2 ** counts[0]
                for i in range(m_b):
                    m_t[i] = b1 * m_t[i] + (1.0 - b1) * gt[i]
                    v_t[i] = b2 * v_t[i] + (1.0 - b2) * gt[i] * gt[i]
                    new_t[i] = _wrap(new_t[i] - lr_t * (m_t[i] / c1) / (math.sqrt(v_t[i] / c2) + eps))
        for jj in range(n_p):
            e, sing = _grad(new_c, new_t, sp, cp, half_l, ca, cb, k, rest, gp, gt)
            if sing:
                return it, STATUS_SINGULAR
            if opt == GD:
                for i in range(m_b):
                    for j in range(3):
                        new_c[i, j] -= lr_p * gp[i, j]
            elif opt == SGDM:
                for i in range(m_b):
                    for j in range(3):
                        vel_p[i, j] = mom * vel_p[i, j] + gp[i, j]
                        new_c[i, j] -= lr_p * vel_p[i, j]
            else:
                counts[1] += 1
                c1 = 1.0 - b1 ** counts[1]
                c2 = 1.0 - b2 ** counts[1]
                for i in range(m_b):
                    for j in range(3):
                        m_p[i, j] = b1 * m_p[i, j] + (1.0 - b1) * gp[i, j]
                        v_p[i, j] = b2 * v_p[i, j] + (1.0 - b2) * gp[i, j] * gp[i, j]
                        new_c[i, j] -= lr_p * (m_p[i, j] / c1) / (math.sqrt(v_p[i, j] / c2) + eps)
        e, sing = _grad(new_c, new_t, sp, cp, half_l, ca, cb, k, rest, gp, gt)
        if sing:
            return it, STATUS_SINGULAR
        centers[:, :] = new_c
        thetas[:] = new_t
        it += 1
        trace[it] = e
        if not math.isfinite(e):
            return it, STATUS_DIVERGED
