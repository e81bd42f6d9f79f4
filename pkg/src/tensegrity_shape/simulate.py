"""Synthetic ground truth: equilibrium shapes, IMU-like inclinations, trajectories.

The equilibrium oracle deliberately shares no code with :mod:`.energy`.  It
evaluates the cable energy with its own scalar loop, differentiates it by
central finite differences, and lets every strut rotate freely (inclination
included).  Agreement between its stationary points and the analytic
gradients is therefore a genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .frames import InclinationFrame
from .kinematics import ShapeState, inclination_of, wrap_angle, yaw_of
from .model import StructureSpec, validate_spec, InvalidSpecError

__all__ = [
    "OracleFailure",
    "NoiseModel",
    "TrajectoryFrame",
    "Trajectory",
    "SCENARIOS",
    "prism_like_init",
    "natural_cable_lengths",
    "taut_spec",
    "oracle_energy",
    "fd_gradient",
    "equilibrium_oracle",
    "rotate_state",
    "interpolate_states",
    "synth_inclinations",
    "axis_inclination",
    "make_trajectory",
]

FD_STEP = 1e-6
ORACLE_GTOL = 1e-6


class OracleFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    sigma_phi: float = 0.0
    bias_phi: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.sigma_phi < 0:
            raise ValueError("sigma_phi must be >= 0")
        object.__setattr__(self, "bias_phi", tuple(float(b) for b in self.bias_phi))

    def bias(self, m_b: int) -> np.ndarray:
        if not self.bias_phi:
            return np.zeros(m_b)
        if len(self.bias_phi) != m_b:
            raise ValueError(f"bias has {len(self.bias_phi)} entries, structure has {m_b} struts")
        return np.asarray(self.bias_phi)


@dataclass(frozen=True)
class TrajectoryFrame:
    timestamp: float
    truth: ShapeState
    frame: InclinationFrame


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[TrajectoryFrame, ...]
    scenario: str = ""
    notes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


# ---------------------------------------------------------------------------
# independent energy + finite differences

def _unpack(x: np.ndarray, m_b: int):
    return x[: 3 * m_b].reshape(m_b, 3), x[3 * m_b : 4 * m_b], x[4 * m_b :]


def oracle_energy(x: np.ndarray, spec: StructureSpec) -> float:
    """Cable energy for packed ``[centers, phis, thetas]`` with free inclinations."""
    m_b = spec.strut_count
    centers, phis, thetas = _unpack(np.asarray(x, dtype=float), m_b)
    nodes = [None] * (2 * m_b)
    for i in range(m_b):
        sp, cp = math.sin(phis[i]), math.cos(phis[i])
        axis = (sp * math.cos(thetas[i]), sp * math.sin(thetas[i]), cp)
        h = spec.strut_lengths[i] / 2.0
        c = centers[i]
        nodes[i] = (c[0] + h * axis[0], c[1] + h * axis[1], c[2] + h * axis[2])
        nodes[i + m_b] = (c[0] - h * axis[0], c[1] - h * axis[1], c[2] - h * axis[2])
    total = 0.0
    for cable in spec.cables:
        na, nb = nodes[cable.node_a], nodes[cable.node_b]
        length = math.dist(na, nb)
        total += 0.5 * cable.stiffness * (length - cable.rest_length) ** 2
    return total


def fd_gradient(func, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + step
        fp = func(x)
        x[j] = orig - step
        fm = func(x)
        x[j] = orig
        g[j] = (fp - fm) / (2.0 * step)
    return g


# ---------------------------------------------------------------------------
# hand-built initial shapes

def prism_like_init(spec: StructureSpec, radius_ratio: float = 0.42, twist: float | None = None) -> ShapeState:
    """Ring arrangement of struts: tops on one circle, bottoms on a twisted circle below.

    Strut ``i``'s ``+q`` end sits at azimuth ``2 pi i / m_b`` and its ``-q``
    end at that azimuth plus ``twist`` (default ``-(pi - pi/m_b)``), which is
    the sense in which cable ``(i, i + 1 + m_b)`` of the bundled prism is
    short.
    """
    m_b = spec.strut_count
    if twist is None:
        twist = -(math.pi - math.pi / m_b) if m_b > 1 else 0.0
    centers, q = [], []
    for i in range(m_b):
        length = spec.strut_lengths[i]
        r = radius_ratio * length
        a_top = 2 * math.pi * i / m_b
        a_bot = a_top + twist
        chord = np.array([r * (math.cos(a_top) - math.cos(a_bot)), r * (math.sin(a_top) - math.sin(a_bot))])
        horiz = float(np.linalg.norm(chord))
        if horiz >= length:
            raise ValueError("radius_ratio too large for the strut length")
        h = math.sqrt(length**2 - horiz**2)
        top = np.array([r * math.cos(a_top), r * math.sin(a_top), h / 2])
        bot = np.array([r * math.cos(a_bot), r * math.sin(a_bot), -h / 2])
        centers.append((top + bot) / 2)
        q.append((top - bot) / length)
    return ShapeState.from_orientations(np.array(centers), np.array(q))


def _nodes_of(state: ShapeState, spec: StructureSpec) -> np.ndarray:
    # local copy so that the oracle path never touches kinematics.node_positions
    out = np.empty((2 * state.strut_count, 3))
    for i in range(state.strut_count):
        sp = math.sin(state.phis[i])
        axis = np.array([sp * math.cos(state.thetas[i]), sp * math.sin(state.thetas[i]), math.cos(state.phis[i])])
        h = spec.strut_lengths[i] / 2.0
        out[i] = state.centers[i] + h * axis
        out[i + state.strut_count] = state.centers[i] - h * axis
    return out


def natural_cable_lengths(spec: StructureSpec, state: ShapeState | None = None) -> np.ndarray:
    """Cable lengths of ``state`` (default: the hand-built ring)."""
    state = prism_like_init(spec) if state is None else state
    nodes = _nodes_of(state, spec)
    return np.array([np.linalg.norm(nodes[c.node_a] - nodes[c.node_b]) for c in spec.cables])


def taut_spec(spec: StructureSpec, ratio: float = 0.9) -> StructureSpec:
    """Copy of ``spec`` whose rest lengths are ``ratio`` times the ring's cable lengths."""
    return spec.with_rest_lengths(ratio * natural_cable_lengths(spec))


# ---------------------------------------------------------------------------
# equilibrium oracle

def _pack(state: ShapeState) -> np.ndarray:
    return np.concatenate([state.centers.reshape(-1), state.phis, state.thetas])


def _normalise(centers, phis, thetas) -> ShapeState:
    centers = np.asarray(centers, dtype=float)
    phis = np.asarray(phis, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    sp = np.sin(phis)
    q = np.stack([sp * np.cos(thetas), sp * np.sin(thetas), np.cos(phis)], axis=1)
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return ShapeState(centers, wrap_angle(yaw_of(q)), inclination_of(q))


def equilibrium_oracle(
    spec: StructureSpec,
    anchor_phis: Sequence[float] | None = None,
    init: ShapeState | None = None,
    *,
    gtol: float = ORACLE_GTOL,
    maxiter: int = 20000,
) -> ShapeState:
    """Stationary shape of ``spec`` found without the analytic gradients.

    All strut angles are free unless ``anchor_phis`` is given, in which
    case inclinations are held at those values and only centers and yaws
    move.  The minimiser is BFGS driven by central finite differences of
    :func:`oracle_energy`; the result is accepted only if the finite
    difference gradient norm is below ``gtol``.
    """
    problems = validate_spec(spec)
    if problems:
        raise InvalidSpecError(problems)
    m_b = spec.strut_count
    start = prism_like_init(spec) if init is None else init
    if anchor_phis is not None:
        anchor = np.asarray(anchor_phis, dtype=float)
        if anchor.shape != (m_b,):
            raise ValueError(f"anchor_phis must have {m_b} entries")
        start = start.replace(phis=anchor)
    x0 = _pack(start)
    free = np.ones_like(x0, dtype=bool)
    if anchor_phis is not None:
        free[3 * m_b : 4 * m_b] = False

    def f(y):
        x = x0.copy()
        x[free] = y
        return oracle_energy(x, spec)

    def g(y):
        return fd_gradient(f, y)

    y = x0[free]
    for _ in range(5):
        res = minimize(f, y, jac=g, method="BFGS", options={"gtol": gtol * 1e-2, "maxiter": maxiter})
        y = res.x
        if np.linalg.norm(g(y)) < gtol:
            break
    gnorm = float(np.linalg.norm(g(y)))
    if not gnorm < gtol:
        raise OracleFailure(f"oracle stopped with finite-difference gradient norm {gnorm:.3e} >= {gtol:.1e}")
    x = x0.copy()
    x[free] = y
    centers, phis, thetas = _unpack(x, m_b)
    return _normalise(centers, phis, thetas)


# ---------------------------------------------------------------------------
# rigid motions and interpolation

def _rotation(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise ValueError(f"unknown axis {axis!r}")


def rotate_state(state: ShapeState, axis: str, angle: float, about=None) -> ShapeState:
    """Rigidly rotate a shape about a coordinate axis through ``about`` (default: centroid)."""
    rot = _rotation(axis, angle)
    pivot = state.centers.mean(axis=0) if about is None else np.asarray(about, dtype=float)
    centers = (state.centers - pivot) @ rot.T + pivot
    sp = np.sin(state.phis)
    q = np.stack([sp * np.cos(state.thetas), sp * np.sin(state.thetas), np.cos(state.phis)], axis=1)
    return ShapeState.from_orientations(centers, q @ rot.T)


def axis_inclination(state: ShapeState) -> float:
    """Inclination of the normalised mean strut axis (the structure's overall tilt)."""
    mean_q = state.orientations.mean(axis=0)
    return inclination_of(mean_q / np.linalg.norm(mean_q))


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3 - 2 * s)


def interpolate_states(a: ShapeState, b: ShapeState, s: float) -> ShapeState:
    """Linear blend in centers, inclinations and (shortest-arc) yaws."""
    dtheta = wrap_angle(b.thetas - a.thetas)
    return ShapeState(
        a.centers + s * (b.centers - a.centers),
        wrap_angle(a.thetas + s * dtheta),
        np.clip(a.phis + s * (b.phis - a.phis), 0.0, np.pi),
    )


# ---------------------------------------------------------------------------
# IMU model

def synth_inclinations(state: ShapeState, noise: NoiseModel, timestamp: float = 0.0, rng=None) -> InclinationFrame:
    """Measured inclinations: truth + per-strut bias + white noise, clamped to [0, pi].

    Pass ``rng`` to draw successive frames from one stream; otherwise a
    generator seeded from ``noise.seed`` is used.
    """
    m_b = state.strut_count
    rng = np.random.default_rng(noise.seed) if rng is None else rng
    phis = state.phis + noise.bias(m_b)
    if noise.sigma_phi > 0:
        phis = phis + rng.normal(0.0, noise.sigma_phi, size=m_b)
    return InclinationFrame(timestamp, tuple(np.clip(phis, 0.0, np.pi)))


# ---------------------------------------------------------------------------
# deformation scenarios

SCENARIOS = ("stationary", "lateral", "angular", "tilted", "recovery")

# Perturbation sizes below are arbitrary choices; the reference experiment
# induced its deformations by hand with no stated magnitude.
LATERAL_SHORTEN = 0.85  # rest-length factor on two adjacent interconnecting cables
ANGULAR_SHORTEN = 0.85  # rest-length factor on one upper-loop cable and its neighbours' verticals
TILT_ANGLE = math.radians(30.0)


def _deformed_spec(spec: StructureSpec, scenario: str) -> StructureSpec:
    rest = spec.rest_lengths.copy()
    m_b = spec.strut_count
    if not spec.has_rest_lengths:
        raise ValueError("deformation scenarios need a spec with positive rest lengths")
    tops = set(range(m_b))
    verticals = [k for k, c in enumerate(spec.cables) if (c.node_a in tops) != (c.node_b in tops)]
    top_loop = [k for k, c in enumerate(spec.cables) if c.node_a in tops and c.node_b in tops]
    if scenario in ("lateral", "recovery"):
        idx = verticals[:2] if len(verticals) >= 2 else list(range(min(2, len(rest))))
        rest[idx] *= LATERAL_SHORTEN
    elif scenario == "angular":
        idx = top_loop[:1] + verticals[:1]
        rest[idx] *= ANGULAR_SHORTEN
    return spec.with_rest_lengths(rest)


def _endpoints(spec: StructureSpec, scenario: str, base: ShapeState | None):
    base = equilibrium_oracle(spec) if base is None else base
    if scenario == "stationary":
        return base, base
    if scenario == "tilted":
        return rotate_state(base, "x", TILT_ANGLE), base
    deformed = equilibrium_oracle(_deformed_spec(spec, scenario), init=base)
    # keep the deformed shape in the base frame: same centroid
    shift = base.centers.mean(axis=0) - deformed.centers.mean(axis=0)
    deformed = deformed.replace(centers=deformed.centers + shift)
    if scenario == "recovery":
        return deformed, base
    return base, deformed


def make_trajectory(
    spec: StructureSpec,
    scenario: str,
    duration: float,
    rate: float,
    noise: NoiseModel = NoiseModel(),
    *,
    base: ShapeState | None = None,
) -> Trajectory:
    """Sampled ground truth blending between two equilibria.

    The first third holds the start shape, the middle third moves with
    smoothstep timing, and the last third holds the end shape.  Only the
    two end shapes are equilibria.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if duration <= 0 or rate <= 0:
        raise ValueError("duration and rate must be positive")
    start, end = _endpoints(spec, scenario, base)
    count = int(round(duration * rate))
    rng = np.random.default_rng(noise.seed)
    frames = []
    for j in range(count):
        t = j / rate
        s = float(_smoothstep((t / duration - 1 / 3) * 3))
        truth = start if s == 0.0 else end if s == 1.0 else interpolate_states(start, end, s)
        frames.append(TrajectoryFrame(t, truth, synth_inclinations(truth, noise, t, rng=rng)))
    return Trajectory(tuple(frames), scenario=scenario, notes={"start": start, "end": end})
