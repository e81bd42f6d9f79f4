"""Cable stiffness identification by seeded black-box search.

The objective is the mean gauge-aligned node MAE between the estimator's
output and reference node clouds, over all observations.  Each candidate is
scored by running :func:`~tensegrity_shape.estimator.estimate` with a fixed
configuration (and therefore fixed random starts), so the objective is a
deterministic function of the stiffness vector.

Cables are grouped; every cable in a group shares one stiffness.  With rigid
struts and no external load the cable energy is homogeneous of degree one in
the stiffnesses, so multiplying every stiffness by the same factor leaves the
minimizing shape unchanged whatever the rest lengths.  A common scale can
therefore never be identified from shapes alone; only ratios between groups
can.  The result reports this rather than pretending otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimator import DegenerateEstimateError, EstimatorConfig, estimate, preset
from .frames import InclinationFrame
from .metrics import node_mae
from .model import InvalidSpecError, StructureSpec, validate_spec

__all__ = [
    "CalibrationProblem",
    "CalibrationResult",
    "CalibrationFailure",
    "fit_stiffness",
    "evaluate_stiffness",
    "tied_groups",
    "per_cable_groups",
]

log = logging.getLogger(__name__)


class CalibrationFailure(RuntimeError):
    pass


def tied_groups(spec: StructureSpec) -> tuple[int, ...]:
    return (0,) * spec.cable_count


def per_cable_groups(spec: StructureSpec) -> tuple[int, ...]:
    return tuple(range(spec.cable_count))


@dataclass(frozen=True)
class CalibrationProblem:
    """Search setup.

    ``groups[k]`` is the group index of cable ``k`` (default: all tied).
    ``bounds`` is one ``(low, high)`` pair in N/m shared by every group, or
    one pair per group.  ``budget`` counts objective evaluations, including
    those spent by the local refinement.
    """

    spec: StructureSpec
    observations: Sequence[tuple[InclinationFrame, np.ndarray]]
    bounds: tuple = (10.0, 200.0)
    groups: tuple[int, ...] | None = None
    budget: int = 32
    seed: int = 0
    config: EstimatorConfig = field(default_factory=lambda: preset("adam"))
    refine: bool = True
    allow_reflection: bool = True

    def __post_init__(self):
        problems = validate_spec(self.spec)
        if problems:
            raise InvalidSpecError(problems)
        if not self.observations:
            raise ValueError("calibration needs at least one observation")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        groups = tied_groups(self.spec) if self.groups is None else tuple(int(g) for g in self.groups)
        if len(groups) != self.spec.cable_count:
            raise ValueError(f"groups has {len(groups)} entries for {self.spec.cable_count} cables")
        if sorted(set(groups)) != list(range(max(groups) + 1)):
            raise ValueError("group indices must be 0..G-1 with every group used")
        object.__setattr__(self, "groups", groups)
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape == (2,):
            bounds = np.tile(bounds, (self.group_count, 1))
        if bounds.shape != (self.group_count, 2):
            raise ValueError(f"bounds must be one pair or {self.group_count} pairs")
        if np.any(bounds <= 0) or np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError("bounds must be positive and ordered (low <= high)")
        object.__setattr__(self, "bounds", tuple(map(tuple, bounds)))
        node_count = self.spec.node_count
        for i, (frame, ref) in enumerate(self.observations):
            if np.asarray(ref).size != 3 * node_count:
                raise ValueError(f"observation {i}: reference needs {node_count} nodes")
            frame.check(self.spec.strut_count)

    @property
    def group_count(self) -> int:
        return max(self.groups) + 1

    def expand(self, group_values) -> np.ndarray:
        """Per-cable stiffness vector from per-group values."""
        return np.asarray(group_values, dtype=float)[list(self.groups)]


@dataclass(frozen=True)
class CalibrationResult:
    stiffness: np.ndarray  # per cable, N/m
    group_values: np.ndarray  # per group, N/m
    objective: float  # mean aligned node MAE, m
    evaluations: int
    history: tuple[tuple[tuple[float, ...], float], ...]
    unidentifiable: tuple[str, ...]

    def fitted_spec(self, spec: StructureSpec) -> StructureSpec:
        return spec.with_stiffness(self.stiffness)


def evaluate_stiffness(problem: CalibrationProblem, group_values) -> float:
    """Mean aligned node MAE for one candidate; ``inf`` if any solve is degenerate."""
    spec = problem.spec.with_stiffness(problem.expand(group_values))
    total = 0.0
    for frame, ref in problem.observations:
        try:
            est = estimate(frame.phis, spec, problem.config)
        except DegenerateEstimateError:
            return math.inf
        total += node_mae(est.nodes, ref, allow_reflection=problem.allow_reflection)
    return total / len(problem.observations)


def _unidentifiable(problem: CalibrationProblem) -> tuple[str, ...]:
    if problem.group_count == 1:
        return ("scale: a common stiffness factor does not change the equilibrium shape",)
    return ("common-scale: only stiffness ratios between groups are identifiable",)


def _sample(rng: np.random.Generator, bounds: np.ndarray) -> np.ndarray:
    # log-uniform: stiffness ranges usually span an order of magnitude or more
    lo, hi = np.log(bounds[:, 0]), np.log(bounds[:, 1])
    return np.exp(rng.uniform(lo, hi))


def fit_stiffness(problem: CalibrationProblem) -> CalibrationResult:
    """Random search in log-stiffness, then an optional coordinate pattern search.

    With refinement on, about a quarter of the budget (at least one
    evaluation when the budget exceeds one) is kept for shrinking-step
    coordinate moves around the incumbent.  Ties keep the earliest candidate.
    """
    bounds = np.asarray(problem.bounds)
    rng = np.random.default_rng(problem.seed)
    n_refine = problem.budget // 4 if (problem.refine and problem.budget > 1) else 0
    if problem.refine and problem.budget > 1 and n_refine == 0:
        n_refine = 1
    n_random = problem.budget - n_refine

    history: list[tuple[tuple[float, ...], float]] = []
    best_x, best_f = None, math.inf

    def consider(x):
        nonlocal best_x, best_f
        x = np.clip(x, bounds[:, 0], bounds[:, 1])
        f = evaluate_stiffness(problem, x)
        history.append((tuple(float(v) for v in x), f))
        if best_x is None or f < best_f:
            best_x, best_f = x, f
        return f

    for _ in range(n_random):
        consider(_sample(rng, bounds))

    log_step = 0.25 * (np.log(bounds[:, 1]) - np.log(bounds[:, 0]))
    group = 0
    direction = 1.0
    while len(history) < problem.budget and math.isfinite(best_f) and np.any(log_step > 1e-6):
        if log_step[group] > 1e-6:
            trial = best_x.copy()
            trial[group] *= math.exp(direction * log_step[group])
            before = best_f
            consider(trial)
            improved = best_f < before
        else:
            improved = False
        if not improved:
            if direction > 0:
                direction = -1.0
                continue
            log_step[group] *= 0.5
        direction = 1.0
        group = (group + 1) % problem.group_count

    if not math.isfinite(best_f):
        raise CalibrationFailure("every candidate produced a degenerate estimate")
    reasons = _unidentifiable(problem)
    log.info("calibration: objective %.6g after %d evaluations", best_f, len(history))
    return CalibrationResult(
        stiffness=problem.expand(best_x),
        group_values=np.asarray(best_x, dtype=float),
        objective=best_f,
        evaluations=len(history),
        history=tuple(history),
        unidentifiable=reasons,
    )
