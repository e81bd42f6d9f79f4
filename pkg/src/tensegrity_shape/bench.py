"""Optimizer comparison on synthetic inclination data.

Each trial draws one noisy, biased inclination reading of a known
equilibrium shape; every optimizer then solves that same reading from the
same random starts.  Reported per optimizer: aligned node MAE, final energy,
time per step, and time to convergence of the winning start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import OPTIMIZERS, DegenerateEstimateError, EstimatorConfig, estimate
from .kinematics import ShapeState, node_positions
from .metrics import node_mae
from .model import StructureSpec
from .simulate import NoiseModel, synth_inclinations

__all__ = ["BENCH_CONFIG", "TrialResult", "OptimizerSummary", "run_bench", "format_report"]

# Reference learning rates for every optimizer, with a budget large enough
# for plain gradient descent to settle the soft yaw mode.
BENCH_CONFIG = EstimatorConfig(steps_N=300_000, restarts=20)


@dataclass(frozen=True)
class TrialResult:
    optimizer: str
    trial: int
    ok: bool
    node_mae: float | None = None  # m
    energy: float | None = None  # J
    iterations: int = 0
    converged: bool = False
    step_time: float | None = None  # s
    time_to_convergence: float | None = None  # s
    nodes: np.ndarray | None = None
    failure: str = ""


@dataclass(frozen=True)
class OptimizerSummary:
    optimizer: str
    trials: int
    failures: int
    converged: int
    mae_mean: float
    mae_std: float
    energy_mean: float
    energy_std: float
    step_time_mean: float
    ttc_mean: float | None
    results: tuple[TrialResult, ...] = field(repr=False, default=())

    def as_dict(self) -> dict:
        return {
            "optimizer": self.optimizer,
            "trials": self.trials,
            "failures": self.failures,
            "converged": self.converged,
            "node_mae_mm_mean": self.mae_mean * 1e3,
            "node_mae_mm_std": self.mae_std * 1e3,
            "energy_mean": self.energy_mean,
            "energy_std": self.energy_std,
            "step_time_ms": self.step_time_mean * 1e3,
            "time_to_convergence_ms": None if self.ttc_mean is None else self.ttc_mean * 1e3,
        }


def _trial_reading(truth: ShapeState, trial: int, seed: int, sigma: float, bias_max: float):
    rng = np.random.default_rng([seed, trial])
    bias = tuple(rng.uniform(-bias_max, bias_max, size=truth.strut_count)) if bias_max > 0 else ()
    return synth_inclinations(truth, NoiseModel(sigma, bias, seed=int(rng.integers(2**31))))


def _summarise(opt: str, results: list[TrialResult]) -> OptimizerSummary:
    good = [r for r in results if r.ok]
    mae = np.array([r.node_mae for r in good])
    energy = np.array([r.energy for r in good])
    steps = [r.step_time for r in good if r.step_time is not None]
    ttc = [r.time_to_convergence for r in good if r.time_to_convergence is not None]
    nan = float("nan")
    return OptimizerSummary(
        optimizer=opt,
        trials=len(results),
        failures=len(results) - len(good),
        converged=sum(r.converged for r in good),
        mae_mean=float(mae.mean()) if len(mae) else nan,
        mae_std=float(mae.std()) if len(mae) else nan,
        energy_mean=float(energy.mean()) if len(energy) else nan,
        energy_std=float(energy.std()) if len(energy) else nan,
        step_time_mean=float(np.mean(steps)) if steps else nan,
        ttc_mean=float(np.mean(ttc)) if ttc else None,
        results=tuple(results),
    )


def run_bench(
    spec: StructureSpec,
    truth: ShapeState,
    optimizers=OPTIMIZERS,
    trials: int = 10,
    sigma: float = 0.01,
    bias_max: float = 0.05,
    config: EstimatorConfig = BENCH_CONFIG,
    seed: int = 0,
) -> dict[str, OptimizerSummary]:
    """Run ``trials`` readings through each optimizer; keyed by optimizer name.

    Only the optimizer differs between runs of one trial: learning rates,
    budget, restarts and the seed for random starts are shared.
    """
    ref = node_positions(truth, spec)
    per_opt: dict[str, list[TrialResult]] = {opt: [] for opt in optimizers}
    for t in range(trials):
        frame = _trial_reading(truth, t, seed, sigma, bias_max)
        for opt in optimizers:
            cfg = config.replace(optimizer=opt, seed=seed * 1_000_003 + t)
            try:
                est = estimate(frame.phis, spec, cfg)
            except DegenerateEstimateError as exc:
                per_opt[opt].append(TrialResult(opt, t, False, failure=str(exc)))
                continue
            per_opt[opt].append(TrialResult(
                optimizer=opt,
                trial=t,
                ok=True,
                node_mae=node_mae(est.nodes, ref, allow_reflection=True),
                energy=est.energy,
                iterations=est.iterations,
                converged=est.converged,
                step_time=est.step_time if est.iterations else None,
                time_to_convergence=est.time_to_convergence,
                nodes=est.nodes,
            ))
    return {opt: _summarise(opt, res) for opt, res in per_opt.items()}


def format_report(summaries: dict[str, OptimizerSummary]) -> str:
    head = f"{'optimizer':<10}{'node MAE [mm]':>20}{'energy [J]':>24}{'step [ms]':>12}{'to conv. [ms]':>15}{'ok/conv/n':>12}"
    lines = [head, "-" * len(head)]
    for s in summaries.values():
        ttc = "n/a" if s.ttc_mean is None else f"{s.ttc_mean * 1e3:.2f}"
        lines.append(
            f"{s.optimizer:<10}"
            f"{s.mae_mean * 1e3:>11.3f} ± {s.mae_std * 1e3:<6.3f}"
            f"{s.energy_mean:>13.5f} ± {s.energy_std:<8.5f}"
            f"{s.step_time_mean * 1e3:>12.5f}"
            f"{ttc:>15}"
            f"{s.trials - s.failures:>5}/{s.converged}/{s.trials}"
        )
    return "\n".join(lines)
