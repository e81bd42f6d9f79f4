"""Command-line entry point: ``tensegrity-shape <command> ...``.

Exit codes: 0 success, 2 usage error, 3 invalid structure, 4 input could
not be read or the endpoint could not be bound, 5 estimation degenerate,
1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import numpy as np

from .bench import BENCH_CONFIG, format_report, run_bench
from .calibrate import CalibrationFailure, CalibrationProblem, fit_stiffness, per_cable_groups
from .estimator import OPTIMIZERS, PRESETS, DegenerateEstimateError, Tracker, estimate, preset, track
from .frames import (
    FrameFormatError,
    parse_frame,
    parse_truth_record,
    render_estimate_record,
    render_frame,
    render_truth_record,
)
from .ingest import run_live, serve_ingest
from .kinematics import ShapeState, node_positions
from .metrics import angle_errors, node_mae
from .model import InvalidSpecError, StructureSpec, validate_spec
from .simulate import SCENARIOS, NoiseModel, OracleFailure, equilibrium_oracle, make_trajectory, taut_spec
from .specfile import SpecFileError, load_spec, save_spec

log = logging.getLogger("tensegrity_shape")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2  # also what argparse uses
EXIT_SPEC = 3
EXIT_INGEST = 4
EXIT_DEGENERATE = 5


class IngestError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _load_valid_spec(source: str, taut: float | None = None) -> StructureSpec:
    spec = load_spec(source)
    problems = validate_spec(spec)
    if problems:
        raise InvalidSpecError(problems)
    if taut is not None:
        spec = taut_spec(spec, taut)
    return spec


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


@contextmanager
def _sink(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w") as fh:
            yield fh


def _read_lines(path: str) -> list[str]:
    try:
        with open(path) as fh:
            return fh.readlines()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror}") from None


def _frame_items(lines, arity: int) -> Iterator:
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield parse_frame(line, arity, number)
        except FrameFormatError as exc:
            yield exc


def _read_truth(path: str, strut_count: int) -> dict[float, ShapeState]:
    truth = {}
    for number, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            t, state = parse_truth_record(line, strut_count, number)
        except FrameFormatError as exc:
            raise IngestError(f"{path}: {exc}") from None
        truth[t] = state
    return truth


def _config_from_args(args, default_preset: str):
    overrides = {}
    for name, field_name in [("steps", "steps_N"), ("alpha", "lr_theta_alpha"), ("beta", "lr_p_beta"),
                             ("optimizer", "optimizer"), ("restarts", "restarts"), ("seed", "seed"),
                             ("warm_steps", "warm_steps")]:
        value = getattr(args, name, None)
        if value is not None:
            overrides[field_name] = value
    return preset(args.preset or default_preset, **overrides)


def _add_solver_args(p: argparse.ArgumentParser, default_preset: str):
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help=f"starting configuration (default: {default_preset})")
    p.add_argument("--steps", type=int, help="outer step budget per solve")
    p.add_argument("--alpha", type=float, help="yaw learning rate")
    p.add_argument("--beta", type=float, help="center learning rate")
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)


def _state_summary(est_state: ShapeState, est_nodes, truth: ShapeState, spec: StructureSpec) -> dict:
    ref = node_positions(truth, spec)
    return {
        "node_mae_mm": node_mae(est_nodes, ref, allow_reflection=True) * 1e3,
        "node_mae_raw_mm": node_mae(est_nodes, ref, aligned=False) * 1e3,
        "center_mae_mm": node_mae(est_state.centers, truth.centers, allow_reflection=True) * 1e3,
    }


# ---------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    problems = validate_spec(spec)
    for problem in problems:
        print(problem)
    if problems:
        return EXIT_SPEC
    print(f"ok: {spec.strut_count} struts, {spec.cable_count} cables")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load_valid_spec(args.spec, args.taut)
    if not spec.has_rest_lengths:
        raise InvalidSpecError(["simulation needs positive rest lengths (use --taut 0.9 for a slack-free spec)"])
    noise = NoiseModel(args.sigma, tuple(args.bias or ()), args.seed)
    traj = make_trajectory(spec, args.scenario, args.duration, args.rate, noise)
    with _sink(args.out) as out:
        for fr in traj:
            out.write(render_frame(fr.frame))
    if args.truth:
        with open(args.truth, "w") as fh:
            for fr in traj:
                fh.write(render_truth_record(fr.timestamp, fr.truth))
    log.info("wrote %d frames (%s)", len(traj), args.scenario)
    return EXIT_OK


def cmd_estimate(args) -> int:
    spec = _load_valid_spec(args.spec)
    cfg = _config_from_args(args, "paper")
    phis = np.asarray(args.phi)
    if phis.size != spec.strut_count or np.any(phis < 0) or np.any(phis > math.pi):
        print(f"error: need {spec.strut_count} inclinations in [0, pi]", file=sys.stderr)
        return EXIT_USAGE
    est = estimate(phis, spec, cfg)
    with _sink(args.out) as out:
        out.write(render_estimate_record(0.0, est.converged, est.energy, est.nodes))
    log.info("energy %.6g J after %d steps, converged=%s, |g_p|=%.3g, |g_theta|=%.3g",
             est.energy, est.iterations, est.converged, est.grad_norm_p, est.grad_norm_theta)
    if not est.converged:
        log.warning("not converged after %d steps; raise --steps or try --preset adam", est.iterations)
    if args.summary:
        Path(args.summary).write_text(json.dumps({
            "energy": est.energy,
            "iterations": est.iterations,
            "converged": est.converged,
            "grad_norm_p": est.grad_norm_p,
            "grad_norm_theta": est.grad_norm_theta,
            "wall_time": est.wall_time,
            "restart_index": est.restart_index,
        }, indent=2))
    return EXIT_OK


def cmd_track(args) -> int:
    spec = _load_valid_spec(args.spec)
    cfg = _config_from_args(args, "fast")
    tracker = Tracker(spec, cfg)
    truth = _read_truth(args.truth, spec.strut_count) if args.truth else None
    per_frame = []
    last = None

    with _sink(args.out) as out:
        def emit(est):
            nonlocal last
            out.write(render_estimate_record(est.timestamp, est.converged, est.energy, est.nodes))
            last = est
            if truth is not None and est.timestamp in truth:
                row = {"t": est.timestamp, **_state_summary(est.state, est.nodes, truth[est.timestamp], spec)}
                per_frame.append(row)

        if args.listen:
            try:
                server = serve_ingest(args.listen, spec.strut_count, args.accept_timeout)
            except (OSError, ValueError) as exc:
                raise IngestError(f"cannot listen on {args.listen}: {exc}") from None
            with server:
                log.info("listening on %s:%d", *server.address)
                run_live(server.frames(), tracker, emit)
        else:
            for est in track(_frame_items(_read_lines(args.input), spec.strut_count), spec, cfg, tracker):
                emit(est)

    log.info("processed %d frames, rejected %d, skipped %d", tracker.processed, tracker.rejected, tracker.skipped)
    for err in tracker.errors:
        log.warning("rejected: %s", err)
    summary = {
        "frames": tracker.processed,
        "rejected": tracker.rejected,
        "skipped": tracker.skipped,
        "energy": None if last is None else last.energy,
        "iterations": None if last is None else last.iterations,
        "wall_time": None if last is None else last.wall_time,
    }
    if truth is not None and per_frame:
        mae = np.array([r["node_mae_mm"] for r in per_frame])
        summary.update({
            "node_mae_mm": float(mae.mean()),
            "node_mae_mm_max": float(mae.max()),
            "center_mae_mm": float(np.mean([r["center_mae_mm"] for r in per_frame])),
            "angles": [rec.as_dict() for rec in angle_errors(last.state, truth[last.timestamp], allow_reflection=True)]
            if last is not None and last.timestamp in truth else [],
            "per_frame": per_frame,
        })
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2))
    elif truth is not None:
        brief = {k: v for k, v in summary.items() if k not in ("per_frame", "angles")}
        print(json.dumps(brief), file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = _load_valid_spec(args.spec, args.taut)
    if not spec.has_rest_lengths:
        raise InvalidSpecError(["benchmark needs positive rest lengths (use --taut 0.9)"])
    truth = equilibrium_oracle(spec)
    optimizers = OPTIMIZERS if args.optimizer == "all" else tuple(args.optimizer.split(","))
    cfg = BENCH_CONFIG.replace(
        steps_N=args.steps or BENCH_CONFIG.steps_N,
        restarts=args.restarts or BENCH_CONFIG.restarts,
        **({"lr_theta_alpha": args.alpha} if args.alpha else {}),
        **({"lr_p_beta": args.beta} if args.beta else {}),
    )
    summaries = run_bench(spec, truth, optimizers, args.trials, args.sigma, args.bias_max, cfg, args.seed)
    print(format_report(summaries))
    if args.json:
        Path(args.json).write_text(json.dumps({k: s.as_dict() for k, s in summaries.items()}, indent=2))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    spec = _load_valid_spec(args.spec)
    truth = _read_truth(args.truth, spec.strut_count)
    frames = [item for item in _frame_items(_read_lines(args.input), spec.strut_count)
              if not isinstance(item, Exception) and item.timestamp in truth]
    if not frames:
        raise IngestError("no frame has a matching ground-truth record")
    pick = np.unique(np.linspace(0, len(frames) - 1, min(args.max_observations, len(frames))).round().astype(int))
    observations = [(frames[i], node_positions(truth[frames[i].timestamp], spec)) for i in pick]
    cfg = _config_from_args(args, "adam")
    problem = CalibrationProblem(
        spec=spec,
        observations=observations,
        bounds=tuple(args.bounds),
        groups=per_cable_groups(spec) if args.per_cable else None,
        budget=args.budget,
        seed=args.seed if args.seed is not None else 0,
        config=cfg,
    )
    result = fit_stiffness(problem)
    save_spec(result.fitted_spec(spec), args.out)
    print(json.dumps({
        "objective_node_mae_mm": result.objective * 1e3,
        "evaluations": result.evaluations,
        "group_values": result.group_values.tolist(),
        "unidentifiable": list(result.unidentifiable),
    }, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensegrity-shape", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a structure file")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="write a synthetic inclination stream and its ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--taut", type=float, help="set rest lengths to this fraction of the ring-shape cable lengths")
    p.add_argument("--scenario", choices=SCENARIOS, default="stationary")
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--sigma", type=float, default=0.0, help="inclination noise std-dev, rad")
    p.add_argument("--bias", type=_floats, help="per-strut inclination bias, rad")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="solve a single inclination reading")
    p.add_argument("--spec", required=True)
    p.add_argument("--phi", type=_floats, required=True, help='inclinations, e.g. "0.95 0.96 0.95 0.96"')
    _add_solver_args(p, "paper")
    p.add_argument("--out")
    p.add_argument("--summary", help="write a JSON summary here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("track", help="warm-started estimation over a stream")
    p.add_argument("--spec", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="stream file")
    src.add_argument("--listen", help="host:port to accept one TCP client on")
    p.add_argument("--accept-timeout", type=float, help="give up if no client connects within this many seconds")
    p.add_argument("--truth", help="ground-truth sidecar for metrics")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="write a JSON summary here")
    p.add_argument("--warm-steps", type=int)
    _add_solver_args(p, "fast")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("bench", help="compare optimizers on synthetic readings")
    p.add_argument("--spec", required=True)
    p.add_argument("--taut", type=float)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--optimizer", default="all", help="all, or a comma list of gd,sgdm,adam")
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--bias-max", type=float, default=0.05)
    p.add_argument("--steps", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write the report as JSON here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="fit cable stiffness to a stream with ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--budget", type=int, default=32)
    p.add_argument("--bounds", type=float, nargs=2, default=(10.0, 200.0), metavar=("LOW", "HIGH"))
    p.add_argument("--per-cable", action="store_true", help="one stiffness per cable instead of one shared value")
    p.add_argument("--max-observations", type=int, default=5)
    p.add_argument("--out", required=True)
    _add_solver_args(p, "adam")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "bench" and args.optimizer != "all":
        bad = set(args.optimizer.split(",")) - set(OPTIMIZERS)
        if bad:
            parser.error(f"unknown optimizer(s): {', '.join(sorted(bad))}")
    try:
        return args.func(args)
    except (SpecFileError, InvalidSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (DegenerateEstimateError, CalibrationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OracleFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
