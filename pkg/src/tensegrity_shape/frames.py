"""Plain-text line formats.

Every record is one line of single-space separated decimal numbers, written
with ``repr`` (shortest round-trip text, at most 17 significant digits) so
that ``parse(render(x)) == x`` bit for bit.

* inclination frame: ``t phi_1 ... phi_mb``
* estimate record:   ``t converged energy x_1 y_1 z_1 ... x_n y_n z_n``
* truth record:      ``t p_1x p_1y p_1z ... p_mbz theta_1 ... theta_mb phi_1 ... phi_mb``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .kinematics import ShapeState

__all__ = [
    "InclinationFrame",
    "FrameFormatError",
    "EstimateRecord",
    "parse_frame",
    "render_frame",
    "parse_estimate_record",
    "render_estimate_record",
    "parse_truth_record",
    "render_truth_record",
    "read_frames",
]


class FrameFormatError(ValueError):
    def __init__(self, reason: str, line_number: int | None = None):
        self.reason = reason
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(where + reason)


@dataclass(frozen=True)
class InclinationFrame:
    timestamp: float
    phis: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "phis", tuple(float(v) for v in self.phis))

    @property
    def arity(self) -> int:
        return len(self.phis)

    def check(self, expected_arity: int | None = None):
        """Raise :class:`FrameFormatError` on wrong arity or out-of-range values."""
        if expected_arity is not None and self.arity != expected_arity:
            raise FrameFormatError(f"expected {expected_arity} inclinations, got {self.arity}")
        if not math.isfinite(self.timestamp):
            raise FrameFormatError(f"non-finite timestamp {self.timestamp!r}")
        for i, v in enumerate(self.phis):
            if not (0.0 <= v <= math.pi):
                raise FrameFormatError(f"inclination {i} = {v!r} outside [0, pi]")
        return self


def _fmt(x: float) -> str:
    return repr(float(x))


def _numbers(line: str, line_number: int | None) -> list[float]:
    fields = line.split()
    if not fields:
        raise FrameFormatError("empty line", line_number)
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise FrameFormatError(f"non-numeric field ({exc})", line_number) from None


def parse_frame(line: str, expected_arity: int | None = None, line_number: int | None = None) -> InclinationFrame:
    values = _numbers(line, line_number)
    frame = InclinationFrame(values[0], values[1:])
    try:
        return frame.check(expected_arity)
    except FrameFormatError as exc:
        raise FrameFormatError(exc.reason, line_number) from None


def render_frame(frame: InclinationFrame) -> str:
    return " ".join(_fmt(v) for v in (frame.timestamp, *frame.phis)) + "\n"


@dataclass(frozen=True)
class EstimateRecord:
    timestamp: float
    converged: bool
    energy: float
    nodes: np.ndarray


def render_estimate_record(timestamp: float, converged: bool, energy: float, nodes) -> str:
    flat = np.asarray(nodes, dtype=float).reshape(-1)
    head = [_fmt(timestamp), "1" if converged else "0", _fmt(energy)]
    return " ".join(head + [_fmt(v) for v in flat]) + "\n"


def parse_estimate_record(line: str, node_count: int | None = None, line_number: int | None = None) -> EstimateRecord:
    values = _numbers(line, line_number)
    if len(values) < 3 or (len(values) - 3) % 3:
        raise FrameFormatError(f"estimate record needs 3 + 3n fields, got {len(values)}", line_number)
    nodes = np.array(values[3:]).reshape(-1, 3)
    if node_count is not None and len(nodes) != node_count:
        raise FrameFormatError(f"expected {node_count} nodes, got {len(nodes)}", line_number)
    if values[1] not in (0.0, 1.0):
        raise FrameFormatError(f"converged flag must be 0 or 1, got {values[1]!r}", line_number)
    return EstimateRecord(values[0], values[1] == 1.0, values[2], nodes)


def render_truth_record(timestamp: float, state: ShapeState) -> str:
    values = [timestamp, *state.p, *state.thetas, *state.phis]
    return " ".join(_fmt(v) for v in values) + "\n"


def parse_truth_record(line: str, strut_count: int, line_number: int | None = None) -> tuple[float, ShapeState]:
    values = _numbers(line, line_number)
    m_b = strut_count
    if len(values) != 1 + 5 * m_b:
        raise FrameFormatError(f"truth record needs {1 + 5 * m_b} fields, got {len(values)}", line_number)
    p = np.array(values[1 : 1 + 3 * m_b])
    thetas = values[1 + 3 * m_b : 1 + 4 * m_b]
    phis = values[1 + 4 * m_b :]
    try:
        return values[0], ShapeState(p.reshape(m_b, 3), thetas, phis)
    except ValueError as exc:
        raise FrameFormatError(str(exc), line_number) from None


def read_frames(lines: Iterable[str], expected_arity: int | None = None, errors: list | None = None) -> Iterator[InclinationFrame]:
    """Parse frames from text lines, skipping blanks.

    Malformed lines are skipped; if ``errors`` is given, each
    :class:`FrameFormatError` is appended to it.
    """
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield parse_frame(line, expected_arity, number)
        except FrameFormatError as exc:
            if errors is not None:
                errors.append(exc)


def write_lines(sink: TextIO, lines: Iterable[str]):
    for line in lines:
        sink.write(line)
