"""Structure description and signed incidence matrices.

Node numbering is fixed: strut ``i`` owns node ``i`` (its ``+q`` end) and
node ``i + m_b`` (its ``-q`` end), so a structure with ``m_b`` struts has
``2 * m_b`` nodes.  External numberings must be mapped before building a
:class:`StructureSpec`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "CableSpec",
    "StructureSpec",
    "ConnectivityMatrices",
    "InvalidSpecError",
    "validate_spec",
    "build_connectivity",
    "builtin_prism",
    "PRISM_STRUT_LENGTH",
    "PRISM_CABLE_LENGTH",
    "PRISM_STIFFNESS",
]

PRISM_STRUT_LENGTH = 0.37  # m
PRISM_CABLE_LENGTH = 0.22  # m
PRISM_STIFFNESS = 64.0  # N/m, i.e. 0.064 N/mm


class InvalidSpecError(ValueError):
    """Raised when an operation receives a structure that fails validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid structure spec: " + "; ".join(self.violations))


@dataclass(frozen=True)
class CableSpec:
    node_a: int
    node_b: int
    stiffness: float
    rest_length: float = 0.0


@dataclass(frozen=True)
class StructureSpec:
    strut_lengths: tuple[float, ...]
    cables: tuple[CableSpec, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "strut_lengths", tuple(float(x) for x in self.strut_lengths))
        object.__setattr__(self, "cables", tuple(self.cables))

    @property
    def strut_count(self) -> int:
        return len(self.strut_lengths)

    @property
    def node_count(self) -> int:
        return 2 * self.strut_count

    @property
    def cable_count(self) -> int:
        return len(self.cables)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.strut_lengths, dtype=float)

    @property
    def stiffnesses(self) -> np.ndarray:
        return np.array([c.stiffness for c in self.cables], dtype=float)

    @property
    def rest_lengths(self) -> np.ndarray:
        return np.array([c.rest_length for c in self.cables], dtype=float)

    @property
    def has_rest_lengths(self) -> bool:
        return any(c.rest_length > 0 for c in self.cables)

    def with_stiffness(self, stiffness) -> "StructureSpec":
        """Copy of the spec with per-cable stiffness replaced (scalar broadcasts)."""
        k = np.broadcast_to(np.asarray(stiffness, dtype=float), (self.cable_count,))
        cables = tuple(replace(c, stiffness=float(kk)) for c, kk in zip(self.cables, k))
        return replace(self, cables=cables)

    def with_rest_lengths(self, rest_lengths) -> "StructureSpec":
        b = np.broadcast_to(np.asarray(rest_lengths, dtype=float), (self.cable_count,))
        cables = tuple(replace(c, rest_length=float(bb)) for c, bb in zip(self.cables, b))
        return replace(self, cables=cables)


def validate_spec(spec: StructureSpec) -> list[str]:
    """Return every invariant violation of ``spec``; an empty list means valid."""
    problems = []
    m_b = spec.strut_count
    if m_b < 1:
        problems.append("structure must have at least one strut")
    for i, length in enumerate(spec.strut_lengths):
        if not np.isfinite(length) or length <= 0:
            problems.append(f"strut {i}: length must be > 0 (got {length!r})")
    n = 2 * m_b
    for k, c in enumerate(spec.cables):
        for label, node in (("node_a", c.node_a), ("node_b", c.node_b)):
            if not (isinstance(node, (int, np.integer)) and 0 <= node < n):
                problems.append(f"cable {k}: {label}={node!r} is not a node index in [0, {n})")
        if c.node_a == c.node_b:
            problems.append(f"cable {k}: node_a and node_b are both {c.node_a}")
        if not np.isfinite(c.stiffness) or c.stiffness <= 0:
            problems.append(f"cable {k}: stiffness must be > 0 (got {c.stiffness!r})")
        if not np.isfinite(c.rest_length) or c.rest_length < 0:
            problems.append(f"cable {k}: rest_length must be >= 0 (got {c.rest_length!r})")
    return problems


@dataclass(frozen=True)
class ConnectivityMatrices:
    """Node-granularity incidence matrices.

    ``Cs`` is ``m_s x n`` and ``Cb`` is ``m_b x n``; both are applied to each
    coordinate axis separately, which is equivalent to the 3-fold block form.
    """

    Cs: np.ndarray
    Cb: np.ndarray
    cable_a: np.ndarray = field(repr=False)
    cable_b: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.Cs, self.Cb, self.cable_a, self.cable_b):
            arr.setflags(write=False)

    def block_form(self, which: str = "Cs") -> np.ndarray:
        """Expanded ``3m x 3n`` form acting on interleaved (x, y, z) vectors."""
        return np.kron(getattr(self, which), np.eye(3))


def build_connectivity(spec: StructureSpec) -> ConnectivityMatrices:
    problems = validate_spec(spec)
    if problems:
        raise InvalidSpecError(problems)
    m_b, n, m_s = spec.strut_count, spec.node_count, spec.cable_count
    cs = np.zeros((m_s, n))
    a = np.array([c.node_a for c in spec.cables], dtype=int)
    b = np.array([c.node_b for c in spec.cables], dtype=int)
    rows = np.arange(m_s)
    cs[rows, a] = 1.0
    cs[rows, b] = -1.0
    cb = np.zeros((m_b, n))
    cb[np.arange(m_b), np.arange(m_b)] = 1.0
    cb[np.arange(m_b), np.arange(m_b) + m_b] = -1.0
    return ConnectivityMatrices(Cs=cs, Cb=cb, cable_a=a, cable_b=b)


# (node_a, node_b) pairs; row order matches the published prism matrix:
# upper loop, bottom loop, then the four interconnecting cables.
_PRISM_TOPOLOGY = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 5), (1, 6), (2, 7), (3, 4),
)


def builtin_prism(stiffness: float = PRISM_STIFFNESS, rest_length=0.0) -> StructureSpec:
    """The four-strut, twelve-cable Class-1 prism (37 cm struts, 64 N/m cables)."""
    b = np.broadcast_to(np.asarray(rest_length, dtype=float), (len(_PRISM_TOPOLOGY),))
    cables = tuple(
        CableSpec(node_a=i, node_b=j, stiffness=float(stiffness), rest_length=float(bb))
        for (i, j), bb in zip(_PRISM_TOPOLOGY, b)
    )
    return StructureSpec(
        strut_lengths=(PRISM_STRUT_LENGTH,) * 4,
        cables=cables,
        name="class1-prism-4",
    )
