"""Structure files.

A structure file is YAML (JSON is valid YAML and works too)::

    name: class1-prism-4
    strut_lengths: [0.37, 0.37, 0.37, 0.37]
    cables:
      - {a: 0, b: 1, k: 64.0, b0: 0.0}
      ...

Cable ``a`` is the node with the ``+1`` incidence entry, ``b`` the ``-1``
node, ``k`` the stiffness in N/m and ``b0`` the rest length in meters
(optional, default zero).  The long names ``node_a``, ``node_b``,
``stiffness`` and ``rest_length`` are accepted as well.

Instead of a path, ``builtin:prism`` (reference prism, zero rest lengths)
and ``builtin:prism-taut`` (rest lengths at 90% of the ring-shape cable
lengths) are accepted wherever a structure file is expected.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .model import CableSpec, StructureSpec, builtin_prism

__all__ = ["SpecFileError", "load_spec", "dump_spec", "save_spec", "BUILTINS"]


class SpecFileError(ValueError):
    pass


def _taut_prism() -> StructureSpec:
    from .simulate import taut_spec

    return taut_spec(builtin_prism())


BUILTINS = {
    "builtin:prism": builtin_prism,
    "builtin:prism-taut": _taut_prism,
}


_ALIASES = {"a": "node_a", "b": "node_b", "k": "stiffness", "b0": "rest_length"}


def _cable(record) -> CableSpec:
    if not isinstance(record, dict):
        raise TypeError(f"cable record must be a mapping, got {record!r}")
    fields = {_ALIASES.get(key, key): value for key, value in record.items()}
    unknown = set(fields) - set(_ALIASES.values())
    if unknown:
        raise ValueError(f"unknown cable field(s) {sorted(unknown)}")
    return CableSpec(int(fields["node_a"]), int(fields["node_b"]), float(fields["stiffness"]),
                     float(fields.get("rest_length", 0.0)))


def spec_from_dict(data) -> StructureSpec:
    if not isinstance(data, dict):
        raise SpecFileError("structure file must hold a mapping")
    try:
        lengths = [float(x) for x in data["strut_lengths"]]
        cables = [_cable(c) for c in data.get("cables") or []]
    except KeyError as exc:
        raise SpecFileError(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise SpecFileError(f"bad value: {exc}") from None
    return StructureSpec(tuple(lengths), tuple(cables), str(data.get("name", "")))


def spec_to_dict(spec: StructureSpec) -> dict:
    return {
        "name": spec.name,
        "strut_lengths": list(spec.strut_lengths),
        "cables": [
            {"a": c.node_a, "b": c.node_b, "k": c.stiffness, "b0": c.rest_length}
            for c in spec.cables
        ],
    }


def load_spec(source: str | Path) -> StructureSpec:
    """Read a structure from a file path or a ``builtin:`` name.

    The result is not validated; call :func:`validate_spec` on it.
    """
    if str(source) in BUILTINS:
        return BUILTINS[str(source)]()
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise SpecFileError(f"cannot read {source}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecFileError(f"{source}: not valid YAML ({exc})") from None
    return spec_from_dict(data)


def dump_spec(spec: StructureSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False, default_flow_style=None)


def save_spec(spec: StructureSpec, path: str | Path):
    Path(path).write_text(dump_spec(spec))
