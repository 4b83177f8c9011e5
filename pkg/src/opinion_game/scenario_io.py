"""Scenario files: JSON documents describing a network, horizon and weights.

Agents are numbered from 1 in files and from 0 in the library.

Keys: ``agents``, ``topics``, ``edges`` (list of ``{i, j, W}``, ``W`` an m x m
row-major matrix or a scalar), ``stubbornness`` (scalar, or per agent a
scalar / diagonal list / m x m matrix), ``x0`` (flat, length n*m), ``t_f``,
``r`` and ``r_w`` (scalar, per-agent scalars or per-agent matrices; ``r_w``
may also be ``{"sweep": [...]}``), ``delta``, ``grid_steps``, and optional
``b``/``xi`` (per-agent m x d input maps), ``id`` and ``sweep``.  The
``sweep`` object may list ``r_w``, ``stubbornness`` and ``W`` values; a
``W`` entry replaces the weight of every edge.
"""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import re
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import OpinionNetwork
from .nash import Scenario

_KNOWN = {"id", "agents", "topics", "edges", "stubbornness", "x0", "t_f", "r", "r_w",
          "delta", "grid_steps", "b", "xi", "sweep"}
_REQUIRED = ("agents", "topics", "edges", "x0", "t_f")


def load_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return doc


def _field(doc: dict, key: str, convert, default=None):
    if key not in doc:
        return default
    try:
        return convert(doc[key])
    except ValidationError as exc:
        raise ValidationError(f"field '{key}': {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field '{key}': {exc}") from exc


def _sweep_values(doc: dict) -> dict:
    sweep = dict(doc.get("sweep") or {})
    if not isinstance(sweep, dict):
        raise ValidationError("field 'sweep': must be an object")
    unknown = set(sweep) - {"r_w", "stubbornness", "W"}
    if unknown:
        raise ValidationError(f"field 'sweep': unknown keys {sorted(unknown)}")
    r_w = doc.get("r_w")
    if isinstance(r_w, dict):
        if set(r_w) != {"sweep"} or not isinstance(r_w["sweep"], list) or not r_w["sweep"]:
            raise ValidationError("field 'r_w': sweep form is {\"sweep\": [v1, v2, ...]}")
        sweep.setdefault("r_w", r_w["sweep"])
    for key, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ValidationError(f"field 'sweep.{key}': must be a non-empty list")
    return sweep


def scenario_from_dict(doc: dict, overrides: dict | None = None) -> Scenario:
    """Validate a scenario document; ``overrides`` replace top-level keys (sweep cells)."""
    unknown = set(doc) - _KNOWN
    if unknown:
        raise ValidationError(f"unknown field(s): {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ValidationError(f"missing required field(s): {missing}")
    doc = dict(doc)
    sweep = _sweep_values(doc)
    if isinstance(doc.get("r_w"), dict):
        doc["r_w"] = sweep["r_w"][0]
    overrides = dict(overrides or {})
    edge_weight = overrides.pop("W", None)
    doc.update(overrides)

    n = _field(doc, "agents", _count)
    m = _field(doc, "topics", _count)
    if not isinstance(doc["edges"], list):
        raise ValidationError("field 'edges': must be a list")
    edges = []
    for k, e in enumerate(doc["edges"]):
        if not isinstance(e, dict) or set(e) - {"i", "j", "W"} or not {"i", "j"} <= set(e):
            raise ValidationError(f"edges[{k}]: expected an object with keys i, j, W")
        i, j = e["i"], e["j"]
        if not (isinstance(i, int) and isinstance(j, int)) or isinstance(i, bool) or isinstance(j, bool):
            raise ValidationError(f"edges[{k}]: endpoints must be integers")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValidationError(f"edges[{k}] ({i}->{j}): endpoint out of range [1, {n}]")
        W = e.get("W", 1.0) if edge_weight is None else edge_weight
        edges.append((i - 1, j - 1, W))
    try:
        net = OpinionNetwork.from_edges(
            n, m, edges,
            stubbornness=doc.get("stubbornness"),
            control_maps=doc.get("b"),
            disturbance_maps=doc.get("xi"),
        )
    except ValidationError as exc:
        raise ValidationError(_one_based(str(exc))) from exc
    x0 = _field(doc, "x0", lambda v: np.asarray(v, dtype=float))
    if x0.ndim != 1:
        raise ValidationError("field 'x0': must be a flat list of n*m numbers")
    return Scenario.build(net, x0, _field(doc, "t_f", float),
                          r=doc.get("r", 1.0), r_w=doc.get("r_w", 1.0),
                          delta=doc.get("delta", 1.0),
                          grid_steps=_field(doc, "grid_steps", _count, 2000),
                          name=str(doc.get("id", "")))


def _one_based(msg: str) -> str:
    """Edge messages from the network builder count from 0; shift them."""
    def shift(mt):
        return f"({int(mt.group(1)) + 1}->{int(mt.group(2)) + 1})"

    msg = re.sub(r"edge #(\d+)", lambda mt: f"edge #{int(mt.group(1)) + 1}", msg)
    return re.sub(r"\((\d+)->(\d+)\)", shift, msg)


def _count(v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < 1:
        raise ValidationError(f"expected a positive integer, got {v!r}")
    return int(v)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file (a sweep file yields its first cell)."""
    return scenario_from_dict(load_document(path))


def expand_sweep(doc: dict) -> list[tuple[str, Scenario]]:
    """All cells of the document's sweep (a single cell when there is none)."""
    sweep = _sweep_values(doc)
    if not sweep:
        return [("base", scenario_from_dict(doc))]
    keys = [k for k in ("stubbornness", "W", "r_w") if k in sweep]
    cells = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        overrides = dict(zip(keys, combo))
        label = "_".join(f"{k}={_label(v)}" for k, v in overrides.items())
        cell = scenario_from_dict(doc, overrides)
        name = f"{cell.name}/{label}" if cell.name else label
        cells.append((label, dataclasses.replace(cell, name=name)))
    return cells


def _label(v) -> str:
    if np.ndim(v) == 0:
        return f"{float(v):g}"
    return "[" + ",".join(_label(x) for x in v) + "]"


def scenario_to_dict(s: Scenario) -> dict:
    """Fully explicit document (every default spelled out) for a scenario."""
    net = s.network
    doc = {
        "agents": net.n,
        "topics": net.m,
        "edges": [{"i": e.tail + 1, "j": e.head + 1, "W": e.weight.tolist()} for e in net.edges],
        "stubbornness": [w.tolist() for w in net.stubbornness],
        "x0": s.x0.tolist(),
        "t_f": s.t_f,
        "r": [R.tolist() for R in s.R],
        "r_w": [R.tolist() for R in s.R_w],
        "delta": list(s.delta),
        "grid_steps": s.grid_steps,
        "b": [b.tolist() for b in net.control_maps],
        "xi": [x.tolist() for x in net.disturbance_maps],
    }
    if s.name:
        doc["id"] = s.name
    return doc


def write_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1) + "\n")


def scenario_hash(s: Scenario) -> str:
    canon = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    return scenario_to_dict(a) == scenario_to_dict(b)
