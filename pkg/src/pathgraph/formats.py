"""Versioned text documents for specs, solutions and bare states.

All documents are JSON written by a small deterministic emitter: keys in a
fixed order, floats with 17 significant digits, complex numbers as
``[re, im]`` pairs, short lists on one line.  ``docs/schema.md`` describes
every field.
"""

from __future__ import annotations

import json
import math
from typing import Any

from . import __version__
from .graph import Edge, Graph, StateVector, state_from_graph
from .optimize import ExperimentSpec, OptimizerConfig, Solution
from .states import LocationLayout, TargetState, build_target

SPEC_SCHEMA = "pathgraph.spec"
SOLUTION_SCHEMA = "pathgraph.solution"
STATE_SCHEMA = "pathgraph.state"
SCHEMA_VERSION = 1

# relative tolerance when re-checking an embedded amplitude table
RECHECK_RTOL = 1e-9


class SchemaError(ValueError):
    """A document failed validation; ``violations`` lists ``field: problem`` strings."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SchemaVersionError(SchemaError):
    pass


# ---------------------------------------------------------------------------
# emitter


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _scalar(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return _fmt_float(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _depth(x) -> int:
    if isinstance(x, list):
        return 1 + max((_depth(i) for i in x), default=0)
    return 0


def _has_dict(x) -> bool:
    return isinstance(x, dict) or (isinstance(x, list) and any(_has_dict(i) for i in x))


def _emit(x, indent: int, in_list: bool = False) -> str:
    # object members stay on one line when flat; list rows when at most two levels deep
    pad = "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{pad}{json.dumps(str(k))}: {_emit(v, indent + 1)}" for k, v in x.items())
        return "{\n" + body + "\n" + "  " * indent + "}"
    if isinstance(x, list):
        if not _has_dict(x) and _depth(x) <= (2 if in_list else 1):
            return "[" + ", ".join(_emit(i, indent, True) for i in x) + "]"
        body = ",\n".join(pad + _emit(i, indent + 1, True) for i in x)
        return "[\n" + body + "\n" + "  " * indent + "]"
    return _scalar(x)


def dumps(doc: dict) -> str:
    """Deterministic JSON text for ``doc`` (ends with a newline)."""
    return _emit(doc, 0) + "\n"


def _loads(text: str, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{what} document must be an object")
    return doc


def _check_schema(doc: dict, name: str) -> None:
    found = doc.get("schema")
    if not isinstance(found, str) or "/" not in found:
        raise SchemaError(f"schema: expected '{name}/{SCHEMA_VERSION}', got {found!r}")
    kind, _, version = found.partition("/")
    if kind != name:
        raise SchemaError(f"schema: expected a {name} document, got {kind!r}")
    if version != str(SCHEMA_VERSION):
        raise SchemaVersionError(
            f"schema: document version {version} is not supported "
            f"(this tool reads version {SCHEMA_VERSION})"
        )


def _cpx(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _parse_cpx(val, where: str, errors: list) -> complex:
    if (isinstance(val, list) and len(val) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)):
        return complex(float(val[0]), float(val[1]))
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return complex(float(val))
    errors.append(f"{where}: expected [re, im], got {val!r}")
    return 0j


# ---------------------------------------------------------------------------
# states


def _terms(state: StateVector) -> list:
    return [[list(k), _cpx(a)] for k, a in state.amplitudes.items()]


def _parse_terms(rows, dims, where: str, errors: list) -> dict:
    amps = {}
    if not isinstance(rows, list):
        errors.append(f"{where}: expected a list of [ket, [re, im]] rows")
        return amps
    for i, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == 2 and isinstance(row[0], list)):
            errors.append(f"{where}[{i}]: expected [ket, [re, im]]")
            continue
        ket = row[0]
        if not all(isinstance(m, int) and not isinstance(m, bool) for m in ket):
            errors.append(f"{where}[{i}]: ket entries must be integers")
            continue
        if dims is not None and (len(ket) != len(dims)
                                 or any(not 0 <= m < d for m, d in zip(ket, dims))):
            errors.append(f"{where}[{i}]: ket {ket} does not fit dims {list(dims)}")
            continue
        if tuple(ket) in amps:
            errors.append(f"{where}[{i}]: duplicate ket {ket}")
        amps[tuple(ket)] = _parse_cpx(row[1], f"{where}[{i}]", errors)
    return amps


def serialize_state(state: StateVector) -> str:
    return dumps({
        "schema": f"{STATE_SCHEMA}/{SCHEMA_VERSION}",
        "dims": list(state.dims),
        "terms": _terms(state),
    })


def parse_state(text: str) -> StateVector:
    doc = _loads(text, "state")
    _check_schema(doc, STATE_SCHEMA)
    errors: list[str] = []
    dims = _int_list(doc.get("dims"), "dims", errors)
    amps = _parse_terms(doc.get("terms"), dims, "terms", errors)
    if errors:
        raise SchemaError(errors)
    return StateVector(tuple(dims), amps)


def _int_list(val, where: str, errors: list) -> list[int] | None:
    if isinstance(val, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in val):
        return list(val)
    errors.append(f"{where}: expected a list of integers, got {val!r}")
    return None


# ---------------------------------------------------------------------------
# specs

_CONFIG_FIELDS = {
    "restarts": int,
    "loss_threshold": float,
    "triage_threshold": float,
    "max_iterations": int,
    "weight_bound": float,
    "complex_weights": bool,
    "stop_after": int,
    "prune_retries": int,
    "max_matchings": int,
    "allow_large": bool,
}


def spec_to_doc(spec: ExperimentSpec) -> dict:
    layout: dict[str, Any] = {"groups": {g: list(vs) for g, vs in spec.layout.groups.items()}}
    if spec.ancilla_sweep is not None:
        layout["ancillas"] = "auto"
        layout["ancilla_sweep"] = list(spec.ancilla_sweep)
        layout["ancilla_dim"] = spec.ancilla_dim
    else:
        layout["ancillas"] = list(spec.layout.ancillas)
    if spec.ancilla_modes is not None:
        layout["ancilla_modes"] = list(spec.ancilla_modes)
    if spec.target_source is not None:
        target = {"builder": spec.target_source["builder"],
                  "params": dict(spec.target_source.get("params", {}))}
    else:
        target = {"dims": list(spec.target.dims), "terms": _terms(spec.target)}
    cfg = spec.config
    return {
        "schema": f"{SPEC_SCHEMA}/{SCHEMA_VERSION}",
        "name": spec.name,
        "notes": spec.notes,
        "layout": layout,
        "dims": list(spec.dims),
        "constraint": spec.constraint,
        "target": target,
        "optimizer": {k: getattr(cfg, k) for k in _CONFIG_FIELDS},
        "seed": spec.seed,
    }


def serialize_spec(spec: ExperimentSpec) -> str:
    return dumps(spec_to_doc(spec))


def _typed(val, typ, where: str, errors: list):
    if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if typ is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if typ is bool and isinstance(val, bool):
        return val
    errors.append(f"{where}: expected {typ.__name__}, got {val!r}")
    return None


def parse_spec(text: str) -> ExperimentSpec:
    """Parse and validate a spec document.

    Raises
    ------
    SchemaError
        With every violation found, each prefixed by its field path.
    """
    doc = _loads(text, "spec")
    _check_schema(doc, SPEC_SCHEMA)
    errors: list[str] = []

    lay = doc.get("layout")
    groups: dict[str, tuple[int, ...]] = {}
    ancillas: tuple[int, ...] = ()
    sweep = None
    ancilla_dim = 2
    modes = None
    if not isinstance(lay, dict):
        errors.append("layout: expected an object with 'groups' and 'ancillas'")
    else:
        raw_groups = lay.get("groups")
        if not isinstance(raw_groups, dict) or not raw_groups:
            errors.append("layout.groups: expected a non-empty object of name -> vertex list")
        else:
            for g, vs in raw_groups.items():
                got = _int_list(vs, f"layout.groups.{g}", errors)
                if got is not None:
                    groups[g] = tuple(got)
        raw_anc = lay.get("ancillas", [])
        if raw_anc == "auto":
            sweep = tuple(_int_list(lay.get("ancilla_sweep", [0, 2, 4]),
                                    "layout.ancilla_sweep", errors) or ())
            ancilla_dim = _typed(lay.get("ancilla_dim", 2), int, "layout.ancilla_dim", errors) or 2
        else:
            ancillas = tuple(_int_list(raw_anc, "layout.ancillas", errors) or ())
        if "ancilla_modes" in lay:
            modes = _int_list(lay["ancilla_modes"], "layout.ancilla_modes", errors)
        owner: dict[int, str] = {}
        for g, vs in list(groups.items()) + [("ancillas", ancillas)]:
            for v in vs:
                if v in owner:
                    errors.append(f"layout.groups.{g}: vertex {v} is also listed in {owner[v]!r}")
                owner[v] = g
    layout = LocationLayout(groups, ancillas)
    n = layout.n_vertices

    dims_raw = doc.get("dims")
    if isinstance(dims_raw, int) and not isinstance(dims_raw, bool):
        dims = [dims_raw] * n
    else:
        dims = _int_list(dims_raw, "dims", errors) or []

    tgt = doc.get("target")
    target = None
    source = None
    if not isinstance(tgt, dict):
        errors.append("target: expected an object with 'builder' or 'terms'")
    elif "builder" in tgt:
        params = tgt.get("params", {})
        if not isinstance(params, dict):
            errors.append("target.params: expected an object")
            params = {}
        try:
            target = build_target(str(tgt["builder"]), **params)
            source = {"builder": tgt["builder"], "params": dict(params)}
        except (ValueError, TypeError) as exc:
            errors.append(f"target.builder: {exc}")
    elif "terms" in tgt:
        tdims = _int_list(tgt.get("dims"), "target.dims", errors)
        amps = _parse_terms(tgt["terms"], tdims, "target.terms", errors)
        if tdims is not None:
            target = TargetState(tuple(tdims), amps, False)
    else:
        errors.append("target: needs 'builder' or 'terms'")

    constraint = doc.get("constraint", "forbid-cross-location")
    raw_cfg = doc.get("optimizer", {})
    cfg_kw = {}
    if not isinstance(raw_cfg, dict):
        errors.append("optimizer: expected an object")
        raw_cfg = {}
    for key, val in raw_cfg.items():
        if key not in _CONFIG_FIELDS:
            errors.append(f"optimizer.{key}: unknown setting")
        elif key == "stop_after" and val is None:
            cfg_kw[key] = None
        else:
            cfg_kw[key] = _typed(val, _CONFIG_FIELDS[key], f"optimizer.{key}", errors)
    seed = _typed(doc.get("seed", 0), int, "seed", errors)
    name = doc.get("name", "")
    notes = doc.get("notes", "")
    if not isinstance(name, str) or not isinstance(notes, str):
        errors.append("name/notes: expected strings")
    if errors:
        raise SchemaError(errors)

    spec = ExperimentSpec(
        layout=layout,
        dims=tuple(dims),
        target=target,
        constraint=constraint,
        config=OptimizerConfig(**cfg_kw),
        seed=seed,
        ancilla_modes=None if modes is None else tuple(modes),
        name=name,
        notes=notes,
        target_source=source,
        ancilla_sweep=sweep,
        ancilla_dim=ancilla_dim,
    )
    problems = spec.problems()
    if sweep is not None:
        # odd parity is settled per sweep entry
        problems = [p for p in problems if not p.startswith("odd vertex count")]
    if problems:
        raise SchemaError(problems)
    return spec


# ---------------------------------------------------------------------------
# solutions


def solution_to_doc(sol: Solution) -> dict:
    g = sol.graph
    return {
        "schema": f"{SOLUTION_SCHEMA}/{SCHEMA_VERSION}",
        "success": bool(sol.success),
        "message": sol.message,
        "n_vertices": g.n_vertices,
        "dims": list(g.dims),
        "edges": [[e.u, e.v, e.color_u, e.color_v, *_cpx(e.weight)] for e in g.edges],
        "loss": float(sol.loss),
        "fidelity": float(sol.fidelity),
        "state": _terms(state_from_graph(g)),
        "trace": [[*t["edge"], "accepted" if t["accepted"] else "rejected", float(t["loss"])]
                  for t in sol.trace],
        "provenance": {
            "seed": sol.seed,
            "restart": sol.restart,
            "restarts_used": sol.restarts_used,
            "tool_version": __version__,
            "wall_time": None if sol.wall_time is None else float(sol.wall_time),
        },
    }


def serialize_solution(sol: Solution) -> str:
    return dumps(solution_to_doc(sol))


def _parse_solution_doc(text: str) -> tuple[dict, Solution, StateVector]:
    doc = _loads(text, "solution")
    _check_schema(doc, SOLUTION_SCHEMA)
    errors: list[str] = []
    n = _typed(doc.get("n_vertices"), int, "n_vertices", errors)
    dims = _int_list(doc.get("dims"), "dims", errors)
    edges = []
    raw_edges = doc.get("edges")
    if not isinstance(raw_edges, list):
        errors.append("edges: expected a list of [u, v, color_u, color_v, re, im]")
        raw_edges = []
    for i, row in enumerate(raw_edges):
        if not (isinstance(row, list) and len(row) == 6
                and all(isinstance(x, int) and not isinstance(x, bool) for x in row[:4])):
            errors.append(f"edges[{i}]: expected [u, v, color_u, color_v, re, im]")
            continue
        w = _parse_cpx(row[4:], f"edges[{i}]", errors)
        edges.append(Edge.make(*row[:4], w.real if w.imag == 0.0 else w))
    stored = _parse_terms(doc.get("state", []), dims, "state", errors)
    trace = []
    for i, row in enumerate(doc.get("trace", [])):
        if not (isinstance(row, list) and len(row) == 6 and row[4] in ("accepted", "rejected")):
            errors.append(f"trace[{i}]: expected [u, v, color_u, color_v, accepted|rejected, loss]")
            continue
        trace.append({"edge": list(row[:4]), "accepted": row[4] == "accepted", "loss": float(row[5])})
    prov = doc.get("provenance", {})
    loss = _typed(doc.get("loss"), float, "loss", errors)
    fid = _typed(doc.get("fidelity"), float, "fidelity", errors)
    if errors:
        raise SchemaError(errors)
    graph = Graph(n, tuple(dims), tuple(edges))
    sol = Solution(
        graph=graph,
        loss=loss,
        fidelity=fid,
        success=bool(doc.get("success", False)),
        seed=int(prov.get("seed", 0)),
        restart=int(prov.get("restart", 0)),
        restarts_used=int(prov.get("restarts_used", 0)),
        wall_time=prov.get("wall_time"),
        trace=trace,
        message=str(doc.get("message", "")),
    )
    return doc, sol, StateVector(tuple(dims), stored)


def parse_solution(text: str) -> Solution:
    return _parse_solution_doc(text)[1]


def parse_solution_state(text: str) -> StateVector:
    """The amplitude table embedded in a solution document, as written."""
    return _parse_solution_doc(text)[2]


def recheck_solution(text: str) -> list[str]:
    """Compare a solution's embedded amplitude table with its graph's state.

    Returns a list of mismatches (empty when consistent).
    """
    _, sol, stored = _parse_solution_doc(text)
    fresh = state_from_graph(sol.graph)
    scale = max([abs(a) for a in fresh.amplitudes.values()] + [1e-300])
    out = []
    for ket in sorted(set(stored.amplitudes) | set(fresh.amplitudes)):
        a = stored.amplitudes.get(ket, 0j)
        b = fresh.amplitudes.get(ket, 0j)
        if abs(a - b) > RECHECK_RTOL * scale:
            out.append(f"ket {list(ket)}: stored {a:.6g}, recomputed {b:.6g}")
    if abs(sol.loss - (1.0 - sol.fidelity)) > 1e-12:
        out.append(f"loss {sol.loss} inconsistent with fidelity {sol.fidelity}")
    return out
