"""Command-line front end: ``pathgraph discover | verify | srv | export | targets``.

Exit status is 0 on success, 1 when the command's criterion is not met and 2
for usage, schema or input errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import __version__
from .export import FORMATS, export_graph
from .formats import (
    SchemaError,
    dumps,
    parse_solution,
    parse_spec,
    parse_state,
    recheck_solution,
    serialize_solution,
    serialize_state,
)
from .graph import GraphError, StateVector, state_from_graph
from .optimize import (
    ExperimentSpec,
    Solution,
    UnrealizableTopologyError,
    constraint_violations,
    default_jobs,
    discover,
    with_ancillas,
)
from .states import DegenerateStateError, build_target, fidelity, schmidt_rank_vector, LOGICAL_CODES

log = logging.getLogger("pathgraph")

EXIT_OK, EXIT_UNMET, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    exit_status: int = EXIT_OK

    def to_doc(self) -> dict:
        return {"command": self.command, "inputs": self.inputs,
                "outcome": self.outcome, "exit_status": self.exit_status}


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"cannot read {path}: no such file")
    return p.read_text(encoding="utf-8")


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("pathgraph.presets").iterdir()
                  if p.name.endswith(".json"))


def load_spec(ref: str) -> ExperimentSpec:
    """Read a spec from a path, or from a shipped preset via ``preset:NAME``."""
    if ref.startswith("preset:"):
        name = ref.split(":", 1)[1]
        if name not in preset_names():
            raise UsageError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
        text = resources.files("pathgraph.presets").joinpath(f"{name}.json").read_text("utf-8")
    else:
        text = _read(ref)
    return parse_spec(text)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parse_partition(text: str) -> list[list[int]]:
    try:
        return [[int(v) for v in part.split(",") if v.strip()] for part in text.split("|")]
    except ValueError:
        raise UsageError(f"bad partition {text!r}; expected e.g. '0|1|2' or '0,1|2,3'") from None


def _format_ket(ket) -> str:
    if max(ket, default=0) > 9:
        return "|" + ",".join(map(str, ket)) + ">"
    return "|" + "".join(map(str, ket)) + ">"


def _format_amp(a: complex) -> str:
    if a.imag == 0.0:
        return f"{a.real:+.12f}"
    return f"({a.real:+.12f}{a.imag:+.12f}j)"


# ---------------------------------------------------------------------------
# commands


def cmd_discover(args, report: RunReport) -> int:
    spec = load_spec(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    cfg_changes = {}
    if args.restarts is not None:
        cfg_changes["restarts"] = args.restarts
    if args.threshold is not None:
        cfg_changes["loss_threshold"] = args.threshold
    if args.stop_after is not None:
        cfg_changes["stop_after"] = args.stop_after or None
    if args.allow_large:
        cfg_changes["allow_large"] = True
    if cfg_changes:
        changes["config"] = replace(spec.config, **cfg_changes)
    spec = replace(spec, **changes)
    jobs = args.jobs or default_jobs()
    report.inputs = {"spec": args.spec, "seed": spec.seed, "restarts": spec.config.restarts,
                     "threshold": spec.config.loss_threshold, "jobs": jobs}

    def progress(sol: Solution) -> None:
        log.info("restart %d: loss %.3g, %d edges%s", sol.restart, sol.loss, len(sol.graph),
                 "" if sol.success else " (no success)")

    variants = [spec] if spec.ancilla_sweep is None else [
        with_ancillas(spec, k) for k in spec.ancilla_sweep
        if (len(spec.layout.payoff) + k) % 2 == 0
    ]
    if not variants:
        raise GraphError("no perfect matchings possible: every ancilla count leaves an odd vertex count")
    best = chosen = None
    for variant in variants:
        log.info("searching with %d ancillas", len(variant.layout.ancillas))
        try:
            sol = discover(variant, jobs=jobs, progress=progress)
        except UnrealizableTopologyError as exc:
            # a sweep entry with no matchings is skipped; the last one reports
            if variant is variants[-1] and best is None:
                raise
            log.info("skipped: %s", exc)
            continue
        if best is None or (sol.success, -sol.loss) > (best.success, -best.loss):
            best, chosen = sol, variant
        if sol.success:
            break

    wall = best.wall_time
    if not args.record_time:
        best.wall_time = None
    _write(args.output, serialize_solution(best))
    violations = constraint_violations(best.graph, chosen)
    print(f"fidelity: {best.fidelity:.12f}")
    print(f"loss: {best.loss:.3e}")
    print(f"edges: {len(best.graph)}")
    print(f"ancillas: {len(chosen.layout.ancillas)}")
    print("constraints: " + ("ok" if not violations else f"violated by {len(violations)} edges"))
    print(f"restarts used: {best.restarts_used}")
    print("status: " + ("solution found" if best.success else best.message))
    log.info("wall time %.2f s", wall or 0.0)
    report.outcome = {"fidelity": best.fidelity, "loss": best.loss, "edges": len(best.graph),
                      "constraints_ok": not violations, "success": best.success}
    return EXIT_OK if best.success else EXIT_UNMET


def cmd_verify(args, report: RunReport) -> int:
    text = _read(args.solution)
    sol = parse_solution(text)
    spec = load_spec(args.spec)
    report.inputs = {"solution": args.solution, "spec": args.spec}
    if spec.ancilla_sweep is not None:
        n_anc = sol.graph.n_vertices - len(spec.layout.payoff)
        spec = with_ancillas(spec, n_anc)
    if tuple(sol.graph.dims) != tuple(spec.dims):
        raise UsageError(f"dims mismatch: solution has {list(sol.graph.dims)}, spec has {list(spec.dims)}")
    min_fid = args.min_fidelity if args.min_fidelity is not None else 1.0 - spec.config.loss_threshold
    try:
        fid = fidelity(state_from_graph(sol.graph), spec.full_target())
    except DegenerateStateError:
        fid = 0.0
    violations = constraint_violations(sol.graph, spec)
    mismatches = recheck_solution(text)
    print(f"fidelity: {fid:.12f}")
    if abs(fid - sol.fidelity) > 1e-9:
        print(f"fidelity drop: stored {sol.fidelity:.12f}, recomputed {fid:.12f}")
    print("constraints: " + ("ok" if not violations else
                             "violated by " + ", ".join(str(list(k)) for k in violations)))
    print("stored state: " + ("consistent" if not mismatches else f"{len(mismatches)} mismatches"))
    for m in mismatches[:10]:
        print(f"  {m}")
    ok = fid >= min_fid and not violations and not mismatches
    print("status: " + ("verified" if ok else "FAILED"))
    report.outcome = {"fidelity": fid, "min_fidelity": min_fid, "constraints_ok": not violations,
                      "stored_state_ok": not mismatches, "edges": len(sol.graph)}
    return EXIT_OK if ok else EXIT_UNMET


def _load_any_state(path: str) -> StateVector:
    text = _read(path)
    if '"pathgraph.solution/' in text:
        return state_from_graph(parse_solution(text).graph)
    return parse_state(text)


def cmd_srv(args, report: RunReport) -> int:
    state = _load_any_state(args.state)
    required = None
    if args.spec:
        required = load_spec(args.spec).layout.payoff
    partition = _parse_partition(args.partition) if args.partition else None
    try:
        ranks = schmidt_rank_vector(state, partition, required)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(" ".join(map(str, ranks)))
    report.inputs = {"state": args.state, "partition": args.partition}
    report.outcome = {"srv": list(ranks)}
    return EXIT_OK


def cmd_export(args, report: RunReport) -> int:
    sol = parse_solution(_read(args.solution))
    layout = load_spec(args.spec).layout if args.spec else None
    if layout is not None and layout.n_vertices != sol.graph.n_vertices:
        layout = None
    text = export_graph(sol.graph, args.format, layout)
    _write(args.output, text)
    report.inputs = {"solution": args.solution, "format": args.format}
    report.outcome = {"nodes": sol.graph.n_vertices, "edges": len(sol.graph)}
    return EXIT_OK


def cmd_targets(args, report: RunReport) -> int:
    params = {}
    if args.n is not None:
        params["n"] = args.n
    if args.d is not None:
        params["d"] = args.d
    if args.code is not None:
        params["code"] = args.code
    try:
        target = build_target(args.name, **params)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    print(f"# {args.name} over dims {list(target.dims)}, {len(target)} terms")
    for ket, amp in target.amplitudes.items():
        print(f"{_format_amp(amp)} {_format_ket(ket)}")
    if args.output:
        _write(args.output, serialize_state(target))
    report.inputs = {"name": args.name, **params}
    report.outcome = {"terms": len(target)}
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathgraph", description="Design post-selected photonic experiments as edge-colored multigraphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    parser.add_argument("--report", help="write a machine-readable run report to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="search for a minimal graph realizing a spec")
    p.add_argument("spec", help="spec file, or preset:NAME")
    p.add_argument("-o", "--output", required=True, help="solution file to write ('-' for stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--threshold", type=float, help="loss threshold (1 - fidelity)")
    p.add_argument("--stop-after", type=int, help="stop after this many successful restarts (0: never)")
    p.add_argument("--jobs", type=int, help="parallel restarts (default: $PATHGRAPH_JOBS or cores)")
    p.add_argument("--allow-large", action="store_true", help="lift the matching-count guard")
    p.add_argument("--record-time", action="store_true",
                   help="store wall time in the solution file (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("verify", help="recompute a solution's state and check it against a spec")
    p.add_argument("solution")
    p.add_argument("spec", help="spec file, or preset:NAME")
    p.add_argument("--min-fidelity", type=float, help="default: 1 - spec loss threshold")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("srv", help="Schmidt-rank vector of a state or solution file")
    p.add_argument("state")
    p.add_argument("--partition", help="parties separated by '|', vertices by ',' (default: one per vertex)")
    p.add_argument("--spec", help="restrict the default partition to the spec's payoff vertices")
    p.set_defaults(func=cmd_srv)

    p = sub.add_parser("export", help="write a solution graph as DOT or GraphML")
    p.add_argument("solution")
    p.add_argument("--format", "-f", choices=FORMATS, default="dot")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--spec", help="label vertices with roles and groups from this spec")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("targets", help="print the ket/amplitude table of a built-in target")
    p.add_argument("name", help="ghz, bell, w, srv422 or logical-bell")
    p.add_argument("-n", type=int, help="particle count")
    p.add_argument("-d", type=int, help="dimension (ghz)")
    p.add_argument("--code", choices=LOGICAL_CODES)
    p.add_argument("-o", "--output", help="also write a state file")
    p.set_defaults(func=cmd_targets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    report = RunReport(args.command)
    try:
        status = args.func(args, report)
    except (UsageError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_UNMET
    report.exit_status = status
    if args.report:
        Path(args.report).write_text(dumps(report.to_doc()), encoding="utf-8")
    return status


if __name__ == "__main__":
    sys.exit(main())
