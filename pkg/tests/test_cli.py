import json

import pytest

from pathgraph.cli import EXIT_OK, EXIT_UNMET, EXIT_USAGE, main, preset_names
from pathgraph.formats import parse_spec, serialize_solution, serialize_state
from pathgraph.graph import Graph
from pathgraph.optimize import Solution
from pathgraph.states import TargetState, ghz_state, srv_422_state

BELL_SPEC = {
    "schema": "pathgraph.spec/1",
    "layout": {"groups": {"A": [0], "B": [1]}, "ancillas": [2, 3]},
    "dims": 2,
    "target": {"builder": "ghz", "params": {"n": 2}},
    "optimizer": {"restarts": 10},
    "seed": 0,
}


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "bell.json"
    p.write_text(json.dumps(BELL_SPEC))
    return str(p)


@pytest.fixture
def solution_file(tmp_path, bell_graph):
    p = tmp_path / "fig6.json"
    p.write_text(serialize_solution(Solution(bell_graph, 0.0, 1.0)))
    return str(p)


def lines(capsys):
    return capsys.readouterr().out.splitlines()


def test_presets_all_parse():
    from importlib import resources
    names = preset_names()
    assert {"fig2a", "fig2b", "fig3b", "fig5", "fig10a"} <= set(names)
    for name in names:
        text = resources.files("pathgraph.presets").joinpath(f"{name}.json").read_text("utf-8")
        assert parse_spec(text).name == name


def test_discover_bell(tmp_path, spec_file, capsys):
    out = tmp_path / "sol.json"
    assert main(["discover", spec_file, "-o", str(out)]) == EXIT_OK
    text = "\n".join(lines(capsys))
    assert "constraints: ok" in text and "status: solution found" in text
    assert json.loads(out.read_text())["provenance"]["wall_time"] is None


def test_discover_same_seed_is_byte_identical(tmp_path, spec_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["discover", spec_file, "-o", str(a), "--seed", "7", "--restarts", "4"]) == EXIT_OK
    assert main(["discover", spec_file, "-o", str(b), "--seed", "7", "--restarts", "4"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_discover_no_matchings(tmp_path, capsys):
    # two vertices, one per site: the only possible edge crosses sites
    doc = dict(BELL_SPEC, layout={"groups": {"A": [0], "B": [1]}, "ancillas": []})
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps(doc))
    assert main(["discover", str(spec), "-o", str(tmp_path / "o.json")]) == EXIT_UNMET
    assert "no perfect matchings possible" in capsys.readouterr().err


def test_discover_odd_vertex_spec_is_schema_error(tmp_path, capsys):
    doc = dict(BELL_SPEC, layout={"groups": {"A": [0], "B": [1]}, "ancillas": [2]})
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps(doc))
    assert main(["discover", str(spec), "-o", str(tmp_path / "o.json")]) == EXIT_USAGE
    assert "odd vertex count" in capsys.readouterr().err


def test_discover_auto_ancillas(tmp_path, capsys):
    doc = dict(BELL_SPEC, layout={"groups": {"A": [0], "B": [1]}, "ancillas": "auto"}, dims=[2, 2])
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps(doc))
    out = tmp_path / "o.json"
    assert main(["discover", str(spec), "-o", str(out)]) == EXIT_OK
    assert "ancillas: 2" in lines(capsys)
    assert main(["verify", str(out), str(spec)]) == EXIT_OK


def test_verify_fig6_solution(solution_file, capsys):
    assert main(["verify", solution_file, "preset:fig2a"]) == EXIT_OK
    out = lines(capsys)
    assert out[0] == "fidelity: 1.000000000000"
    assert "status: verified" in out


def test_verify_flags_cross_site_edge(tmp_path, bell_graph, capsys):
    g = Graph(4, 2, list(bell_graph.edges) + [(0, 1, 1, 1, 0.01)])
    p = tmp_path / "bad.json"
    p.write_text(serialize_solution(Solution(g, 0.0, 1.0)))
    assert main(["verify", str(p), "preset:fig2a", "--min-fidelity", "0.9"]) == EXIT_UNMET
    assert "constraints: violated by [0, 1, 1, 1]" in lines(capsys)


def test_verify_reports_fidelity_drop(tmp_path, solution_file, capsys):
    doc = json.loads(open(solution_file).read())
    doc["edges"][0][4] = -1.0
    p = tmp_path / "edited.json"
    p.write_text(json.dumps(doc))
    assert main(["verify", str(p), "preset:fig2a"]) == EXIT_UNMET
    out = "\n".join(lines(capsys))
    assert "fidelity drop" in out and "mismatches" in out and "status: FAILED" in out


def test_verify_dims_mismatch_is_usage_error(solution_file, capsys):
    assert main(["verify", solution_file, "preset:fig2b"]) == EXIT_USAGE
    assert "dims mismatch" in capsys.readouterr().err


@pytest.mark.parametrize("state, expected", [
    (srv_422_state(), "4 2 2"),
    (ghz_state(3), "2 2 2"),
    (TargetState((2, 2, 2), {(0, 0, 0): 1.0}), "1 1 1"),
])
def test_srv(tmp_path, capsys, state, expected):
    p = tmp_path / "state.json"
    p.write_text(serialize_state(state))
    assert main(["srv", str(p)]) == EXIT_OK
    assert lines(capsys) == [expected]


def test_srv_on_solution_with_partition(solution_file, capsys):
    assert main(["srv", solution_file, "--spec", "preset:fig2a"]) == EXIT_OK
    assert main(["srv", solution_file, "--partition", "0,2|1,3"]) == EXIT_OK
    assert lines(capsys) == ["2 2", "2 2"]
    assert main(["srv", solution_file, "--partition", "0|1"]) == EXIT_USAGE


@pytest.mark.parametrize("fmt, marker", [("dot", "graph experiment {"), ("graphml", "<graphml")])
def test_export(tmp_path, solution_file, fmt, marker):
    out = tmp_path / f"g.{fmt}"
    assert main(["export", solution_file, "-f", fmt, "-o", str(out), "--spec", "preset:fig2a"]) == EXIT_OK
    assert marker in out.read_text()


def test_missing_input_names_the_path(tmp_path, capsys):
    missing = str(tmp_path / "nowhere.json")
    assert main(["export", missing]) == EXIT_USAGE
    assert f"cannot read {missing}" in capsys.readouterr().err
    assert main(["verify", missing, "preset:nope"]) == EXIT_USAGE


def test_targets(capsys, tmp_path):
    assert main(["targets", "ghz", "-n", "6"]) == EXIT_OK
    out = lines(capsys)
    assert out[1:] == ["+0.707106781187 |000000>", "+0.707106781187 |111111>"]
    assert main(["targets", "logical-bell", "--code", "surface412", "-o", str(tmp_path / "t.json")]) == EXIT_OK
    out = lines(capsys)
    assert len(out) == 9 and out[1] == "+0.353553390593 |00000000>"
    assert main(["targets", "w", "-n", "2"]) == EXIT_OK
    assert sorted(lines(capsys)[1:]) == ["+0.707106781187 |01>", "+0.707106781187 |10>"]
    assert main(["targets", "w", "-n", "1"]) == EXIT_USAGE


def test_report_file(tmp_path, solution_file):
    rep = tmp_path / "report.json"
    assert main(["--report", str(rep), "verify", solution_file, "preset:fig2a"]) == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["command"] == "verify" and doc["exit_status"] == 0
    assert doc["outcome"]["fidelity"] == pytest.approx(1.0, abs=1e-12)
