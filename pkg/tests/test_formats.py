import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from docgen import random_solution, random_spec
from pathgraph.formats import (
    SchemaError,
    SchemaVersionError,
    dumps,
    parse_solution,
    parse_solution_state,
    parse_spec,
    parse_state,
    recheck_solution,
    serialize_solution,
    serialize_spec,
    serialize_state,
)
from pathgraph.graph import state_from_graph
from pathgraph.optimize import Solution
from pathgraph.states import ghz_state, logical_bell, srv_422_state

SPEC = {
    "schema": "pathgraph.spec/1",
    "layout": {"groups": {"A": [0], "B": [1]}, "ancillas": [2, 3]},
    "dims": 2,
    "target": {"builder": "ghz", "params": {"n": 2}},
}


def spec_text(**changes):
    doc = json.loads(json.dumps(SPEC))
    for path, value in changes.items():
        *head, last = path.split("__")
        node = doc
        for h in head:
            node = node[h]
        node[last] = value
    return json.dumps(doc)


def test_minimal_spec_defaults():
    spec = parse_spec(spec_text())
    assert spec.dims == (2, 2, 2, 2)
    assert spec.constraint == "forbid-cross-location"
    assert spec.config.restarts == 50 and spec.config.loss_threshold == 1e-3
    assert spec.target.amplitudes == ghz_state(2).amplitudes


def test_ghz4_builder_spec():
    spec = parse_spec(spec_text(layout={"groups": {"A": [0, 1], "B": [2, 3]}, "ancillas": [4, 5]},
                                target={"builder": "ghz", "params": {"n": 4}}))
    assert spec.target.amplitudes == ghz_state(4).amplitudes
    assert spec.full_target().dims == (2,) * 6


def test_spec_with_inline_terms():
    spec = parse_spec(spec_text(target={"dims": [2, 2], "terms": [[[0, 1], [0.6, 0]], [[1, 0], [0, 0.8]]]}))
    assert spec.target.amplitudes == {(0, 1): 0.6, (1, 0): 0.8j}


def test_spec_round_trip_is_stable():
    spec = parse_spec(spec_text())
    text = serialize_spec(spec)
    assert serialize_spec(parse_spec(text)) == text
    assert parse_spec(text) == spec


def test_overlapping_groups_name_the_vertex():
    with pytest.raises(SchemaError) as exc:
        parse_spec(spec_text(layout={"groups": {"A": [0, 1], "B": [1]}, "ancillas": [2, 3]}))
    assert any("layout.groups.B" in v and "vertex 1" in v for v in exc.value.violations)


def test_unknown_target_builder():
    with pytest.raises(SchemaError, match="target.builder"):
        parse_spec(spec_text(target={"builder": "cluster"}))


def test_odd_vertex_count_is_rejected():
    with pytest.raises(SchemaError, match="odd vertex count 3"):
        parse_spec(spec_text(layout={"groups": {"A": [0], "B": [1]}, "ancillas": [2]}))


def test_all_violations_reported_together():
    with pytest.raises(SchemaError) as exc:
        parse_spec(spec_text(seed="x", optimizer={"restarts": 1.5, "colour": 1}))
    fields = " ".join(exc.value.violations)
    assert "seed" in fields and "optimizer.restarts" in fields and "optimizer.colour" in fields


def test_auto_ancillas_spec():
    spec = parse_spec(spec_text(layout={"groups": {"A": [0], "B": [1]}, "ancillas": "auto"}, dims=[2, 2]))
    assert spec.ancilla_sweep == (0, 2, 4) and spec.layout.ancillas == ()
    assert '"ancillas": "auto"' in serialize_spec(spec)


def test_old_schema_version():
    with pytest.raises(SchemaVersionError, match="version 0 is not supported"):
        parse_spec(spec_text(schema="pathgraph.spec/0"))
    with pytest.raises(SchemaError, match="expected a pathgraph.spec document"):
        parse_spec(spec_text(schema="pathgraph.solution/1"))


def test_malformed_json_reports_position():
    with pytest.raises(SchemaError, match="line 1, column"):
        parse_spec("{ nope")


def test_state_round_trip():
    for s in (ghz_state(3), srv_422_state(), logical_bell("ampdamp413")):
        text = serialize_state(s)
        back = parse_state(text)
        assert back.dims == s.dims
        assert back.amplitudes == {k: complex(a) for k, a in s.amplitudes.items()}
        assert serialize_state(back) == text


def test_state_ket_out_of_range():
    text = serialize_state(ghz_state(2)).replace("[1, 1]", "[1, 2]")
    with pytest.raises(SchemaError, match="does not fit dims"):
        parse_state(text)


def test_solution_round_trip(bell_graph):
    sol = Solution(bell_graph, 0.0, 1.0, True, seed=3, restart=1, restarts_used=4,
                   trace=[{"edge": [2, 3, 0, 0], "accepted": True, "loss": 1e-9}])
    text = serialize_solution(sol)
    back = parse_solution(text)
    assert back.graph == bell_graph
    assert back.trace == sol.trace and back.seed == 3
    assert serialize_solution(back) == text
    assert recheck_solution(text) == []
    assert parse_solution_state(text).amplitudes == state_from_graph(bell_graph).amplitudes


def test_tampered_amplitude_is_detected(bell_graph):
    text = serialize_solution(Solution(bell_graph, 0.0, 1.0))
    doc = json.loads(text)
    doc["state"][1][1] = [0.9, 0.0]
    problems = recheck_solution(json.dumps(doc))
    assert len(problems) == 1 and "[1, 1, 0, 0]" in problems[0]


def test_inconsistent_loss_is_detected(bell_graph):
    text = serialize_solution(Solution(bell_graph, 0.25, 1.0))
    assert any("inconsistent" in p for p in recheck_solution(text))


def test_float_text_is_exact():
    xs = [0.1, 1 / 3, -2.5e-300, 1e22, 5e-324, 123456789.0]
    text = dumps({"x": xs})
    assert json.loads(text)["x"] == xs
    assert '"x": [0.10000000000000001, ' in text
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_documents_round_trip(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    text = serialize_spec(spec)
    assert serialize_spec(parse_spec(text)) == text
    sol = random_solution(rng)
    text = serialize_solution(sol)
    assert serialize_solution(parse_solution(text)) == text
    assert recheck_solution(text) == []
