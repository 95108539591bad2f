from __future__ import annotations

import json
import re

from support import fixture, plan_text

from atsg.core import HandPolicy
from atsg.emit import (
    emit_complement_report,
    emit_dot,
    emit_node_report,
    emit_plan,
    emit_report,
)
from atsg.figures import write_bundle
from atsg.pipeline import compile_manual
from atsg.scheduler import minimize_tool_changes, schedule_dual_arm

NODE = re.compile(r'^\s*n(\d+) \[kind=(\w+), shape=\w+, color=(\w+), .*label="([^"]*)"')
EDGE = re.compile(r"^\s*n(\d+) -> n(\d+);$")


def _parse_dot(text: str):
    nodes, edges = {}, set()
    for line in text.splitlines():
        if m := NODE.match(line):
            nodes[int(m[1])] = (m[2], m[3], m[4])
        elif m := EDGE.match(line):
            edges.add((int(m[1]), int(m[2])))
    return nodes, edges


def test_dot_round_trip(chair_result):
    g = chair_result.atsg
    text = emit_dot(g, "chair")
    assert text.startswith('digraph "chair" {')
    nodes, edges = _parse_dot(text)
    assert edges == g.edges
    assert {n for n, v in nodes.items() if v[0] == "object"} == set(g.object_nodes)
    assert {n for n, v in nodes.items() if v[0] == "motion"} == set(g.motion_nodes)
    assert {n for n, v in nodes.items() if v[0] == "hand"} == set(g.hand_nodes)
    colours = {kind: colour for kind, colour, _ in nodes.values()}
    assert colours == {"object": "blue", "motion": "red", "hand": "green"}
    for nid, node in g.motion_nodes.items():
        assert nodes[nid][2] == node.verb
    assert emit_dot(g, "chair") == text


def test_plan_is_canonical_and_deterministic(chair, chair_series, chair_result):
    text = plan_text(chair_result)
    assert plan_text(compile_manual(chair_series, chair)) == text
    plan = json.loads(text)
    assert plan["format"] == "atsg-plan/1"
    assert plan["makespan"] == 11 and plan["arms"] == 2
    assert len(plan["steps"]) == 17
    keys = [(s["slot"], s["arm"]) for s in plan["steps"]]
    assert keys == sorted(keys)
    last = plan["steps"][-1]
    assert last["verb"] == "place" and last["attached"]["part"] == "Seat#1"
    assert last["result"]["contents"] == {
        "Back Rest": 1, "Base": 1, "Caster": 5, "Cylinder": 1,
        "Screw": 8, "Seat": 1, "Seat Plate": 1,
    }


def test_hand_policy_does_not_change_the_plan_steps(chair, chair_series):
    a = compile_manual(chair_series, chair, HandPolicy.PER_INPUT)
    b = compile_manual(chair_series, chair, HandPolicy.SHARED_PARENT)
    assert plan_text(a) == plan_text(b)


def test_node_report(chair_result):
    report = emit_node_report(chair_result.atsg, chair_result.groups, "office-chair")
    rows = report["images"]
    assert [r["object"] for r in rows] == [11, 11, 0, 11, 3, 3]
    assert [r["motion"] for r in rows] == [5, 5, 0, 5, 1, 1]
    assert [r["hand"] for r in rows] == [10, 10, 0, 10, 2, 2]
    assert report["entire"] == {"object": 35, "motion": 17, "hand": 34}
    assert report["reference"]["entire"] == {"object": 25, "motion": 17, "hand": 19}
    assert report["matches_reference"]["motion"] == [True] * 7
    assert "reference" not in emit_node_report(chair_result.atsg, chair_result.groups, "other")


def test_shared_parent_hand_total(chair, chair_series):
    result = compile_manual(chair_series, chair, HandPolicy.SHARED_PARENT)
    report = emit_node_report(result.atsg, result.groups, "office-chair")
    assert [r["hand"] for r in report["images"]] == [6, 6, 0, 6, 2, 2]
    assert report["entire"]["hand"] == 19


def test_complement_report(chair_result):
    report = emit_complement_report(chair_result.log, chair_result.groups, "office-chair")
    rows = report["images"]
    assert [r["total_add"] for r in rows] == [0] * 6
    assert [r["total_remove"] for r in rows] == [0, 1, 0, 0, 1, 0]
    assert [r["part_info_remove"] for r in rows] == [0, 1, 2, 0, 4, 7]
    assert [r["part_info_add"] for r in rows] == [0, 4, 9, 0, 0, 9]
    assert report["all"]["total_add"] == 0 and report["all"]["total_remove"] == 2
    assert report["reference"]["all"] == {
        "part_info_add": 22, "part_info_remove": 14, "total_add": 0, "total_remove": 2,
    }


def test_full_report_and_figures(tmp_path, chair_result):
    g = chair_result.atsg
    schedule = schedule_dual_arm(g)
    report = emit_report(chair_result, schedule, minimize_tool_changes(g))
    assert report["converged"] and report["validation"] == []
    assert report["final_product"] == chair_result.catalog.totals()
    assert report["tool_plan"]["changes"] == 4
    written = write_bundle(report, emit_plan(g, schedule), tmp_path / "figs")
    names = sorted(p.name for p in written)
    assert names == [
        "complement.csv", "node_counts.csv", "node_counts.png", "schedule.csv", "schedule.png",
    ]
    for path in written:
        assert path.stat().st_size > 0
        if path.suffix == ".png":
            assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    rows = (tmp_path / "figs" / "schedule.csv").read_text().splitlines()
    assert rows[0] == "slot,arm,unit,image,verb,parent,attached,tool"
    assert len(rows) == 18


def test_other_fixtures_emit(tmp_path):
    for name in ("color-box", "steel-rack"):
        cat, series = fixture(name)
        result = compile_manual(series, cat)
        plan = json.loads(plan_text(result))
        assert len(plan["steps"]) == len(result.atsg.units)
