"""Text emitters: Graphviz DOT, the execution plan, and the diagnostic tables."""

from __future__ import annotations

import json
from collections import Counter
from typing import Any, Sequence

from .builder import UnitGroup
from .core import Atsg, closure_signature, validate
from .recovery import Action, ReconciliationLog
from .scheduler import Schedule, ToolPlan, topo_order

OBJECT_COLOR = "blue"
HAND_COLOR = "green"
MOTION_COLOR = "red"

# Reference node and complement tables for the office-chair manual, keyed by
# catalog name. Reports print them next to the computed cells.
REFERENCE_TABLES: dict[str, dict[str, Any]] = {
    "office-chair": {
        "nodes": {
            "images": {
                1: (11, 5, 7), 2: (11, 5, 6), 3: (0, 0, 0),
                4: (11, 5, 6), 5: (3, 1, 2), 6: (3, 1, 2),
            },
            "entire": (25, 17, 19),
        },
        "complement": {
            1: (0, 0, 0, 0), 2: (4, 1, 0, 1), 3: (9, 2, 0, 0),
            4: (0, 0, 0, 0), 5: (0, 4, 0, 1), 6: (9, 7, 0, 0),
        },
    }
}


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(atsg: Atsg, name: str = "ATSG") -> str:
    """Graphviz text: object nodes blue, hand nodes green, motion nodes red."""
    lines = [f"digraph {_quote(name)} {{", "  rankdir=TB;", "  node [style=filled];"]
    for nid in sorted(atsg.object_nodes):
        node = atsg.object_nodes[nid]
        subs = ", ".join(p.id for p in node.subordinate_children)
        tip = f"{node.main_child.id} | {subs}" if subs else node.main_child.id
        lines.append(
            f"  n{nid} [kind=object, shape=box, color={OBJECT_COLOR}, fillcolor=lightblue, "
            f"label={_quote(node.display_name)}, tooltip={_quote(tip)}];"
        )
    for nid in sorted(atsg.motion_nodes):
        node = atsg.motion_nodes[nid]
        lines.append(
            f"  n{nid} [kind=motion, shape=ellipse, color={MOTION_COLOR}, fillcolor=mistyrose, "
            f"label={_quote(node.verb)}];"
        )
    for nid in sorted(atsg.hand_nodes):
        node = atsg.hand_nodes[nid]
        lines.append(
            f"  n{nid} [kind=hand, shape=hexagon, color={HAND_COLOR}, fillcolor=honeydew, "
            f"label={_quote(node.tool)}];"
        )
    for src, dst in sorted(atsg.edges):
        lines.append(f"  n{src} -> n{dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def image_counts(atsg: Atsg, image: int) -> tuple[int, int, int]:
    """(object, motion, hand) nodes touched by the units of one image."""
    units = [u for u in atsg.units if u.image_index == image]
    objects = {n for u in units for n in (*u.inputs, u.output)}
    hands = {h for u in units for h in u.hands}
    return len(objects), len(units), len(hands)


def emit_node_report(atsg: Atsg, groups: Sequence[UnitGroup], catalog_name: str = "") -> dict:
    rows = []
    for group in groups:
        obj, mot, hand = image_counts(atsg, group.image_index)
        rows.append({"image": group.image_index, "object": obj, "motion": mot, "hand": hand})
    report: dict[str, Any] = {
        "hand_policy": atsg.hand_policy.value,
        "images": rows,
        "entire": {
            "object": len(atsg.object_nodes),
            "motion": len(atsg.motion_nodes),
            "hand": len(atsg.hand_nodes),
        },
    }
    ref = REFERENCE_TABLES.get(catalog_name)
    if ref:
        ref_obj, ref_mot, ref_hand = ref["nodes"]["entire"]
        report["reference"] = {
            "images": [
                {"image": i, "object": o, "motion": m, "hand": h}
                for i, (o, m, h) in sorted(ref["nodes"]["images"].items())
            ],
            "entire": {"object": ref_obj, "motion": ref_mot, "hand": ref_hand},
        }
        report["matches_reference"] = {
            key: [
                row[key] == ref["nodes"]["images"].get(row["image"], (None,) * 3)[k]
                for row in rows
            ]
            + [report["entire"][key] == (ref_obj, ref_mot, ref_hand)[k]]
            for k, key in enumerate(("object", "motion", "hand"))
        }
    return report


def emit_complement_report(
    log: ReconciliationLog, groups: Sequence[UnitGroup], catalog_name: str = ""
) -> dict:
    rows = []
    for group in groups:
        rows.append({
            "image": group.image_index,
            "part_info_add": group.added_part_info,
            "part_info_remove": group.removed_part_info,
            "total_add": log.count(Action.ADDED, group.image_index),
            "total_remove": log.count(Action.REMOVED, group.image_index),
        })
    keys = ("part_info_add", "part_info_remove", "total_add", "total_remove")
    report: dict[str, Any] = {
        "images": rows,
        "all": {k: sum(r[k] for r in rows) for k in keys},
    }
    ref = REFERENCE_TABLES.get(catalog_name)
    if ref:
        table = ref["complement"]
        report["reference"] = {
            "images": [{"image": i, **dict(zip(keys, cells))} for i, cells in sorted(table.items())],
            "all": {k: sum(cells[j] for cells in table.values()) for j, k in enumerate(keys)},
        }
    return report


def _part_view(atsg: Atsg, node_id: int) -> dict:
    node = atsg.object_nodes[node_id]
    return {
        "part": node.main_child.id,
        "contents": dict(closure_signature(node.closure())),
    }


def emit_plan(atsg: Atsg, schedule: Schedule) -> dict:
    """Canonical execution plan.

    Steps are sorted by (slot, arm) and refer to parts by instance name and
    to units by their position in the dependency order, never by node ids,
    so equivalent graphs give identical plans.
    """
    position = {u.step_index: k for k, u in enumerate(topo_order(atsg))}
    units = {u.step_index: u for u in atsg.units}
    producer = atsg.producer()
    steps = []
    for step in sorted(schedule.steps, key=lambda s: (s.slot, s.arm)):
        unit = units[step.unit]
        hands = [
            {"tool": atsg.hand_nodes[h].tool, "holds": atsg.object_nodes[i].main_child.id}
            for h, i in zip(unit.hands, unit.inputs)
        ]
        steps.append({
            "slot": step.slot,
            "arm": step.arm,
            "unit": position[unit.step_index],
            "image": unit.image_index,
            "verb": atsg.motion_nodes[unit.motion].verb,
            "parent": _part_view(atsg, unit.parent_input),
            "attached": _part_view(atsg, unit.attached_input),
            "hands": hands,
            "tool": step.tool,
            "after": sorted(
                position[producer[i].step_index] for i in unit.inputs if i in producer
            ),
            "result": _part_view(atsg, unit.output),
        })
    return {
        "format": "atsg-plan/1",
        "arms": schedule.arms,
        "makespan": schedule.makespan,
        "tool_changes": schedule.tool_changes,
        "steps": steps,
    }


def emit_report(
    result,  # pipeline.BuildResult
    schedule: Schedule,
    tool_plan: ToolPlan,
) -> dict:
    atsg = result.atsg
    name = result.catalog.name
    final = atsg.final_output
    closure = Counter(p.type_name for p in atsg.object_nodes[final].closure().elements())
    order_pos = {u.step_index: k for k, u in enumerate(topo_order(atsg))}
    return {
        "manual": result.series.source_label,
        "catalog": name,
        "converged": result.log.converged,
        "final_product": {t.name: closure[t.name] for t in result.catalog.part_types.values()},
        "catalog_totals": result.catalog.totals(),
        "validation": validate(atsg),
        "nodes": emit_node_report(atsg, result.groups, name),
        "complement": emit_complement_report(result.log, result.groups, name),
        "reconciliation": [
            {
                "action": e.action.value,
                "part": e.instance.id,
                "image": e.image,
                "reason": e.reason,
            }
            for e in result.log.entries
        ],
        "tool_plan": {
            "changes": tool_plan.changes,
            "exact": tool_plan.exact,
            "lower_bound": tool_plan.lower_bound,
            "order": [order_pos[u.step_index] for u in tool_plan.order],
        },
        "schedule": {
            "arms": schedule.arms,
            "makespan": schedule.makespan,
            "tool_changes": schedule.tool_changes,
        },
    }


def dumps(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=False) + "\n"
