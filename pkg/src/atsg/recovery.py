"""Reconcile the integrated graph against the catalog's part totals."""

from __future__ import annotations

import copy
import enum
from collections import Counter
from dataclasses import dataclass, field

from .catalog import Catalog
from .core import (
    AssemblyUnit,
    Atsg,
    GraphError,
    PartInstance,
    rename_instances,
    splice_after,
    splice_out,
)


class RecoveryError(RuntimeError):
    pass


class Action(enum.Enum):
    ADDED = "added"
    REMOVED = "removed"


@dataclass(frozen=True)
class LogEntry:
    action: Action
    instance: PartInstance
    image: int
    reason: str


@dataclass
class ReconciliationLog:
    entries: list[LogEntry] = field(default_factory=list)
    renamed: dict[PartInstance, PartInstance] = field(default_factory=dict)
    converged: bool = False

    def count(self, action: Action, image: int | None = None) -> int:
        return sum(
            1 for e in self.entries if e.action is action and (image is None or e.image == image)
        )

    def by_type(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for e in self.entries:
            row = out.setdefault(e.instance.type_name, {"added": 0, "removed": 0})
            row[e.action.value] += 1
        return out


def _type_counts(atsg: Atsg) -> Counter[str]:
    final = atsg.final_output
    if final is None:
        return Counter()
    return Counter(p.type_name for p in atsg.object_nodes[final].closure().elements())


def _attaching_units(atsg: Atsg, type_name: str) -> list[AssemblyUnit]:
    return [
        u for u in atsg.units
        if atsg.is_leaf(u.attached_input)
        and atsg.object_nodes[u.attached_input].main_child.type_name == type_name
    ]


def insert_missing(atsg: Atsg, instance: PartInstance, catalog: Catalog) -> Atsg:
    """Splice a unit for ``instance`` right after the last unit attaching its type."""
    if instance.type_name not in catalog:
        raise RecoveryError(f"unknown part type {instance.type_name!r}")
    same = _attaching_units(atsg, instance.type_name)
    if not same:
        raise RecoveryError(
            f"cannot place missing {instance}: no assembly step uses a {instance.type_name}"
        )
    splice_after(atsg, same[-1], instance)
    return atsg


def remove_excess(atsg: Atsg, type_name: str, count: int) -> Atsg:
    """Splice out the ``count`` latest units that attach a bare part of this type."""
    if count <= 0:
        return atsg
    same = _attaching_units(atsg, type_name)
    if len(same) < count:
        raise RecoveryError(
            f"cannot remove {count} {type_name}: only {len(same)} removable steps"
        )
    for unit in reversed(same[-count:]):
        splice_out(atsg, unit)
    return atsg


def compact_ordinals(atsg: Atsg) -> dict[PartInstance, PartInstance]:
    """Renumber instances 1..n per type in the order the graph first uses them."""
    order: list[PartInstance] = []
    for unit in atsg.iter_topological():
        for node_id in unit.inputs:
            if atsg.is_leaf(node_id):
                node = atsg.object_nodes[node_id]
                for p in (node.main_child, *node.subordinate_children):
                    if p not in order:
                        order.append(p)
    seen: Counter[str] = Counter()
    mapping: dict[PartInstance, PartInstance] = {}
    for p in order:
        seen[p.type_name] += 1
        new = PartInstance(p.type_name, seen[p.type_name])
        if new != p:
            mapping[p] = new
    rename_instances(atsg, mapping)
    return mapping


def reconcile(atsg: Atsg, catalog: Catalog) -> tuple[Atsg, ReconciliationLog]:
    """Add or remove units until the final product holds exactly the catalog totals."""
    atsg = copy.deepcopy(atsg)
    rlog = ReconciliationLog()
    try:
        final = atsg.final_output
    except GraphError as exc:
        raise RecoveryError(str(exc)) from exc
    if final is None:
        raise RecoveryError("graph has no assembly units")

    counts = _type_counts(atsg)
    unknown = sorted(set(counts) - set(catalog.part_types))
    if unknown:
        raise RecoveryError(f"graph uses parts missing from the catalog: {unknown}")
    for part in catalog.part_types.values():
        excess = counts[part.name] - part.total_count
        if excess > 0:
            doomed = _attaching_units(atsg, part.name)[-excess:] if excess else []
            images = [u.image_index for u in doomed]
            instances = [atsg.object_nodes[u.attached_input].main_child for u in doomed]
            remove_excess(atsg, part.name, excess)
            for inst, img in zip(instances, images):
                rlog.entries.append(
                    LogEntry(Action.REMOVED, inst, img, f"{part.name} exceeds total {part.total_count}")
                )
    for part in catalog.part_types.values():
        missing = part.total_count - counts[part.name]
        if missing <= 0:
            continue
        used = [
            p.ordinal
            for node in atsg.object_nodes.values()
            for p in (node.main_child, *node.subordinate_children)
            if p.type_name == part.name
        ]
        next_ordinal = max(used, default=0) + 1
        for k in range(missing):
            inst = PartInstance(part.name, next_ordinal + k)
            insert_missing(atsg, inst, catalog)
            image = atsg.producer()[_leaf_consumer_output(atsg, inst)].image_index
            rlog.entries.append(
                LogEntry(Action.ADDED, inst, image, f"{part.name} short of total {part.total_count}")
            )

    rlog.renamed = compact_ordinals(atsg)
    rlog.entries = [
        LogEntry(e.action, rlog.renamed.get(e.instance, e.instance), e.image, e.reason)
        if e.action is Action.ADDED else e
        for e in rlog.entries
    ]
    final_counts = _type_counts(atsg)
    rlog.converged = all(
        final_counts[p.name] == p.total_count for p in catalog.part_types.values()
    )
    if not rlog.converged:
        raise RecoveryError(f"reconciliation did not converge: {dict(final_counts)}")
    return atsg, rlog


def _leaf_consumer_output(atsg: Atsg, inst: PartInstance) -> int:
    for unit in atsg.units:
        node = atsg.object_nodes[unit.attached_input]
        if node.main_child == inst and atsg.is_leaf(node.id):
            return unit.output
    raise RecoveryError(f"{inst} was not attached")
