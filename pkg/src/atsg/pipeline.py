"""ingest -> build -> integrate -> reconcile, as one call."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .builder import Builder, UnitGroup
from .catalog import Catalog
from .core import Atsg, HandPolicy, PartInstance
from .ingest import AssemblyRegistry, DetectionSeries
from .integrator import integrate
from .recovery import ReconciliationLog, reconcile


@dataclass
class BuildResult:
    catalog: Catalog
    series: DetectionSeries
    groups: list[UnitGroup]
    integrated: Atsg
    atsg: Atsg
    log: ReconciliationLog
    registry: AssemblyRegistry


def compile_manual(
    series: DetectionSeries, catalog: Catalog, policy: HandPolicy = HandPolicy.PER_INPUT
) -> BuildResult:
    builder = Builder(catalog, policy)
    groups = builder.build(series)
    integrated = integrate(groups)
    atsg, rlog = reconcile(integrated, catalog)
    annotate_part_information(atsg, groups, rlog)
    return BuildResult(catalog, series, groups, integrated, atsg, rlog, builder.registry)


def _state_before(atsg: Atsg, main: PartInstance, image: int) -> Counter[PartInstance] | None:
    """Closure of sub-assembly ``main`` as built by units of earlier images."""
    best = None
    for unit in atsg.iter_topological():
        if unit.image_index >= image:
            continue
        out = atsg.object_nodes[unit.output]
        if out.main_child == main:
            best = out
    return best.closure() if best is not None else None


def annotate_part_information(
    atsg: Atsg, groups: list[UnitGroup], rlog: ReconciliationLog
) -> None:
    """Fill each group's part-information counters against the final graph.

    ``removed_part_info`` counts drawn parts that were already assembled and
    do not serve as a unit input. ``added_part_info`` counts parts the image
    does not show but that the sub-assemblies it extends already contain.
    """
    for group in groups:
        detected = Counter(rlog.renamed.get(p, p) for p in group.detected)
        added = 0
        for parent in group.parents:
            parent = rlog.renamed.get(parent, parent)
            closure = _state_before(atsg, parent, group.image_index)
            if closure is None:
                continue
            added += sum((closure - detected).values())
        group.added_part_info = added
