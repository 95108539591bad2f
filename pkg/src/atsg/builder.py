"""Per-image task embodiment.

Each instruction image becomes a :class:`UnitGroup`: the newly drawn parts are
attached one at a time to a main part (or to the sub-assembly the image
extends), structural parts first and fasteners last, so every unit has exactly
two inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

from .catalog import Catalog, compare_precedence, lookup_action, precedence_key
from .core import (
    AssemblyUnit,
    Atsg,
    HandPolicy,
    IdSource,
    PartInstance,
    splice_after,
)
from .ingest import AssemblyRegistry, DetectionSeries, ResolvedImage, resolve_image

log = logging.getLogger(__name__)


class BuildError(RuntimeError):
    pass


class NothingToAssemble(BuildError):
    pass


@dataclass(frozen=True)
class SubAssembly:
    """An existing sub-assembly as it appears in the current image."""

    main: PartInstance
    seen: tuple[PartInstance, ...] = ()

    @property
    def type_name(self) -> str:
        return self.main.type_name


Part = Union[PartInstance, SubAssembly]


@dataclass
class UnitGroup:
    image_index: int
    graph: Atsg
    detected: tuple[PartInstance, ...] = ()
    parents: tuple[PartInstance, ...] = ()
    added_part_info: int = 0
    removed_part_info: int = 0

    @property
    def units(self) -> list[AssemblyUnit]:
        return self.graph.units


def _rank(part: Part, catalog: Catalog) -> tuple:
    inst = part.main if isinstance(part, SubAssembly) else part
    return (*precedence_key(catalog[inst.type_name]), -inst.ordinal)


def classify_new_parts(
    image: ResolvedImage, registry: AssemblyRegistry, catalog: Catalog
) -> tuple[list[PartInstance], list[PartInstance], list[PartInstance]]:
    """Split an image into ``(new, excluded_assembled, parents)``.

    ``parents`` are the standing sub-assemblies (by main part) that the image
    shows, found through any of their detected members. When nothing already
    assembled is visible but the image does draw new parts, they extend the
    most recently touched sub-assembly, unless the leading new part outranks
    that sub-assembly's main part, in which case they start a fresh one.
    """
    excluded = [p for p in image.instances if p in image.matched]
    new = [p for p in image.instances if p not in image.matched]
    parents: list[PartInstance] = []
    for p in excluded:
        root = registry.root_of(p)
        if root is not None and root not in parents:
            parents.append(root)
    if not parents and new:
        recent = registry.most_recent_root()
        if recent is not None:
            lead = max(new, key=lambda p: _rank(p, catalog))
            if _rank(lead, catalog) < _rank(recent, catalog):
                parents.append(recent)
    parents.sort(key=lambda p: _rank(p, catalog), reverse=True)
    return new, excluded, parents


def select_main(
    instances: Sequence[PartInstance],
    parents: Sequence[SubAssembly],
    catalog: Catalog,
) -> tuple[Part, list[Part]]:
    """Choose the main part; everything else becomes a subordinate."""
    if parents:
        ordered = sorted(parents, key=lambda p: _rank(p, catalog), reverse=True)
        return ordered[0], [*ordered[1:], *instances]
    if len(instances) < 2:
        raise NothingToAssemble("fewer than two parts and no sub-assembly to extend")
    main = instances[0]
    for inst in instances[1:]:
        winner = compare_precedence(catalog[main.type_name], catalog[inst.type_name])
        if winner.name != main.type_name:
            main = inst
        elif inst.type_name == main.type_name and inst.ordinal < main.ordinal:
            main = inst
    return main, [p for p in instances if p != main]


def order_subordinates(subs: Sequence[Part], catalog: Catalog) -> list[Part]:
    structural = [p for p in subs if not catalog[p.type_name].is_fastener]
    fasteners = [p for p in subs if catalog[p.type_name].is_fastener]
    structural.sort(key=lambda p: (_rank(p, catalog)[:3], -_ordinal(p)), reverse=True)
    fasteners.sort(key=lambda p: (catalog[p.type_name].catalog_index, _ordinal(p)))
    return structural + fasteners


def _ordinal(part: Part) -> int:
    return part.main.ordinal if isinstance(part, SubAssembly) else part.ordinal


def _node_for(graph: Atsg, part: Part, image_index: int):
    if isinstance(part, SubAssembly):
        return graph.new_object(part.main, part.seen, image_index, merge_key=part.main)
    return graph.new_object(part, image=image_index)


def assign_motion_and_hands(
    graph: Atsg,
    unit: AssemblyUnit,
    catalog: Catalog,
    policy: HandPolicy = HandPolicy.PER_INPUT,
    previous: AssemblyUnit | None = None,
) -> AssemblyUnit:
    """Fill in the unit's motion node, tools and hand nodes."""
    parent = graph.object_nodes[unit.parent_input]
    attached = graph.object_nodes[unit.attached_input]
    verb, main_tool, attached_tool = lookup_action(
        catalog[parent.display_name], catalog[attached.display_name], catalog
    )
    unit.motion = graph.new_motion(verb, unit.image_index).id
    unit.tools = (main_tool, attached_tool)
    parent_hand = None
    if (
        policy is HandPolicy.SHARED_PARENT
        and previous is not None
        and previous.output == unit.parent_input
        and previous.tools[0] == main_tool
    ):
        parent_hand = previous.hands[0]
    if parent_hand is None:
        parent_hand = graph.new_hand(main_tool, unit.parent_input).id
    unit.hands = [parent_hand, graph.new_hand(attached_tool, unit.attached_input).id]
    return unit


def expand_units(
    main: Part,
    subordinates: Sequence[Part],
    image_index: int,
    catalog: Catalog,
    ids: IdSource | None = None,
    policy: HandPolicy = HandPolicy.PER_INPUT,
) -> UnitGroup:
    """Chain one two-input unit per subordinate onto the evolving main part."""
    graph = Atsg(ids=ids or IdSource(), hand_policy=policy)
    state = _node_for(graph, main, image_index)
    previous = None
    for sub in order_subordinates(subordinates, catalog):
        sub_node = _node_for(graph, sub, image_index)
        out = graph.new_object(
            state.main_child,
            state.subordinate_children + tuple(sub_node.closure().elements()),
            image_index,
        )
        unit = AssemblyUnit(
            step_index=len(graph.units),
            inputs=[state.id, sub_node.id],
            motion=0,
            hands=[],
            output=out.id,
            image_index=image_index,
        )
        assign_motion_and_hands(graph, unit, catalog, policy, previous)
        graph.units.append(unit)
        state, previous = out, unit
    return UnitGroup(image_index, graph)


class Builder:
    """Threads the assembly registry through the images of one manual."""

    def __init__(self, catalog: Catalog, policy: HandPolicy = HandPolicy.PER_INPUT) -> None:
        self.catalog = catalog
        self.policy = policy
        self.registry = AssemblyRegistry()
        self.ids = IdSource()
        self.groups: list[UnitGroup] = []
        self.resolved: list[ResolvedImage] = []

    def build(self, series: DetectionSeries) -> list[UnitGroup]:
        for image in series.images:
            self.add_image(resolve_image(image, self.catalog, self.registry))
        self.finalize()
        return self.groups

    def add_image(self, image: ResolvedImage) -> UnitGroup:
        self.resolved.append(image)
        new, excluded, parents = classify_new_parts(image, self.registry, self.catalog)
        for root in parents:
            self.registry.roots[root] = image.index
        new = [p for p in new if not self._backfill(p, parents)]

        seen = {r: tuple(p for p in excluded if self.registry.root_of(p) == r and p != r)
                for r in parents}
        subassemblies = [SubAssembly(r, seen[r]) for r in parents]
        group = UnitGroup(image.index, Atsg(ids=self.ids, hand_policy=self.policy))
        if new or len(parents) > 1:
            try:
                main, subs = select_main(new, subassemblies, self.catalog)
            except NothingToAssemble:
                log.info("image %d: nothing to assemble, %s left pending", image.index, new)
            else:
                group = expand_units(main, subs, image.index, self.catalog, self.ids, self.policy)
                self._commit(main, subs, image.index)
        group.detected = image.instances
        group.parents = tuple(parents)
        used = set(parents) if group.units else set()
        group.removed_part_info = sum(1 for p in excluded if p not in used)
        self.groups.append(group)
        return group

    def _commit(self, main: Part, subs: Sequence[Part], image_index: int) -> None:
        reg = self.registry
        if isinstance(main, SubAssembly):
            root = main.main
        else:
            root = main
            reg.attach(root, root)
        reg.roots[root] = image_index
        for sub in subs:
            if isinstance(sub, SubAssembly):
                reg.absorb(sub.main, root)
            else:
                reg.attach(sub, root)

    def _backfill(self, inst: PartInstance, parents: Sequence[PartInstance]) -> bool:
        """Attach a late-drawn structural part to the earlier image that used its type.

        A structural part of a type that a visible sub-assembly already
        received in an earlier image was occluded there; it joins that
        image's chain right after the last unit of the same type.
        """
        if self.catalog[inst.type_name].is_fastener:
            return False
        for root in parents:
            mains = {root} | {p for p, r in self.registry.assembled.items() if r == root}
            for group in reversed(self.groups):
                graph = group.graph
                template = None
                for unit in graph.units:
                    attached = graph.object_nodes[unit.attached_input]
                    out = graph.object_nodes[unit.output]
                    if (
                        out.main_child in mains
                        and attached.main_child.type_name == inst.type_name
                        and graph.is_leaf(attached.id)
                    ):
                        template = unit
                if template is not None:
                    splice_after(graph, template, inst)
                    self.registry.attach(inst, root)
                    log.debug("image %d: %s back-filled", group.image_index, inst)
                    return True
        return False

    def finalize(self) -> None:
        """Join sub-assemblies still standing apart after the last image."""
        roots = sorted(self.registry.roots, key=lambda r: _rank(r, self.catalog), reverse=True)
        if len(roots) < 2 or not self.groups:
            return
        last = self.groups[-1]
        index = last.image_index
        log.info("joining %d standing sub-assemblies after image %d", len(roots), index)
        parts = [SubAssembly(r) for r in roots]
        extra = expand_units(parts[0], parts[1:], index, self.catalog, self.ids, self.policy)
        if last.units:
            # chain the join after the image's own units
            tail = last.graph
            for kind in ("object_nodes", "motion_nodes", "hand_nodes"):
                getattr(tail, kind).update(getattr(extra.graph, kind))
            tail.units.extend(extra.graph.units)
            tail.renumber_steps()
        else:
            last.graph = extra.graph
        self._commit(parts[0], parts[1:], index)


def build_groups(
    series: DetectionSeries, catalog: Catalog, policy: HandPolicy = HandPolicy.PER_INPUT
) -> list[UnitGroup]:
    return Builder(catalog, policy).build(series)
