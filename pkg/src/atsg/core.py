"""ATSG data model: object, motion and hand nodes wired into assembly units."""

from __future__ import annotations

import enum
import graphlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


class HandPolicy(enum.Enum):
    PER_INPUT = "per-input"
    SHARED_PARENT = "shared-parent"


@dataclass(frozen=True, order=True)
class PartInstance:
    type_name: str
    ordinal: int

    @property
    def id(self) -> str:
        return f"{self.type_name}#{self.ordinal}"

    def __str__(self) -> str:
        return self.id


@dataclass
class ObjectNode:
    id: int
    main_child: PartInstance
    subordinate_children: tuple[PartInstance, ...] = ()
    origin_image: int = 0
    # set on a node that re-draws an existing sub-assembly; cleared once merged
    merge_key: PartInstance | None = None

    @property
    def display_name(self) -> str:
        return self.main_child.type_name

    def closure(self) -> Counter[PartInstance]:
        c = Counter(self.subordinate_children)
        c[self.main_child] += 1
        return c


@dataclass
class MotionNode:
    id: int
    verb: str
    origin_image: int = 0


@dataclass
class HandNode:
    id: int
    tool: str
    holds: int


@dataclass
class AssemblyUnit:
    step_index: int
    inputs: list[int]
    motion: int
    hands: list[int]
    output: int
    image_index: int = 0
    # (tool on inputs[0], tool on inputs[1])
    tools: tuple[str, str] = ("gripper", "gripper")

    @property
    def parent_input(self) -> int:
        return self.inputs[0]

    @property
    def attached_input(self) -> int:
        return self.inputs[1]


@dataclass
class IdSource:
    """Sequential id allocator shared by every graph of one build."""

    next_id: int = 1

    def __call__(self) -> int:
        value = self.next_id
        self.next_id += 1
        return value


@dataclass
class Atsg:
    object_nodes: dict[int, ObjectNode] = field(default_factory=dict)
    motion_nodes: dict[int, MotionNode] = field(default_factory=dict)
    hand_nodes: dict[int, HandNode] = field(default_factory=dict)
    units: list[AssemblyUnit] = field(default_factory=list)
    ids: IdSource = field(default_factory=IdSource, compare=False)
    hand_policy: HandPolicy = HandPolicy.PER_INPUT

    # -- construction helpers -------------------------------------------------

    def new_object(
        self,
        main: PartInstance,
        subs: Iterable[PartInstance] = (),
        image: int = 0,
        merge_key: PartInstance | None = None,
    ) -> ObjectNode:
        node = ObjectNode(self.ids(), main, tuple(sorted(subs)), image, merge_key)
        self.object_nodes[node.id] = node
        return node

    def new_motion(self, verb: str, image: int = 0) -> MotionNode:
        node = MotionNode(self.ids(), verb, image)
        self.motion_nodes[node.id] = node
        return node

    def new_hand(self, tool: str, holds: int) -> HandNode:
        node = HandNode(self.ids(), tool, holds)
        self.hand_nodes[node.id] = node
        return node

    # -- queries --------------------------------------------------------------

    @property
    def edges(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for unit in self.units:
            for i in unit.inputs:
                out.add((i, unit.motion))
            for h in unit.hands:
                out.add((h, unit.motion))
            out.add((unit.motion, unit.output))
        return out

    def producer(self) -> dict[int, AssemblyUnit]:
        return {u.output: u for u in self.units}

    def consumer(self) -> dict[int, AssemblyUnit]:
        return {i: u for u in self.units for i in u.inputs}

    def final_outputs(self) -> list[int]:
        consumed = {i for u in self.units for i in u.inputs}
        return sorted(u.output for u in self.units if u.output not in consumed)

    @property
    def final_output(self) -> int | None:
        finals = self.final_outputs()
        if len(finals) > 1:
            raise GraphError(f"graph has {len(finals)} final outputs")
        return finals[0] if finals else None

    def is_leaf(self, node_id: int) -> bool:
        return node_id not in self.producer()

    def unit_of_motion(self, motion_id: int) -> AssemblyUnit:
        for u in self.units:
            if u.motion == motion_id:
                return u
        raise KeyError(motion_id)

    def renumber_steps(self) -> None:
        for k, unit in enumerate(self.units):
            unit.step_index = k

    def iter_topological(self) -> Iterator[AssemblyUnit]:
        """Units in dependency order, stable on list position."""
        producer = self.producer()
        order = {id(u): k for k, u in enumerate(self.units)}
        sorter: graphlib.TopologicalSorter = graphlib.TopologicalSorter()
        for k, unit in enumerate(self.units):
            sorter.add(k, *(order[id(producer[i])] for i in unit.inputs if i in producer))
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            raise CycleError("unit graph contains a cycle") from exc
        while sorter.is_active():
            ready = sorted(sorter.get_ready())
            for k in ready:
                yield self.units[k]
                sorter.done(k)


def _has_cycle(atsg: Atsg) -> bool:
    sorter: graphlib.TopologicalSorter = graphlib.TopologicalSorter()
    for src, dst in atsg.edges:
        sorter.add(dst, src)
    try:
        sorter.prepare()
    except graphlib.CycleError:
        return True
    return False


def add_unit(atsg: Atsg, unit: AssemblyUnit) -> Atsg:
    """Append ``unit`` to ``atsg`` in place, refusing arity or cycle violations."""
    if len(unit.inputs) != 2:
        raise GraphError(f"assembly unit needs exactly 2 inputs, got {len(unit.inputs)}")
    if unit.output in unit.inputs:
        raise GraphError(f"unit output {unit.output} is also one of its inputs")
    for node_id in (*unit.inputs, unit.output):
        if node_id not in atsg.object_nodes:
            raise GraphError(f"unknown object node {node_id}")
    if unit.motion not in atsg.motion_nodes:
        raise GraphError(f"unknown motion node {unit.motion}")
    if any(u.motion == unit.motion for u in atsg.units):
        raise GraphError(f"motion node {unit.motion} already belongs to a unit")
    if unit.output in atsg.producer():
        raise GraphError(f"object node {unit.output} already has a producer")
    for h in unit.hands:
        if h not in atsg.hand_nodes:
            raise GraphError(f"unknown hand node {h}")
    atsg.units.append(unit)
    if _has_cycle(atsg):
        atsg.units.pop()
        raise CycleError("adding the unit would introduce a cycle")
    unit.step_index = len(atsg.units) - 1
    return atsg


def children_closure(atsg: Atsg, node_id: int) -> Counter[PartInstance]:
    try:
        return atsg.object_nodes[node_id].closure()
    except KeyError:
        raise GraphError(f"unknown object node {node_id}") from None


def closure_signature(closure: Counter[PartInstance]) -> tuple[tuple[str, int], ...]:
    """Per-type multiplicities, ignoring instance ordinals."""
    by_type = Counter(inst.type_name for inst in closure.elements())
    return tuple(sorted(by_type.items()))


def validate(atsg: Atsg) -> list[str]:
    violations: list[str] = []
    motion_owner: Counter[int] = Counter()
    produced: Counter[int] = Counter()
    consumed: Counter[int] = Counter()
    for unit in atsg.units:
        tag = f"unit {unit.step_index}"
        if len(unit.inputs) != 2:
            violations.append(f"{tag}: arity violation ({len(unit.inputs)} inputs)")
        if unit.output in unit.inputs:
            violations.append(f"{tag}: output is also an input")
        missing = [n for n in (*unit.inputs, unit.output) if n not in atsg.object_nodes]
        if missing:
            violations.append(f"{tag}: unknown object nodes {missing}")
        if unit.motion not in atsg.motion_nodes:
            violations.append(f"{tag}: unknown motion node {unit.motion}")
        for h in unit.hands:
            hand = atsg.hand_nodes.get(h)
            if hand is None:
                violations.append(f"{tag}: unknown hand node {h}")
            elif hand.holds not in atsg.object_nodes:
                violations.append(f"{tag}: hand {h} holds unknown node {hand.holds}")
        motion_owner[unit.motion] += 1
        produced[unit.output] += 1
        consumed.update(unit.inputs)
        if not missing and len(unit.inputs) == 2 and unit.output not in unit.inputs:
            ins = [atsg.object_nodes[i] for i in unit.inputs]
            out = atsg.object_nodes[unit.output]
            if out.main_child != ins[0].main_child:
                violations.append(f"{tag}: output is not named after the parent input")
            if out.closure() != ins[0].closure() + ins[1].closure():
                violations.append(f"{tag}: closure not conserved")
    for m in atsg.motion_nodes:
        if motion_owner[m] != 1:
            violations.append(f"motion node {m}: belongs to {motion_owner[m]} units")
    for n, k in produced.items():
        if k > 1:
            violations.append(f"object node {n}: produced by {k} units")
    for n, k in consumed.items():
        if k > 1:
            violations.append(f"object node {n}: consumed by {k} units")
    for node in atsg.object_nodes.values():
        if node.main_child in node.subordinate_children:
            violations.append(f"object node {node.id}: main child repeated as subordinate")
    if _has_cycle(atsg):
        violations.append("cycle in edge set")
    finals = atsg.final_outputs()
    if atsg.units and len(finals) != 1:
        violations.append(f"{len(finals)} final outputs")
    return violations


def recompute_children(atsg: Atsg) -> Atsg:
    """Re-derive every unit output's children from its inputs, in dependency order."""
    for unit in atsg.iter_topological():
        parent = atsg.object_nodes[unit.parent_input]
        attached = atsg.object_nodes[unit.attached_input]
        out = atsg.object_nodes[unit.output]
        out.main_child = parent.main_child
        out.subordinate_children = tuple(
            sorted(parent.subordinate_children + tuple(attached.closure().elements()))
        )
    return atsg


def rebuild_hands(atsg: Atsg, policy: HandPolicy | None = None) -> Atsg:
    """Drop and re-create every hand node under ``policy``.

    ``PER_INPUT`` gives each unit one hand per input. ``SHARED_PARENT`` lets a
    unit reuse the parent-holding hand of the unit that produced its parent
    input when both use the same tool, so a chain of units on one evolving
    part keeps a single holding hand.
    """
    if policy is not None:
        atsg.hand_policy = policy
    atsg.hand_nodes.clear()
    producer = atsg.producer()
    parent_hand: dict[int, int] = {}
    for unit in atsg.iter_topological():
        parent_tool, attached_tool = unit.tools
        shared = None
        if atsg.hand_policy is HandPolicy.SHARED_PARENT:
            prev = producer.get(unit.parent_input)
            if prev is not None and prev.tools[0] == parent_tool:
                shared = parent_hand.get(id(prev))
        if shared is None:
            shared = atsg.new_hand(parent_tool, unit.parent_input).id
        parent_hand[id(unit)] = shared
        unit.hands = [shared, atsg.new_hand(attached_tool, unit.attached_input).id]
    return atsg


def splice_after(
    atsg: Atsg, template: AssemblyUnit, instance: PartInstance, image: int | None = None
) -> AssemblyUnit:
    """Attach a bare ``instance`` right after ``template`` on the same parent line.

    The new unit copies the template's verb and tools, consumes the template's
    output, and hands its own output to whatever consumed the template's
    output before.
    """
    consumer = atsg.consumer().get(template.output)
    image = template.image_index if image is None else image
    old_out = atsg.object_nodes[template.output]
    leaf = atsg.new_object(instance, image=image)
    out = atsg.new_object(
        old_out.main_child,
        old_out.subordinate_children + (instance,),
        image=image,
    )
    motion = atsg.new_motion(atsg.motion_nodes[template.motion].verb, image)
    unit = AssemblyUnit(
        step_index=0,
        inputs=[template.output, leaf.id],
        motion=motion.id,
        hands=[],
        output=out.id,
        image_index=template.image_index,
        tools=template.tools,
    )
    if consumer is not None:
        consumer.inputs = [out.id if i == template.output else i for i in consumer.inputs]
    atsg.units.insert(atsg.units.index(template) + 1, unit)
    atsg.renumber_steps()
    recompute_children(atsg)
    rebuild_hands(atsg)
    return unit


def splice_out(atsg: Atsg, unit: AssemblyUnit) -> PartInstance:
    """Remove a unit that attaches a bare part, reconnecting the parent line."""
    leaf = atsg.object_nodes[unit.attached_input]
    if not atsg.is_leaf(leaf.id):
        raise GraphError("only units attaching a bare part can be spliced out")
    consumer = atsg.consumer().get(unit.output)
    if consumer is not None:
        consumer.inputs = [unit.parent_input if i == unit.output else i for i in consumer.inputs]
    atsg.units.remove(unit)
    del atsg.object_nodes[unit.output]
    del atsg.object_nodes[leaf.id]
    del atsg.motion_nodes[unit.motion]
    atsg.renumber_steps()
    recompute_children(atsg)
    rebuild_hands(atsg)
    return leaf.main_child


def rename_instances(atsg: Atsg, mapping: dict[PartInstance, PartInstance]) -> None:
    if not mapping:
        return
    for node in atsg.object_nodes.values():
        node.main_child = mapping.get(node.main_child, node.main_child)
        node.subordinate_children = tuple(
            sorted(mapping.get(p, p) for p in node.subordinate_children)
        )
        if node.merge_key is not None:
            node.merge_key = mapping.get(node.merge_key, node.merge_key)


def unit_signature(atsg: Atsg, unit: AssemblyUnit) -> tuple:
    parent = atsg.object_nodes[unit.parent_input]
    attached = atsg.object_nodes[unit.attached_input]
    out = atsg.object_nodes[unit.output]
    return (
        atsg.motion_nodes[unit.motion].verb,
        parent.display_name,
        attached.display_name,
        closure_signature(attached.closure()),
        closure_signature(out.closure()),
        unit.tools,
    )


def canonical_form(atsg: Atsg) -> tuple[tuple, tuple]:
    """Graph identity up to node ids and instance ordinals.

    Units are labelled by ``unit_signature``; two graphs are equivalent when
    their sorted unit labels and their unit-to-unit precedence relation under
    those labels agree.
    """
    sig = {id(u): unit_signature(atsg, u) for u in atsg.units}
    producer = atsg.producer()
    edges = []
    for unit in atsg.units:
        for i in unit.inputs:
            if i in producer:
                edges.append((sig[id(producer[i])], sig[id(unit)]))
    return tuple(sorted(sig.values())), tuple(sorted(edges))
