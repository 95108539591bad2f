"""Shared helpers for the test suite: fixtures, invariant checks and oracles.

The oracles here are written independently of the library code they check:
brute-force enumeration of linear extensions, breadth-first search over
two-arm schedules, and a path walk for child closures.
"""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from functools import lru_cache
from itertools import combinations

from atsg.catalog import DATA_DIR, Catalog, load_catalog_file
from atsg.core import (
    AssemblyUnit,
    Atsg,
    PartInstance,
    add_unit,
    canonical_form,
    recompute_children,
    validate,
)
from atsg.emit import dumps, emit_plan
from atsg.ingest import DetectionImage, DetectionSeries, load_manual_file
from atsg.pipeline import BuildResult
from atsg.recovery import reconcile
from atsg.scheduler import predecessors, primary_tool, schedule_dual_arm

FIXTURES = {
    "chair": ("chair.toml", "chair_full.yaml"),
    "chair-degraded": ("chair.toml", "chair_degraded.yaml"),
    "color-box": ("color_box.toml", "color_box.yaml"),
    "steel-rack": ("steel_rack.toml", "steel_rack.yaml"),
}


@lru_cache(maxsize=None)
def catalog(name: str = "chair.toml") -> Catalog:
    return load_catalog_file(DATA_DIR / name)


def fixture(name: str) -> tuple[Catalog, DetectionSeries]:
    cat_file, manual_file = FIXTURES[name]
    return catalog(cat_file), load_manual_file(DATA_DIR / manual_file)


def plan_text(result: BuildResult, arms: int = 2) -> str:
    return dumps(emit_plan(result.atsg, schedule_dual_arm(result.atsg, arms)))


# -- invariants ---------------------------------------------------------------


def closure_by_walk(atsg: Atsg, node_id: int) -> Counter:
    """Child closure recomputed from scratch by walking producer links."""
    producer = {u.output: u for u in atsg.units}
    if node_id not in producer:
        node = atsg.object_nodes[node_id]
        return Counter([node.main_child, *node.subordinate_children])
    unit = producer[node_id]
    return closure_by_walk(atsg, unit.inputs[0]) + closure_by_walk(atsg, unit.inputs[1])


def check_invariants(result: BuildResult) -> list[str]:
    """Structural invariants of a compiled graph; an empty list means clean."""
    atsg, cat = result.atsg, result.catalog
    problems = list(validate(atsg))
    for unit in atsg.units:
        if len(unit.inputs) != 2:
            problems.append(f"unit {unit.step_index}: arity {len(unit.inputs)}")
    try:
        list(atsg.iter_topological())
    except Exception as exc:  # noqa: BLE001 - any failure here is a cycle report
        problems.append(f"not acyclic: {exc}")
        return problems

    # fastener-last: within one image, bare fasteners follow bare structural parts
    for image in sorted({u.image_index for u in atsg.units}):
        seen_fastener = False
        for unit in atsg.units:
            if unit.image_index != image or not atsg.is_leaf(unit.attached_input):
                continue
            part = atsg.object_nodes[unit.attached_input].main_child
            if cat[part.type_name].is_fastener:
                seen_fastener = True
            elif seen_fastener:
                problems.append(f"image {image}: {part} placed after a fastener")

    # closure conservation
    for unit in atsg.units:
        if atsg.object_nodes[unit.output].closure() != closure_by_walk(atsg, unit.output):
            problems.append(f"unit {unit.step_index}: closure differs from path walk")
    final = atsg.final_output
    leaves = Counter()
    for node_id in atsg.object_nodes:
        if atsg.is_leaf(node_id):
            node = atsg.object_nodes[node_id]
            leaves.update([node.main_child, *node.subordinate_children])
    final_closure = atsg.object_nodes[final].closure()
    if final_closure != leaves:
        problems.append("final closure is not the multiset of leaf parts")
    if any(n > 1 for n in final_closure.values()):
        problems.append("a part instance is used twice")
    by_type = Counter(p.type_name for p in final_closure.elements())
    if dict(by_type) != {k: v for k, v in cat.totals().items() if v}:
        problems.append(f"final product {dict(by_type)} differs from catalog totals")

    # reconcile idempotence
    again, log = reconcile(atsg, cat)
    if log.entries or log.renamed or canonical_form(again) != canonical_form(atsg):
        problems.append("reconcile is not idempotent")
    return problems


# -- random inputs -------------------------------------------------------------


def random_series(cat: Catalog, rng: random.Random) -> DetectionSeries:
    """A plausible detection series for ``cat`` with random noise.

    Every catalog part is drawn once in a random image; later images also
    redraw a few already-drawn structural parts as anchors. Detections are
    then dropped or duplicated at random.
    """
    stock = [name for name, n in cat.totals().items() for _ in range(n)]
    rng.shuffle(stock)
    k = rng.randint(1, min(6, max(1, len(stock) // 2)))
    cuts = sorted(rng.sample(range(2, len(stock)), k - 1)) if k > 1 else []
    chunks = [stock[a:b] for a, b in zip([0, *cuts], [*cuts, len(stock)])]
    drop = rng.choice([0.0, 0.05, 0.15])
    dup = rng.choice([0.0, 0.05])
    images = []
    drawn: list[str] = []
    for index, chunk in enumerate(chunks, start=1):
        structural = sorted({n for n in drawn if not cat[n].is_fastener})
        anchors = rng.sample(structural, min(len(structural), rng.randint(0, 2)))
        names = []
        for name in [*anchors, *chunk]:
            if rng.random() < drop:
                continue
            names.append(name)
            if rng.random() < dup:
                names.append(name)
        drawn.extend(chunk)
        images.append(DetectionImage(index, tuple(names)))
    return DetectionSeries(tuple(images), "random")


def masking_condition(reference: Atsg, cat: Catalog):
    """Return a predicate telling whether a masked series keeps enough detections.

    A masking keeps enough when, for every image,
      * each part type the reference attaches there as a bare part keeps at
        least one detection,
      * each earlier sub-assembly the image extends keeps at least one
        detection of one of its structural members, and
      * fastener counts are kept in full except in the last image that
        fastens that type, whose shortfall recovery appends in place.
    """
    producer = reference.producer()
    needed: dict[int, set[str]] = defaultdict(set)
    anchors: dict[int, list[set[str]]] = defaultdict(list)
    fastened: dict[int, Counter] = defaultdict(Counter)
    for unit in reference.units:
        for node_id in unit.inputs:
            node = reference.object_nodes[node_id]
            if reference.is_leaf(node_id):
                needed[unit.image_index].add(node.main_child.type_name)
            elif producer[node_id].image_index < unit.image_index:
                anchors[unit.image_index].append(
                    {p.type_name for p in node.closure() if not cat[p.type_name].is_fastener}
                )
        attached = reference.object_nodes[unit.attached_input]
        if reference.is_leaf(attached.id) and cat[attached.main_child.type_name].is_fastener:
            fastened[unit.image_index][attached.main_child.type_name] += 1
    last_fastening = {t: i for i in sorted(fastened) for t in fastened[i]}

    def keeps_enough(series: DetectionSeries) -> bool:
        for img in series.images:
            names = Counter(img.detected_names)
            if not needed[img.index] <= set(names):
                return False
            if any(not (group & set(names)) for group in anchors[img.index]):
                return False
            for t, n in fastened[img.index].items():
                if last_fastening[t] != img.index and names[t] < n:
                    return False
        return True

    return keeps_enough


def mask(series: DetectionSeries, rng: random.Random, rate: float) -> DetectionSeries:
    images = tuple(
        DetectionImage(img.index, tuple(n for n in img.detected_names if rng.random() >= rate))
        for img in series.images
    )
    return DetectionSeries(images, "masked")


def random_tree_atsg(rng: random.Random, n_units: int, tools=("wrench", "driver")) -> Atsg:
    """An in-tree of ``n_units`` two-input units with random primary tools."""
    atsg = Atsg()
    open_outputs: list[int] = []
    ordinal = 0

    def fresh() -> int:
        nonlocal ordinal
        ordinal += 1
        return atsg.new_object(PartInstance("P", ordinal)).id

    for k in range(n_units):
        # each later unit can close at most one open output, so take enough now
        later = n_units - k - 1
        low = max(0, len(open_outputs) - later)
        take = rng.randint(low, min(2, len(open_outputs)))
        picked = [open_outputs.pop(rng.randrange(len(open_outputs))) for _ in range(take)]
        inputs = picked + [fresh() for _ in range(2 - take)]
        rng.shuffle(inputs)
        main = atsg.object_nodes[inputs[0]].main_child
        out = atsg.new_object(main).id
        tool = rng.choice(["gripper", *tools])
        unit = AssemblyUnit(
            0, inputs, atsg.new_motion("place").id,
            [atsg.new_hand("gripper", inputs[0]).id, atsg.new_hand(tool, inputs[1]).id],
            out, tools=("gripper", tool),
        )
        add_unit(atsg, unit)
        open_outputs.append(out)
    return recompute_children(atsg)


# -- oracles -------------------------------------------------------------------


def linear_extensions(atsg: Atsg):
    """Every topological order of the units, by plain backtracking."""
    preds = predecessors(atsg)
    units = {u.step_index: u for u in atsg.units}
    order: list[AssemblyUnit] = []
    done: set[int] = set()

    def walk():
        if len(order) == len(units):
            yield list(order)
            return
        for k in sorted(units):
            if k not in done and preds[k] <= done:
                done.add(k)
                order.append(units[k])
                yield from walk()
                order.pop()
                done.discard(k)

    yield from walk()


def brute_force_min_changes(atsg: Atsg) -> int:
    best = None
    for order in linear_extensions(atsg):
        tools = [primary_tool(u) for u in order]
        changes = sum(a != b for a, b in zip(tools, tools[1:]))
        best = changes if best is None else min(best, changes)
    return best or 0


def exhaustive_makespan(atsg: Atsg, arms: int) -> int:
    """Shortest unit-time schedule on ``arms`` machines, by breadth-first search."""
    preds = predecessors(atsg)
    everything = frozenset(preds)
    frontier = {frozenset()}
    slots = 0
    while everything not in frontier:
        nxt = set()
        for done in frontier:
            ready = [k for k in preds if k not in done and preds[k] <= done]
            for pick in combinations(ready, min(arms, len(ready))):
                nxt.add(done | frozenset(pick))
        frontier = nxt
        slots += 1
    return slots
