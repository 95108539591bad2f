"""Single-arm and multi-arm execution orders for an ATSG.

Every unit takes one time slot. A unit may start once every unit producing
one of its inputs has finished in an earlier slot.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import AssemblyUnit, Atsg, CycleError

GRIPPER = "gripper"


def primary_tool(unit: AssemblyUnit) -> str:
    """The tool that characterises a unit: its non-gripper tool if any."""
    for tool in (unit.tools[1], unit.tools[0]):
        if tool != GRIPPER:
            return tool
    return GRIPPER


def predecessors(atsg: Atsg) -> dict[int, set[int]]:
    """Map each unit's step index to the step indices it waits for."""
    producer = atsg.producer()
    return {
        u.step_index: {producer[i].step_index for i in u.inputs if i in producer}
        for u in atsg.units
    }


def topo_order(atsg: Atsg) -> list[AssemblyUnit]:
    """Linear extension of unit precedence, ties broken by lower step index."""
    preds = predecessors(atsg)
    by_step = {u.step_index: u for u in atsg.units}
    waiting = {k: len(v) for k, v in preds.items()}
    succs: dict[int, list[int]] = {k: [] for k in preds}
    for k, ps in preds.items():
        for p in ps:
            succs[p].append(k)
    ready = [k for k, n in waiting.items() if n == 0]
    heapq.heapify(ready)
    order: list[AssemblyUnit] = []
    while ready:
        k = heapq.heappop(ready)
        order.append(by_step[k])
        for s in succs[k]:
            waiting[s] -= 1
            if waiting[s] == 0:
                heapq.heappush(ready, s)
    if len(order) != len(preds):
        raise CycleError("unit precedence contains a cycle")
    return order


def count_tool_changes(units: list[AssemblyUnit]) -> int:
    tools = [primary_tool(u) for u in units]
    return sum(1 for a, b in zip(tools, tools[1:]) if a != b)


class ToolPlan(NamedTuple):
    order: list[AssemblyUnit]
    changes: int
    exact: bool
    lower_bound: int


def minimize_tool_changes(atsg: Atsg, exact_limit: int = 12) -> ToolPlan:
    """Linear extension with few adjacent tool switches.

    Up to ``exact_limit`` units the minimum is found by dynamic programming
    over sets of finished units. Larger graphs use a greedy pass that keeps
    the current tool while any ready unit needs it; ``lower_bound`` then
    gives the distinct-tool bound the result can be compared against.
    """
    units = sorted(atsg.units, key=lambda u: u.step_index)
    distinct = len({primary_tool(u) for u in units})
    bound = max(distinct - 1, 0)
    if len(units) <= exact_limit:
        order = _exact_order(atsg, units)
        changes = count_tool_changes(order)
        return ToolPlan(order, changes, True, changes)
    order = _greedy_order(atsg, units)
    return ToolPlan(order, count_tool_changes(order), False, bound)


def _greedy_order(atsg: Atsg, units: list[AssemblyUnit]) -> list[AssemblyUnit]:
    preds = predecessors(atsg)
    by_step = {u.step_index: u for u in units}
    done: set[int] = set()
    order: list[AssemblyUnit] = []
    current = None
    while len(order) < len(units):
        ready = sorted(k for k in by_step if k not in done and preds[k] <= done)
        if not ready:
            raise CycleError("unit precedence contains a cycle")
        same = [k for k in ready if primary_tool(by_step[k]) == current]
        k = (same or ready)[0]
        done.add(k)
        order.append(by_step[k])
        current = primary_tool(by_step[k])
    return order


def _exact_order(atsg: Atsg, units: list[AssemblyUnit]) -> list[AssemblyUnit]:
    n = len(units)
    index = {u.step_index: i for i, u in enumerate(units)}
    preds = predecessors(atsg)
    need = [sum(1 << index[p] for p in preds[u.step_index]) for u in units]
    tools = [primary_tool(u) for u in units]
    full = (1 << n) - 1
    # best[(mask, last)] = fewest switches to finish everything not in mask
    best: dict[tuple[int, int], int] = {}

    def solve(mask: int, last: int) -> int:
        if mask == full:
            return 0
        key = (mask, last)
        if key in best:
            return best[key]
        result = None
        for i in range(n):
            if mask >> i & 1 or need[i] & ~mask:
                continue
            cost = (last >= 0 and tools[i] != tools[last]) + solve(mask | 1 << i, i)
            if result is None or cost < result:
                result = cost
        if result is None:
            raise CycleError("unit precedence contains a cycle")
        best[key] = result
        return result

    order: list[AssemblyUnit] = []
    mask, last = 0, -1
    total = solve(0, -1)
    while mask != full:
        for i in range(n):
            if mask >> i & 1 or need[i] & ~mask:
                continue
            cost = (last >= 0 and tools[i] != tools[last]) + solve(mask | 1 << i, i)
            if cost == total:
                total -= last >= 0 and tools[i] != tools[last]
                order.append(units[i])
                mask, last = mask | 1 << i, i
                break
    return order


@dataclass(frozen=True)
class ScheduleStep:
    slot: int
    arm: int
    unit: int
    tool: str


@dataclass
class Schedule:
    steps: list[ScheduleStep] = field(default_factory=list)
    makespan: int = 0
    tool_changes: list[int] = field(default_factory=list)
    arms: int = 1


def schedule_dual_arm(atsg: Atsg, arms: int = 2, dedicated_tool_arm: bool = False) -> Schedule:
    """Greedy list schedule of unit-time tasks on ``arms`` arms.

    In each slot every arm in turn takes a ready unit, preferring one that
    keeps the arm's current tool, then the lowest step index. With
    ``dedicated_tool_arm`` each tool is pinned to one arm (tools dealt out in
    order of first use), so an arm only takes units needing its tool.
    """
    if arms < 1:
        raise ValueError("arms must be at least 1")
    preds = predecessors(atsg)
    by_step = {u.step_index: u for u in atsg.units}
    pinned: dict[str, int] = {}
    if dedicated_tool_arm:
        for u in topo_order(atsg):
            tool = primary_tool(u)
            if tool not in pinned:
                pinned[tool] = len(pinned) % arms
    current: list[str | None] = [None] * arms
    changes = [0] * arms
    done: set[int] = set()
    steps: list[ScheduleStep] = []
    slot = 0
    while len(done) < len(by_step):
        ready = sorted(k for k in by_step if k not in done and preds[k] <= done)
        if not ready:
            raise CycleError("unit precedence contains a cycle")
        taken: list[int] = []
        for arm in range(arms):
            options = [k for k in ready if k not in taken]
            if dedicated_tool_arm:
                options = [k for k in options if pinned[primary_tool(by_step[k])] == arm]
            if not options:
                continue
            k = min(options, key=lambda k: (primary_tool(by_step[k]) != current[arm], k))
            tool = primary_tool(by_step[k])
            if current[arm] is not None and current[arm] != tool:
                changes[arm] += 1
            current[arm] = tool
            taken.append(k)
            steps.append(ScheduleStep(slot, arm, k, tool))
        done.update(taken)
        slot += 1
    return Schedule(steps, slot, changes, arms)
