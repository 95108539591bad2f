"""Connect per-image unit groups into one graph and propagate child parts."""

from __future__ import annotations

import copy
import logging
from typing import Iterable, Union

from .builder import UnitGroup
from .core import Atsg, HandPolicy, IdSource, recompute_children

log = logging.getLogger(__name__)


def inherit_children(atsg: Atsg) -> Atsg:
    """Propagate child-part information downstream.

    Each unit output holds its parent input's children plus the complete
    closure of the attached input, so a sub-assembly that loses the main role
    folds its main part and all of its children into the winner.
    """
    return recompute_children(atsg)


def integrate(groups: Union[Iterable[UnitGroup], Atsg]) -> Atsg:
    """Merge unit groups, in image order, into one ATSG.

    An input node that re-draws an existing sub-assembly is unified with the
    nearest earlier output of that sub-assembly (same main part instance).
    The later node's id survives and the earlier producer now emits it.
    """
    if isinstance(groups, Atsg):
        sources = [groups]
    else:
        sources = [g.graph for g in groups]
    atsg = Atsg(ids=sources[0].ids if sources else IdSource())
    if sources:
        atsg.hand_policy = sources[0].hand_policy
    for graph in sources:
        graph = copy.deepcopy(graph)
        atsg.object_nodes.update(graph.object_nodes)
        atsg.motion_nodes.update(graph.motion_nodes)
        atsg.hand_nodes.update(graph.hand_nodes)
        atsg.units.extend(graph.units)
    if sources:
        atsg.ids.next_id = max(g.ids.next_id for g in sources)
    atsg.renumber_steps()

    for pos, unit in enumerate(atsg.units):
        for node_id in unit.inputs:
            node = atsg.object_nodes[node_id]
            if node.merge_key is None:
                continue
            consumed = {i for u in atsg.units for i in u.inputs}
            candidates = [
                u for u in atsg.units[:pos]
                if atsg.object_nodes[u.output].main_child == node.merge_key
                and u.output not in consumed
            ]
            if not candidates:
                continue
            if len(candidates) > 1:
                log.warning(
                    "ambiguous merge for %s: %d open outputs, using the latest",
                    node.merge_key, len(candidates),
                )
            prior = candidates[-1]
            old = atsg.object_nodes.pop(prior.output)
            node.subordinate_children = tuple(
                sorted(set(old.subordinate_children) | set(node.subordinate_children))
            )
            for hand in atsg.hand_nodes.values():
                if hand.holds == old.id:
                    hand.holds = node.id
            prior.output = node.id
            node.merge_key = None
            if (
                atsg.hand_policy is HandPolicy.SHARED_PARENT
                and node_id == unit.parent_input
                and prior.tools[0] == unit.tools[0]
            ):
                _share_hand(atsg, keep=prior.hands[0], drop=unit.hands[0])
    return inherit_children(atsg)


def _share_hand(atsg: Atsg, keep: int, drop: int) -> None:
    if keep == drop:
        return
    for u in atsg.units:
        u.hands = [keep if h == drop else h for h in u.hands]
    del atsg.hand_nodes[drop]
