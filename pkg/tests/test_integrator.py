from __future__ import annotations

import copy
import logging

from support import closure_by_walk

from atsg.builder import expand_units, SubAssembly
from atsg.core import HandPolicy, IdSource, PartInstance, canonical_form, validate
from atsg.integrator import inherit_children, integrate
from atsg.pipeline import compile_manual

SEAT = PartInstance("Seat", 1)


def test_integrated_chair_is_one_tree(chair_result):
    g = chair_result.integrated
    assert validate(g) == []
    assert len(g.final_outputs()) == 1
    assert not any(n.merge_key for n in g.object_nodes.values())


def test_integration_is_idempotent(chair_result):
    g = chair_result.integrated
    again = integrate(copy.deepcopy(g))
    assert canonical_form(again) == canonical_form(g)
    assert set(again.object_nodes) == set(g.object_nodes)


def test_inheritance_matches_path_walk(chair_result):
    g = inherit_children(copy.deepcopy(chair_result.integrated))
    for unit in g.units:
        assert g.object_nodes[unit.output].closure() == closure_by_walk(g, unit.output)


def test_two_branches_meet_in_the_last_image(chair_result):
    g = chair_result.atsg
    join = next(u for u in g.units if not g.is_leaf(u.attached_input))
    assert join.output == g.final_output
    assert join.image_index == 6
    parent = g.object_nodes[join.parent_input]
    attached = g.object_nodes[join.attached_input]
    assert parent.main_child.type_name == "Base"
    assert attached.main_child.type_name == "Seat"
    # branches hold disjoint part sets
    assert not set(parent.closure()) & set(attached.closure())


def test_redraw_merges_with_the_nearest_open_output(chair, caplog):
    ids = IdSource()
    p1 = PartInstance("Seat Plate", 1)
    first = expand_units(SEAT, [p1], 1, chair, ids)
    # image 2 redraws the seat and attaches a back rest
    second = expand_units(SubAssembly(SEAT, (p1,)), [PartInstance("Back Rest", 1)], 2, chair, ids)
    g = integrate([first, second])
    assert validate(g) == []
    assert g.units[1].parent_input == g.units[0].output
    # the later node id survives
    assert g.units[0].output == second.graph.units[0].parent_input
    assert len(g.object_nodes) == 5

    # two open outputs with the same main part: the latest is chosen, with a warning
    third = expand_units(SEAT, [PartInstance("Seat Plate", 2)], 1, chair, ids)
    redraw = expand_units(SubAssembly(SEAT), [PartInstance("Screw", 1)], 2, chair, ids)
    with caplog.at_level(logging.WARNING):
        g2 = integrate([first, third, redraw])
    assert "ambiguous merge" in caplog.text
    assert g2.units[2].parent_input == g2.units[1].output


def test_shared_parent_hand_is_shared_across_images(chair, chair_series):
    per = compile_manual(chair_series, chair, HandPolicy.PER_INPUT).atsg
    shared = compile_manual(chair_series, chair, HandPolicy.SHARED_PARENT).atsg
    assert len(per.hand_nodes) == 2 * len(per.units)
    assert len(shared.hand_nodes) < len(per.hand_nodes)
    assert canonical_form(per) == canonical_form(shared)
    assert validate(shared) == []
