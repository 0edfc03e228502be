import pytest

from zkwf import compiler, model as m
from zkwf.conditions import compile_condition
from bpmnbuild import bpmn_xml, linear_pool

from test_model import KEY_A, KEY_B, diamond_xml

PAD = (0, -1)


def rowset(entry):
    return entry.row_set


def all_rowsets(descriptor):
    return {e.row_set for e in descriptor.p_array}


def test_diamond_delta_table_matches_hand_enumeration():
    descriptor = compiler.build_descriptor(m.parse_bpmn(diamond_xml()))
    assert descriptor.elements == ("s", "a", "b", "c", "d", "e")
    expected = [
        {(1, 0)},
        {(-1, 0), (1, 1)},
        {(-1, 1), (1, 2), (1, 3)},
        {(-1, 2)},
        {(-1, 2), (1, 4)},
        {(-1, 3)},
        {(-1, 3), (1, 4)},
        {(-1, 4), (1, 5)},
        {(-1, 5)},
    ]
    assert [set(e.row_set) for e in descriptor.p_array] == expected
    assert len(descriptor.p_array) == 9

    by_rows = {e.row_set: e for e in descriptor.p_array}
    join_meta = ((4, (2, 3)),)
    assert by_rows[frozenset({(-1, 2)})].joins == join_meta
    assert by_rows[frozenset({(-1, 2), (1, 4)})].joins == join_meta
    assert by_rows[frozenset({(-1, 0), (1, 1)})].joins == ()
    assert descriptor.all_joins == join_meta


def test_minimal_linear_chain_has_four_entries():
    descriptor = compiler.build_descriptor(
        m.parse_bpmn(bpmn_xml([linear_pool("p", KEY_A, ["t"])]))
    )
    assert [set(e.row_set) for e in descriptor.p_array] == [
        {(1, 0)},
        {(-1, 0), (1, 1)},
        {(-1, 1), (1, 2)},
        {(-1, 2)},
    ]


def exclusive_xml():
    return bpmn_xml(
        [
            {
                "id": "proc",
                "key": KEY_A,
                "nodes": [
                    ("startEvent", "s", {}),
                    ("task", "a", {"variables": "x"}),
                    ("exclusiveGateway", "g", {}),
                    ("task", "b", {}),
                    ("task", "c", {}),
                    ("exclusiveGateway", "merge", {}),
                    ("endEvent", "e", {}),
                ],
                "flows": [
                    ("f1", "s", "a"),
                    ("f2", "a", "g"),
                    ("f3", "g", "b", "x > 10"),
                    ("f4", "g", "c"),
                    ("f5", "b", "merge"),
                    ("f6", "c", "merge"),
                    ("f7", "merge", "e"),
                ],
            }
        ]
    )


def test_exclusive_branches_are_guarded():
    descriptor = compiler.build_descriptor(m.parse_bpmn(exclusive_xml()))
    # T = s,a,b,c,e
    entries = [e for e in descriptor.p_array if (-1, 1) in e.row_set]
    assert len(entries) == 2
    taken = {frozenset(e.row_set): e.guard for e in entries}
    guard_b = taken[frozenset({(-1, 1), (1, 2)})]
    guard_c = taken[frozenset({(-1, 1), (1, 3)})]
    assert guard_b == compile_condition("x > 10", frozenset({"x"}))
    from zkwf.conditions import eval_condition

    assert eval_condition(guard_b, {"x": 11}) and not eval_condition(guard_b, {"x": 10})
    assert eval_condition(guard_c, {"x": 10}) and not eval_condition(guard_c, {"x": 11})
    # merge passes through without guards
    assert {(-1, 2), (1, 4)} in [set(e.row_set) for e in descriptor.p_array]


def test_descriptor_is_deterministic():
    one = compiler.build_descriptor(m.parse_bpmn(diamond_xml()))
    two = compiler.build_descriptor(m.parse_bpmn(diamond_xml()))
    assert compiler.to_canonical_json(one) == compiler.to_canonical_json(two)
    assert compiler.descriptor_digest(one) == compiler.descriptor_digest(two)


def test_descriptor_json_round_trip():
    descriptor = compiler.build_descriptor(m.parse_bpmn(exclusive_xml()))
    text = compiler.to_canonical_json(descriptor)
    again = compiler.from_json(text)
    assert again == descriptor
    assert compiler.to_canonical_json(again) == text


def test_invalid_model_rejected():
    xml = bpmn_xml(
        [
            {
                "id": "proc",
                "key": KEY_A,
                "nodes": [
                    ("startEvent", "s", {}),
                    ("task", "a", {}),
                    ("endEvent", "e", {}),
                ],
                "flows": [("f1", "s", "a"), ("f2", "a", "a"), ("f3", "a", "e")],
            }
        ]
    )
    with pytest.raises(compiler.CompileError):
        compiler.build_descriptor(m.parse_bpmn(xml))


def test_adjacent_splits_rejected():
    # split directly into split would activate three elements in one step
    xml = bpmn_xml(
        [
            {
                "id": "proc",
                "key": KEY_A,
                "nodes": [
                    ("startEvent", "s", {}),
                    ("parallelGateway", "g1", {}),
                    ("parallelGateway", "g2", {}),
                    ("task", "a", {}),
                    ("task", "b", {}),
                    ("task", "c", {}),
                    ("parallelGateway", "j1", {}),
                    ("parallelGateway", "j2", {}),
                    ("endEvent", "e", {}),
                ],
                "flows": [
                    ("f1", "s", "g1"),
                    ("f2", "g1", "g2"),
                    ("f3", "g1", "a"),
                    ("f4", "g2", "b"),
                    ("f5", "g2", "c"),
                    ("f6", "b", "j1"),
                    ("f7", "c", "j1"),
                    ("f8", "j1", "j2"),
                    ("f9", "a", "j2"),
                    ("f10", "j2", "e"),
                ],
            }
        ]
    )
    with pytest.raises(compiler.CompileError):
        compiler.build_descriptor(m.parse_bpmn(xml))


def test_message_slots_and_writers():
    xml = bpmn_xml(
        [
            {
                "id": "p1",
                "key": KEY_A,
                "nodes": [
                    ("startEvent", "s1", {}),
                    ("task", "t1", {"variables": "amount"}),
                    ("throw", "m1", {}),
                    ("endEvent", "e1", {}),
                ],
                "flows": [("f1", "s1", "t1"), ("f2", "t1", "m1"), ("f3", "m1", "e1")],
            },
            {
                "id": "p2",
                "key": KEY_B,
                "nodes": [
                    ("startEvent", "s2", {}),
                    ("catch", "c1", {}),
                    ("endEvent", "e2", {}),
                ],
                "flows": [("f4", "s2", "c1"), ("f5", "c1", "e2")],
            },
        ],
        message_flows=[("mf1", "m1", "c1")],
    )
    descriptor = compiler.build_descriptor(m.parse_bpmn(xml))
    assert descriptor.elements == ("s1", "t1", "m1", "e1", "s2", "c1", "e2")
    assert descriptor.msg_slots == ((2, 5),)
    assert descriptor.var_writers == {"amount": (1,)}
    assert descriptor.owner_keys == (KEY_A,) * 4 + (KEY_B,) * 3
    assert descriptor.participant_keys == frozenset({KEY_A, KEY_B})
    assert descriptor.dims.encoded_len == 7 + 8 + 32
