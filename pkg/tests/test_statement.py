from itertools import product

import pytest

from zkwf import compiler, model as m, statecodec, statement
from zkwf.signing import keypair_from_seed, sign
from zkwf.statecodec import ProcessState, ZERO_HASH, new_salt, commit, zero_state
from zkwf.statement import (
    DiffRows,
    FakeUpdate,
    InvalidDiff,
    PrivateInputs,
    PublicInputs,
    Reason,
    StatementRejected,
)
from zkwf.tokengame import TokenGame

from bpmnbuild import bpmn_xml
from test_model import KEY_A, KEY_B, diamond_xml
from test_compiler import exclusive_xml


def message_xml():
    return bpmn_xml(
        [
            {
                "id": "pa",
                "key": KEY_A,
                "nodes": [
                    ("startEvent", "s1", {}),
                    ("throw", "t1", {}),
                    ("endEvent", "e1", {}),
                ],
                "flows": [("fa1", "s1", "t1"), ("fa2", "t1", "e1")],
            },
            {
                "id": "pb",
                "key": KEY_B,
                "nodes": [
                    ("startEvent", "s2", {}),
                    ("catch", "c1", {}),
                    ("endEvent", "e2", {}),
                ],
                "flows": [("fb1", "s2", "c1"), ("fb2", "c1", "e2")],
            },
        ],
        message_flows=[("mf1", "t1", "c1")],
    )


def descriptor_for(xml):
    return compiler.build_descriptor(m.parse_bpmn(xml))


def marking_state(v, var_values=(), msg_hashes=()):
    return ProcessState(tuple(v), tuple(var_values), tuple(msg_hashes))


def test_diff_matrix_frozen_examples():
    assert statement.diff_matrix((1, 0, 0), (2, 1, 1)) == DiffRows(
        ((-1, 0), (1, 1), (1, 2))
    )
    assert statement.diff_matrix((1, 2, 0), (1, 2, 0)) == FakeUpdate()
    assert isinstance(statement.diff_matrix((2,), (1,)), InvalidDiff)
    assert isinstance(statement.diff_matrix((2,), (0,)), InvalidDiff)
    assert isinstance(statement.diff_matrix((1,), (0,)), InvalidDiff)
    assert isinstance(
        statement.diff_matrix((0, 0, 0, 0), (1, 1, 1, 1)), InvalidDiff
    )
    assert statement.diff_matrix((0,), (2,)) == DiffRows(((1, 0),))


def test_diff_matrix_rejects_length_mismatch():
    with pytest.raises(ValueError):
        statement.diff_matrix((0, 0), (0,))


def test_join_must_not_fire_early_and_must_fire_once_ready():
    desc = descriptor_for(diamond_xml())  # T = s,a,b,c,d,e
    # b completes while c is still running: activating d is premature
    cur = marking_state((2, 2, 1, 1, 0, 0))
    assert statement.check_transition(desc, cur, marking_state((2, 2, 2, 1, 0, 0)))
    assert not statement.check_transition(desc, cur, marking_state((2, 2, 2, 1, 1, 0)))
    # c completes after b: the join has to open now
    cur = marking_state((2, 2, 2, 1, 0, 0))
    assert statement.check_transition(desc, cur, marking_state((2, 2, 2, 2, 1, 0)))
    assert not statement.check_transition(desc, cur, marking_state((2, 2, 2, 2, 0, 0)))


def test_check_transition_matches_oracle_on_diamond():
    xml = diamond_xml()
    desc = descriptor_for(xml)
    game = TokenGame(m.parse_bpmn(xml), {})
    for v in game.reachable():
        succ = game.successors(v)
        cur = marking_state(v)
        for cand in product((0, 1, 2), repeat=len(v)):
            accepted = statement.check_transition(desc, cur, marking_state(cand))
            assert accepted == (cand == v or cand in succ), (v, cand)


def test_variable_writes_need_a_completing_writer():
    desc = descriptor_for(exclusive_xml())  # T = s,a,b,c,e; a writes x
    cur = marking_state((2, 1, 0, 0, 0), (0,))
    low = marking_state((2, 2, 0, 1, 0), (5,))
    assert statement.check_transition(desc, cur, low)
    wrong_branch = marking_state((2, 2, 1, 0, 0), (5,))
    assert not statement.check_transition(desc, cur, wrong_branch)
    high = marking_state((2, 2, 1, 0, 0), (20,))
    assert statement.check_transition(desc, cur, high)
    # b does not write x
    stray = marking_state((2, 2, 2, 0, 1), (21,))
    assert not statement.check_transition(desc, high, stray)
    # a fake update must leave variables alone
    assert not statement.check_transition(
        desc, high, marking_state((2, 2, 1, 0, 0), (21,))
    )
    assert statement.check_transition(desc, high, high)


def test_message_slot_rules():
    desc = descriptor_for(message_xml())  # T = s1,t1,e1,s2,c1,e2; slot (1,4)
    payload = statecodec.ZERO_HASH[:-1] + b"\x01"
    cur = marking_state((2, 1, 0, 2, 1, 0), msg_hashes=(ZERO_HASH,))
    sent = marking_state((2, 2, 1, 2, 1, 0), msg_hashes=(payload,))
    # the throw may not complete while its slot is still empty
    assert not statement.check_transition(
        desc, cur, marking_state((2, 2, 1, 2, 1, 0), msg_hashes=(ZERO_HASH,))
    )
    assert statement.check_transition(desc, cur, sent)
    # the catch may not complete before the throw has
    assert not statement.check_transition(
        desc, cur, marking_state((2, 1, 0, 2, 2, 1), msg_hashes=(ZERO_HASH,))
    )
    received = marking_state((2, 2, 1, 2, 2, 1), msg_hashes=(payload,))
    assert statement.check_transition(desc, sent, received)
    # nothing but the throw's completion may touch the slot
    swapped = statecodec.ZERO_HASH[:-1] + b"\x02"
    assert not statement.check_transition(
        desc, sent, marking_state((2, 2, 1, 2, 2, 1), msg_hashes=(swapped,))
    )


def test_check_authorization():
    desc = descriptor_for(message_xml())
    pk_a = bytes.fromhex(KEY_A)
    pk_b = bytes.fromhex(KEY_B)
    outsider = bytes(32)
    fake = FakeUpdate()
    assert statement.check_authorization(desc, fake, pk_a)
    assert statement.check_authorization(desc, fake, pk_b)
    assert not statement.check_authorization(desc, fake, outsider)
    complete_t1 = DiffRows(((-1, 1), (1, 2)))
    assert statement.check_authorization(desc, complete_t1, pk_a)
    assert not statement.check_authorization(desc, complete_t1, pk_b)
    activate_s2 = DiffRows(((1, 3),))
    assert statement.check_authorization(desc, activate_s2, pk_b)
    assert not statement.check_authorization(desc, activate_s2, pk_a)
    assert not statement.check_authorization(desc, InvalidDiff("x"), pk_a)


def signed_inputs(desc, kp, s_cur, s_new, rng=None):
    import random

    rng = rng or random.Random(7).randbytes
    r_cur, r_new = new_salt(rng), new_salt(rng)
    h_cur = commit(s_cur, r_cur)
    h_new = commit(s_new, r_new)
    sig = sign(kp.sk, h_cur + h_new)
    priv = PrivateInputs(s_cur, r_cur, s_new, r_new, kp.pk, kp.sk)
    return priv, PublicInputs(h_cur, sig), h_new


def test_evaluate_statement_accepts_valid_start():
    kp = keypair_from_seed("alice")
    desc = descriptor_for(diamond_xml(key=kp.pk_hex))
    s_cur = zero_state(desc.dims)
    s_new = s_cur.replace_v(0, 1)
    priv, pub, h_new = signed_inputs(desc, kp, s_cur, s_new)
    assert statement.evaluate_statement(desc, priv, pub) == h_new


def test_evaluate_statement_fake_update_changes_commitment():
    kp = keypair_from_seed("alice")
    desc = descriptor_for(diamond_xml(key=kp.pk_hex))
    state = zero_state(desc.dims).replace_v(0, 1)
    priv, pub, h_new = signed_inputs(desc, kp, state, state)
    assert statement.evaluate_statement(desc, priv, pub) == h_new
    assert h_new != pub.h_current


def reason_of(desc, priv, pub):
    with pytest.raises(StatementRejected) as err:
        statement.evaluate_statement(desc, priv, pub)
    return err.value.reason


def test_evaluate_statement_reason_precedence():
    kp = keypair_from_seed("alice")
    mallory = keypair_from_seed("mallory")
    desc = descriptor_for(diamond_xml(key=kp.pk_hex))
    s_cur = zero_state(desc.dims)
    s_new = s_cur.replace_v(0, 1)

    # a wrong opening masks everything else
    priv, pub, _ = signed_inputs(desc, kp, s_cur, s_new)
    bad_open = PrivateInputs(s_cur, b"\x00\x00\x00\x00", s_new, priv.r_new, kp.pk, kp.sk)
    assert reason_of(desc, bad_open, pub) == Reason.HASH_MISMATCH

    # an inadmissible delta is reported before any key checks
    hop = s_cur.replace_v(4, 1)
    priv, pub, _ = signed_inputs(desc, mallory, s_cur, hop)
    assert reason_of(desc, priv, pub) == Reason.BAD_TRANSITION

    # an impersonator with a consistent key pair fails authorization
    priv, pub, _ = signed_inputs(desc, mallory, s_cur, s_new)
    assert reason_of(desc, priv, pub) == Reason.BAD_AUTH

    # a claimed key the secret key cannot produce fails the same way
    priv, pub, _ = signed_inputs(desc, kp, s_cur, s_new)
    mixed = PrivateInputs(s_cur, priv.r_current, s_new, priv.r_new, kp.pk, mallory.sk)
    assert reason_of(desc, mixed, pub) == Reason.BAD_AUTH

    # everything checks out except the signature bytes
    priv, pub, _ = signed_inputs(desc, kp, s_cur, s_new)
    garbled = PublicInputs(pub.h_current, bytes(64))
    assert reason_of(desc, priv, garbled) == Reason.BAD_SIG
