import random

import pytest

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from zkwf import compiler, model as m, proving, statecodec
from zkwf.proving import ProofRejected, ProvingError
from zkwf.signing import keypair_from_seed, sign
from zkwf.statecodec import commit, new_salt, zero_state
from zkwf.statement import PrivateInputs, PublicInputs, StatementRejected

from test_model import diamond_xml


@pytest.fixture
def setup():
    kp = keypair_from_seed("alice")
    desc = compiler.build_descriptor(m.parse_bpmn(diamond_xml(key=kp.pk_hex)))
    backend = proving.default_backend()
    return kp, desc, backend, backend.setup(desc)


def step_inputs(desc, kp, s_cur, s_new, seed=1):
    rng = random.Random(seed).randbytes
    r_cur, r_new = new_salt(rng), new_salt(rng)
    h_cur, h_new = commit(s_cur, r_cur), commit(s_new, r_new)
    sig = sign(kp.sk, h_cur + h_new)
    priv = PrivateInputs(s_cur, r_cur, s_new, r_new, kp.pk, kp.sk)
    return priv, PublicInputs(h_cur, sig), h_new


def test_setup_is_deterministic(setup):
    kp, desc, backend, key = setup
    again = backend.setup(desc)
    assert again == key
    other = compiler.build_descriptor(
        m.parse_bpmn(diamond_xml(key=keypair_from_seed("bob").pk_hex))
    )
    assert backend.setup(other).secret != key.secret


def test_prove_verify_round_trip(setup):
    kp, desc, backend, key = setup
    s_cur = zero_state(desc.dims)
    s_new = s_cur.replace_v(0, 1)
    priv, pub, h_new = step_inputs(desc, kp, s_cur, s_new)
    proof = backend.prove(key, priv, pub)
    assert backend.verify(key, proof, pub.h_current, h_new, pub.new_sig) == h_new


def test_prove_refuses_a_false_claim(setup):
    kp, desc, backend, key = setup
    s_cur = zero_state(desc.dims)
    hop = s_cur.replace_v(4, 1)
    priv, pub, _ = step_inputs(desc, kp, s_cur, hop)
    with pytest.raises(StatementRejected):
        backend.prove(key, priv, pub)


def test_verify_rejects_tampering_and_rebinding(setup):
    kp, desc, backend, key = setup
    s_cur = zero_state(desc.dims)
    s_new = s_cur.replace_v(0, 1)
    priv, pub, h_new = step_inputs(desc, kp, s_cur, s_new)
    proof = backend.prove(key, priv, pub)

    bent = proving.Proof(proof.backend_id, proof.body[:-1] + bytes([proof.body[-1] ^ 1]))
    with pytest.raises(ProofRejected) as err:
        backend.verify(key, bent, pub.h_current, h_new, pub.new_sig)
    assert err.value.code == "MALFORMED_PROOF"

    with pytest.raises(ProofRejected) as err:
        backend.verify(key, proof, bytes(32), h_new, pub.new_sig)
    assert err.value.code == "PROOF_BINDING"

    with pytest.raises(ProofRejected) as err:
        backend.verify(key, proof, pub.h_current, bytes(32), pub.new_sig)
    assert err.value.code == "PROOF_BINDING"

    with pytest.raises(ProofRejected) as err:
        backend.verify(key, proof, pub.h_current, h_new, bytes(64))
    assert err.value.code == "PROOF_BINDING"


def test_forged_envelope_fails_re_execution(setup):
    # a key holder wraps an inadmissible witness in a valid envelope
    kp, desc, backend, key = setup
    s_cur = zero_state(desc.dims)
    hop = s_cur.replace_v(4, 1)
    priv, pub, h_new = step_inputs(desc, kp, s_cur, hop)
    payload = (
        statecodec.encode_state(priv.s_current)
        + priv.r_current
        + statecodec.encode_state(priv.s_new)
        + priv.r_new
        + priv.pk
        + priv.sk
        + pub.h_current
        + pub.new_sig
    )
    nonce = bytes(12)
    forged = proving.Proof(
        backend.backend_id, nonce + AESGCM(key.secret).encrypt(nonce, payload, None)
    )
    with pytest.raises(ProofRejected) as err:
        backend.verify(key, forged, pub.h_current, h_new, pub.new_sig)
    assert err.value.code == "BAD_TRANSITION"


def test_proof_length_depends_only_on_the_model(setup):
    kp, desc, backend, key = setup
    s0 = zero_state(desc.dims)
    s1 = s0.replace_v(0, 1)
    s2 = s1.replace_v(0, 2).replace_v(1, 1)
    sizes = set()
    for cur, new in [(s0, s1), (s1, s2), (s1, s1)]:
        priv, pub, _ = step_inputs(desc, kp, cur, new)
        sizes.add(len(proving.serialize_proof(backend.prove(key, priv, pub))))
    assert len(sizes) == 1


def test_serialization_round_trips(setup):
    kp, desc, backend, key = setup
    data = proving.serialize_key(key)
    assert proving.deserialize_key(data) == key
    s_cur = zero_state(desc.dims)
    priv, pub, _ = step_inputs(desc, kp, s_cur, s_cur.replace_v(0, 1))
    proof = backend.prove(key, priv, pub)
    assert proving.deserialize_proof(proving.serialize_proof(proof)) == proof
    with pytest.raises(ProvingError):
        proving.deserialize_proof(data[: len(data) // 2])
    with pytest.raises(ProvingError):
        proving.deserialize_proof(b"")


def test_registry_and_reject_all(setup):
    kp, desc, backend, key = setup
    assert proving.backend("reexec-v1") is backend
    with pytest.raises(ProvingError):
        proving.backend("no-such-backend")
    dummy = proving.backend("reject-all")
    dummy_key = dummy.setup(desc)
    s_cur = zero_state(desc.dims)
    priv, pub, h_new = step_inputs(desc, kp, s_cur, s_cur.replace_v(0, 1))
    proof = dummy.prove(dummy_key, priv, pub)
    with pytest.raises(ProofRejected) as err:
        dummy.verify(dummy_key, proof, pub.h_current, h_new, pub.new_sig)
    assert err.value.code == "REJECTED"
