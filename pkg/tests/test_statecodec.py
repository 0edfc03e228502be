import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zkwf import statecodec as sc
from sha256_oracle import sha256 as oracle_sha256


def make_rng(data: bytes):
    buf = bytearray(data)

    def rng(n: int) -> bytes:
        out = bytes(buf[:n])
        del buf[:n]
        assert len(out) == n, "fixture rng exhausted"
        return out

    return rng


def test_known_encoding():
    state = sc.ProcessState(v=(2, 1, 0), var_values=(-1,), msg_hashes=())
    assert sc.encode_state(state) == bytes([2, 1, 0]) + b"\xff" * 8


def test_zero_state_commitment_matches_independent_sha256():
    dims = sc.StateDims(3, 0, 0)
    state = sc.zero_state(dims)
    commitment = sc.commit(state, b"\x00" * 4)
    assert commitment == oracle_sha256(b"\x00" * 7)


def test_oracle_sha256_agrees_with_hashlib_on_vectors():
    import hashlib

    for raw in (b"", b"abc", b"a" * 63, b"b" * 64, b"c" * 65, bytes(range(200))):
        assert oracle_sha256(raw) == hashlib.sha256(raw).digest()


def test_commit_binds_salt_and_state():
    dims = sc.StateDims(2, 1, 0)
    state = sc.ProcessState((1, 0), (7,), ())
    base = sc.commit(state, b"\x01\x02\x03\x04")
    assert sc.commit(state, b"\x01\x02\x03\x05") != base
    assert sc.commit(sc.ProcessState((1, 1), (7,), ()), b"\x01\x02\x03\x04") != base
    with pytest.raises(sc.StateCodecError):
        sc.commit(state, b"\x01")


states = st.builds(
    sc.ProcessState,
    v=st.lists(st.sampled_from([0, 1, 2]), min_size=0, max_size=16).map(tuple),
    var_values=st.lists(
        st.integers(min_value=sc.INT64_MIN, max_value=sc.INT64_MAX), max_size=5
    ).map(tuple),
    msg_hashes=st.lists(st.binary(min_size=32, max_size=32), max_size=3).map(tuple),
)


@given(states)
def test_encode_decode_round_trip(state):
    dims = sc.StateDims(len(state.v), len(state.var_values), len(state.msg_hashes))
    assert sc.decode_state(sc.encode_state(state), dims) == state
    assert len(sc.encode_state(state)) == dims.encoded_len


@given(states, st.binary(min_size=4, max_size=4), st.binary(min_size=32, max_size=32))
@settings(max_examples=25)
def test_encrypt_decrypt_round_trip(state, salt, key):
    sealed = sc.encrypt_state(state, salt, key)
    recovered, recovered_salt = sc.decrypt_state(sealed, key, _dims_of(state))
    assert recovered == state and recovered_salt == salt


def _dims_of(state):
    return sc.StateDims(len(state.v), len(state.var_values), len(state.msg_hashes))


def test_fresh_nonce_gives_distinct_ciphertexts():
    dims = sc.StateDims(3, 1, 1)
    state = sc.zero_state(dims)
    key = b"\x11" * 32
    salt = b"\x00" * 4
    assert sc.encrypt_state(state, salt, key) != sc.encrypt_state(state, salt, key)


def test_ciphertext_length_depends_only_on_dims():
    dims = sc.StateDims(4, 2, 1)
    key = b"\x22" * 32
    a = sc.encrypt_state(
        sc.ProcessState((0, 0, 0, 0), (0, 0), (b"\x00" * 32,)), b"\x00" * 4, key
    )
    b = sc.encrypt_state(
        sc.ProcessState((2, 2, 1, 0), (sc.INT64_MIN, sc.INT64_MAX), (b"\xfe" * 32,)),
        b"\xff" * 4,
        key,
    )
    assert len(a) == len(b) == sc.NONCE_LEN + dims.encoded_len + sc.SALT_LEN + 16


def test_tampered_ciphertext_rejected():
    dims = sc.StateDims(2, 0, 0)
    key = b"\x33" * 32
    sealed = bytearray(sc.encrypt_state(sc.zero_state(dims), b"\x00" * 4, key))
    sealed[-1] ^= 0x01
    with pytest.raises(sc.DecryptError):
        sc.decrypt_state(bytes(sealed), key, dims)


def test_wrong_key_rejected():
    dims = sc.StateDims(2, 0, 0)
    sealed = sc.encrypt_state(sc.zero_state(dims), b"\x00" * 4, b"\x44" * 32)
    with pytest.raises(sc.DecryptError):
        sc.decrypt_state(sealed, b"\x55" * 32, dims)


def test_wrong_dims_rejected():
    key = b"\x66" * 32
    sealed = sc.encrypt_state(sc.zero_state(sc.StateDims(2, 0, 0)), b"\x00" * 4, key)
    with pytest.raises(sc.DecryptError):
        sc.decrypt_state(sealed, key, sc.StateDims(3, 0, 0))


def test_decode_rejects_bad_markings_and_sizes():
    dims = sc.StateDims(2, 0, 0)
    with pytest.raises(sc.StateCodecError):
        sc.decode_state(b"\x03\x00", dims)
    with pytest.raises(sc.StateCodecError):
        sc.decode_state(b"\x00", dims)
    with pytest.raises(sc.StateCodecError):
        sc.encode_state(sc.ProcessState((5,), (), ()))


def test_injectable_rng_controls_salt_and_nonce():
    rng = make_rng(b"\xab\xcd\xef\x01" + b"\x10" * 12)
    assert sc.new_salt(rng) == b"\xab\xcd\xef\x01"
    sealed = sc.encrypt_state(
        sc.zero_state(sc.StateDims(1, 0, 0)), b"\x00" * 4, b"\x77" * 32, rng
    )
    assert sealed[:12] == b"\x10" * 12
