import pytest

from zkwf import signing


def test_sign_verify_round_trip():
    kp = signing.keygen()
    message = b"hello ledger"
    sig = signing.sign(kp.sk, message)
    assert len(sig) == 64 and len(kp.pk) == 32
    assert signing.verify(kp.pk, message, sig)
    assert not signing.verify(kp.pk, b"other message", sig)
    assert not signing.verify(signing.keygen().pk, message, sig)


def test_signatures_are_deterministic():
    kp = signing.keygen()
    assert signing.sign(kp.sk, b"x") == signing.sign(kp.sk, b"x")


def test_rfc8032_vector():
    # RFC 8032 test 1: empty message
    sk = bytes.fromhex(
        "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"
    )
    pk = bytes.fromhex(
        "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"
    )
    expected = bytes.fromhex(
        "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
        "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"
    )
    assert signing.derive_pk(sk) == pk
    assert signing.sign(sk, b"") == expected
    assert signing.verify(pk, b"", expected)


def test_keypair_from_seed_is_stable():
    a = signing.keypair_from_seed("demo-alpha")
    b = signing.keypair_from_seed("demo-alpha")
    c = signing.keypair_from_seed("demo-beta")
    assert a == b and a != c


def test_malformed_lengths_raise():
    kp = signing.keygen()
    with pytest.raises(signing.SigningError):
        signing.sign(b"\x00" * 31, b"m")
    with pytest.raises(signing.SigningError):
        signing.verify(b"\x00" * 31, b"m", b"\x00" * 64)
    with pytest.raises(signing.SigningError):
        signing.verify(kp.pk, b"m", b"\x00" * 63)
    with pytest.raises(signing.SigningError):
        signing.derive_pk(b"\x00" * 16)


def test_key_file_round_trip_and_permissions(tmp_path):
    kp = signing.keygen()
    path = tmp_path / "alpha.key.json"
    signing.save_key_file(path, kp)
    assert signing.load_key_file(path) == kp
    assert (path.stat().st_mode & 0o777) == 0o600


def test_key_file_mismatch_detected(tmp_path):
    kp = signing.keygen()
    other = signing.keygen()
    path = tmp_path / "bad.key.json"
    path.write_text(
        '{"sk": "%s", "pk": "%s"}' % (kp.sk.hex(), other.pk.hex())
    )
    with pytest.raises(signing.SigningError):
        signing.load_key_file(path)


def test_injected_rng_gives_deterministic_keys():
    kp = signing.keygen(lambda n: b"\x07" * n)
    again = signing.keygen(lambda n: b"\x07" * n)
    assert kp == again
