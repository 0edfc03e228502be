"""Ed25519 keys and signatures for participant identity.

Raw 32-byte keys, 64-byte deterministic signatures.  Key files are JSON
with hex fields and are written owner-read-only.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

KEY_LEN = 32
SIG_LEN = 64

Rng = Callable[[int], bytes]


class SigningError(ValueError):
    pass


@dataclass(frozen=True)
class KeyPair:
    sk: bytes
    pk: bytes

    @property
    def pk_hex(self) -> str:
        return self.pk.hex()


def keygen(rng: Rng = secrets.token_bytes) -> KeyPair:
    sk = rng(KEY_LEN)
    return KeyPair(sk, derive_pk(sk))


def keypair_from_seed(seed: str) -> KeyPair:
    """Deterministic key for demo scripts; never use for real deployments."""
    sk = hashlib.sha256(seed.encode()).digest()
    return KeyPair(sk, derive_pk(sk))


def derive_pk(sk: bytes) -> bytes:
    if len(sk) != KEY_LEN:
        raise SigningError(f"secret key must be {KEY_LEN} bytes")
    private = Ed25519PrivateKey.from_private_bytes(sk)
    return private.public_key().public_bytes_raw()


def sign(sk: bytes, message: bytes) -> bytes:
    if len(sk) != KEY_LEN:
        raise SigningError(f"secret key must be {KEY_LEN} bytes")
    return Ed25519PrivateKey.from_private_bytes(sk).sign(message)


def verify(pk: bytes, message: bytes, signature: bytes) -> bool:
    if len(pk) != KEY_LEN:
        raise SigningError(f"public key must be {KEY_LEN} bytes")
    if len(signature) != SIG_LEN:
        raise SigningError(f"signature must be {SIG_LEN} bytes")
    try:
        Ed25519PublicKey.from_public_bytes(pk).verify(signature, message)
        return True
    except InvalidSignature:
        return False


def save_key_file(path: str | Path, keypair: KeyPair) -> None:
    path = Path(path)
    payload = json.dumps({"sk": keypair.sk.hex(), "pk": keypair.pk.hex()}, indent=2)
    path.write_text(payload + "\n")
    os.chmod(path, 0o600)


def load_key_file(path: str | Path) -> KeyPair:
    data = json.loads(Path(path).read_text())
    try:
        sk = bytes.fromhex(data["sk"])
        pk = bytes.fromhex(data["pk"])
    except (KeyError, ValueError) as exc:
        raise SigningError(f"malformed key file {path}: {exc}") from None
    if derive_pk(sk) != pk:
        raise SigningError(f"key file {path} has mismatched keys")
    return KeyPair(sk, pk)
