"""Process state layout, hash commitments, and group-key encryption.

A state serializes as one byte per element marking (0 inactive, 1 active,
2 completed), eight big-endian two's-complement bytes per variable, and one
32-byte hash slot per message pair.  A commitment is SHA-256 over the
encoding with a 4-byte salt appended.  The encrypted form is AES-256-GCM
over (encoding || salt) with a fresh nonce prepended, so ciphertext length
depends only on the state dimensions.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass
from typing import Callable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

SALT_LEN = 4
HASH_LEN = 32
GROUP_KEY_LEN = 32
NONCE_LEN = 12
ZERO_HASH = b"\x00" * HASH_LEN

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1

Rng = Callable[[int], bytes]


class StateCodecError(ValueError):
    pass


class DecryptError(StateCodecError):
    pass


@dataclass(frozen=True)
class StateDims:
    n_elements: int
    n_vars: int
    n_slots: int

    @property
    def encoded_len(self) -> int:
        return self.n_elements + 8 * self.n_vars + HASH_LEN * self.n_slots


@dataclass(frozen=True)
class ProcessState:
    v: tuple[int, ...]
    var_values: tuple[int, ...]
    msg_hashes: tuple[bytes, ...]

    def replace_v(self, index: int, value: int) -> "ProcessState":
        v = list(self.v)
        v[index] = value
        return ProcessState(tuple(v), self.var_values, self.msg_hashes)


def zero_state(dims: StateDims) -> ProcessState:
    return ProcessState(
        v=(0,) * dims.n_elements,
        var_values=(0,) * dims.n_vars,
        msg_hashes=(ZERO_HASH,) * dims.n_slots,
    )


def encode_state(state: ProcessState) -> bytes:
    parts = bytearray()
    for marking in state.v:
        if marking not in (0, 1, 2):
            raise StateCodecError(f"element marking out of range: {marking}")
        parts.append(marking)
    for value in state.var_values:
        if not INT64_MIN <= value <= INT64_MAX:
            raise StateCodecError(f"variable value out of 64-bit range: {value}")
        parts += struct.pack(">q", value)
    for digest in state.msg_hashes:
        if len(digest) != HASH_LEN:
            raise StateCodecError(f"message hash must be {HASH_LEN} bytes")
        parts += digest
    return bytes(parts)


def decode_state(data: bytes, dims: StateDims) -> ProcessState:
    if len(data) != dims.encoded_len:
        raise StateCodecError(
            f"encoded state is {len(data)} bytes, expected {dims.encoded_len}"
        )
    v = tuple(data[: dims.n_elements])
    for marking in v:
        if marking not in (0, 1, 2):
            raise StateCodecError(f"element marking out of range: {marking}")
    offset = dims.n_elements
    var_values = tuple(
        struct.unpack_from(">q", data, offset + 8 * k)[0] for k in range(dims.n_vars)
    )
    offset += 8 * dims.n_vars
    msg_hashes = tuple(
        bytes(data[offset + HASH_LEN * k : offset + HASH_LEN * (k + 1)])
        for k in range(dims.n_slots)
    )
    return ProcessState(v, var_values, msg_hashes)


def new_salt(rng: Rng = secrets.token_bytes) -> bytes:
    return rng(SALT_LEN)


def commit(state: ProcessState, salt: bytes) -> bytes:
    if len(salt) != SALT_LEN:
        raise StateCodecError(f"salt must be {SALT_LEN} bytes")
    return hashlib.sha256(encode_state(state) + salt).digest()


def encrypt_state(
    state: ProcessState, salt: bytes, group_key: bytes, rng: Rng = secrets.token_bytes
) -> bytes:
    if len(group_key) != GROUP_KEY_LEN:
        raise StateCodecError(f"group key must be {GROUP_KEY_LEN} bytes")
    if len(salt) != SALT_LEN:
        raise StateCodecError(f"salt must be {SALT_LEN} bytes")
    nonce = rng(NONCE_LEN)
    sealed = AESGCM(group_key).encrypt(nonce, encode_state(state) + salt, None)
    return nonce + sealed


def decrypt_state(
    data: bytes, group_key: bytes, dims: StateDims
) -> tuple[ProcessState, bytes]:
    if len(group_key) != GROUP_KEY_LEN:
        raise StateCodecError(f"group key must be {GROUP_KEY_LEN} bytes")
    if len(data) < NONCE_LEN + 16:
        raise DecryptError("ciphertext too short")
    try:
        plain = AESGCM(group_key).decrypt(data[:NONCE_LEN], data[NONCE_LEN:], None)
    except InvalidTag:
        raise DecryptError("ciphertext failed authentication") from None
    if len(plain) != dims.encoded_len + SALT_LEN:
        raise DecryptError("decrypted payload has the wrong size")
    return decode_state(plain[:-SALT_LEN], dims), plain[-SALT_LEN:]


def new_group_key(rng: Rng = secrets.token_bytes) -> bytes:
    return rng(GROUP_KEY_LEN)
