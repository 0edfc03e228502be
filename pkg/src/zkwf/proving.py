"""Pluggable proof backends for update statements.

The default backend wraps the full witness in an AEAD envelope under a
key derived from the descriptor, so any holder of the evaluation key can
re-execute the statement and check that the proof binds exactly the
public inputs it was issued for.  It trades zero-knowledge against
outsiders without the evaluation key for a dependency-free setup; the
registry lets a real proving system slot in behind the same interface.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Protocol

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import compiler, statecodec
from .compiler import Descriptor
from .statement import (
    PrivateInputs,
    PublicInputs,
    StatementRejected,
    evaluate_statement,
)

_KEY_TAG = b"zkwf.reexec.v1.key"
_NONCE_LEN = 12


class ProvingError(Exception):
    pass


class ProofRejected(Exception):
    """Raised by verify; code is a statement reason or a proof-level code."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}{': ' + detail if detail else ''}")
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class EvaluationKey:
    backend_id: str
    descriptor_blob: bytes
    secret: bytes


@dataclass(frozen=True)
class Proof:
    backend_id: str
    body: bytes


def _pack(backend_id: str, *chunks: bytes) -> bytes:
    bid = backend_id.encode()
    if len(bid) > 255:
        raise ProvingError("backend id too long")
    out = bytes([len(bid)]) + bid
    for chunk in chunks:
        out += struct.pack(">I", len(chunk)) + chunk
    return out


def _unpack(data: bytes, n_chunks: int) -> tuple[str, list[bytes]]:
    if not data:
        raise ProvingError("empty blob")
    end = 1 + data[0]
    if len(data) < end:
        raise ProvingError("truncated backend id")
    backend_id = data[1:end].decode()
    chunks = []
    pos = end
    for _ in range(n_chunks):
        if len(data) < pos + 4:
            raise ProvingError("truncated length prefix")
        (size,) = struct.unpack(">I", data[pos : pos + 4])
        pos += 4
        if len(data) < pos + size:
            raise ProvingError("truncated chunk")
        chunks.append(data[pos : pos + size])
        pos += size
    if pos != len(data):
        raise ProvingError("trailing bytes")
    return backend_id, chunks


def serialize_key(key: EvaluationKey) -> bytes:
    return _pack(key.backend_id, key.descriptor_blob, key.secret)


def deserialize_key(data: bytes) -> EvaluationKey:
    backend_id, (blob, secret) = _unpack(data, 2)
    return EvaluationKey(backend_id, blob, secret)


def serialize_proof(proof: Proof) -> bytes:
    return _pack(proof.backend_id, proof.body)


def deserialize_proof(data: bytes) -> Proof:
    backend_id, (body,) = _unpack(data, 1)
    return Proof(backend_id, body)


class ProofBackend(Protocol):
    backend_id: str

    def setup(self, descriptor: Descriptor) -> EvaluationKey: ...

    def prove(
        self, key: EvaluationKey, priv: PrivateInputs, pub: PublicInputs
    ) -> Proof: ...

    def verify(
        self,
        key: EvaluationKey,
        proof: Proof,
        h_current: bytes,
        h_new: bytes,
        new_sig: bytes,
    ) -> bytes: ...


@lru_cache(maxsize=64)
def _descriptor_from_blob(blob: bytes) -> Descriptor:
    return compiler.from_json(blob.decode())


class ReExecutionBackend:
    """Proves by disclosing the witness to evaluation-key holders."""

    backend_id = "reexec-v1"

    def __init__(self, rng: Callable[[int], bytes] = secrets.token_bytes):
        self._rng = rng

    def setup(self, descriptor: Descriptor) -> EvaluationKey:
        blob = compiler.to_canonical_json(descriptor).encode()
        secret = hashlib.sha256(_KEY_TAG + compiler.descriptor_digest(descriptor)).digest()
        return EvaluationKey(self.backend_id, blob, secret)

    def _payload_len(self, descriptor: Descriptor) -> int:
        enc = descriptor.dims.encoded_len
        return 2 * (enc + statecodec.SALT_LEN) + 32 + 32 + 32 + 64

    def prove(
        self, key: EvaluationKey, priv: PrivateInputs, pub: PublicInputs
    ) -> Proof:
        descriptor = _descriptor_from_blob(key.descriptor_blob)
        evaluate_statement(descriptor, priv, pub)  # refuse to prove a false claim
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
        if len(payload) != self._payload_len(descriptor):
            raise ProvingError("witness does not match descriptor dimensions")
        nonce = self._rng(_NONCE_LEN)
        body = nonce + AESGCM(key.secret).encrypt(nonce, payload, None)
        return Proof(self.backend_id, body)

    def verify(
        self,
        key: EvaluationKey,
        proof: Proof,
        h_current: bytes,
        h_new: bytes,
        new_sig: bytes,
    ) -> bytes:
        if proof.backend_id != self.backend_id:
            raise ProofRejected("MALFORMED_PROOF", "wrong backend")
        descriptor = _descriptor_from_blob(key.descriptor_blob)
        if len(proof.body) < _NONCE_LEN:
            raise ProofRejected("MALFORMED_PROOF", "body too short")
        try:
            payload = AESGCM(key.secret).decrypt(
                proof.body[:_NONCE_LEN], proof.body[_NONCE_LEN:], None
            )
        except InvalidTag:
            raise ProofRejected("MALFORMED_PROOF", "envelope does not authenticate")
        if len(payload) != self._payload_len(descriptor):
            raise ProofRejected("MALFORMED_PROOF", "payload has the wrong size")

        enc = descriptor.dims.encoded_len
        pos = 0

        def take(size: int) -> bytes:
            nonlocal pos
            piece = payload[pos : pos + size]
            pos += size
            return piece

        try:
            s_current = statecodec.decode_state(take(enc), descriptor.dims)
            r_current = take(statecodec.SALT_LEN)
            s_new = statecodec.decode_state(take(enc), descriptor.dims)
            r_new = take(statecodec.SALT_LEN)
        except statecodec.StateCodecError as err:
            raise ProofRejected("MALFORMED_PROOF", str(err))
        priv = PrivateInputs(s_current, r_current, s_new, r_new, take(32), take(32))
        bound_h = take(32)
        bound_sig = take(64)
        if bound_h != h_current:
            raise ProofRejected("PROOF_BINDING", "proof was issued for another h_current")
        if bound_sig != new_sig:
            raise ProofRejected("PROOF_BINDING", "proof was issued for another signature")

        try:
            result = evaluate_statement(
                descriptor, priv, PublicInputs(h_current, new_sig)
            )
        except StatementRejected as err:
            raise ProofRejected(err.reason.value, err.detail)
        if result != h_new:
            raise ProofRejected("PROOF_BINDING", "statement output differs from h_new")
        return result


class RejectAllBackend:
    """Placeholder backend; every verification fails.  Test use only."""

    backend_id = "reject-all"

    def setup(self, descriptor: Descriptor) -> EvaluationKey:
        return EvaluationKey(self.backend_id, b"", b"")

    def prove(
        self, key: EvaluationKey, priv: PrivateInputs, pub: PublicInputs
    ) -> Proof:
        return Proof(self.backend_id, b"")

    def verify(
        self,
        key: EvaluationKey,
        proof: Proof,
        h_current: bytes,
        h_new: bytes,
        new_sig: bytes,
    ) -> bytes:
        raise ProofRejected("REJECTED", "this backend rejects every proof")


_REGISTRY: dict[str, ProofBackend] = {}


def register_backend(backend: ProofBackend) -> None:
    _REGISTRY[backend.backend_id] = backend


def backend(backend_id: str) -> ProofBackend:
    try:
        return _REGISTRY[backend_id]
    except KeyError:
        raise ProvingError(f"unknown proof backend {backend_id!r}")


def default_backend() -> ProofBackend:
    return backend(ReExecutionBackend.backend_id)


register_backend(ReExecutionBackend())
register_backend(RejectAllBackend())
