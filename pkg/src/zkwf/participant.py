"""Participant engine: the piece each workflow party runs locally.

The engine holds the compiled descriptor, the party's key pair, and the
shared group key.  sync() replays and audits every new ledger record,
decrypting each ciphertext and checking that it opens the on-ledger
commitment and continues the state chain; a record that does not is
pinned on whoever signed it.  propose() turns an intended action into a
concrete next state by searching the admissible deltas, and
build_update() wraps it into the commitment, ciphertext, signature, and
proof the ledger expects.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field, replace
from typing import Callable

from . import proving, signing, statecodec, statement
from .compiler import Descriptor
from .conditions import wrap64
from .ledger import LedgerClient, LedgerRecord
from .signing import KeyPair
from .statecodec import ProcessState
from .statement import PrivateInputs, PublicInputs

GENESIS_PREFIX = bytes(32)


class ParticipantError(Exception):
    pass


class NoAdmissibleStep(ParticipantError):
    pass


class AuditError(ParticipantError):
    pass


class DecryptFailure(AuditError):
    """A record's ciphertext does not open under the group key; this is
    not attributable, the local key may simply be wrong."""

    def __init__(self, seq: int):
        super().__init__(f"record {seq} does not decrypt under the group key")
        self.seq = seq


class CongruenceViolation(AuditError):
    """A record's plaintext contradicts its public commitment or the
    state chain; the signer of that record is responsible."""

    def __init__(self, seq: int, signer_pk: str | None, detail: str):
        who = signer_pk or "an unidentifiable signer"
        super().__init__(f"record {seq} by {who}: {detail}")
        self.seq = seq
        self.signer_pk = signer_pk
        self.detail = detail


@dataclass(frozen=True)
class Complete:
    element_id: str
    var_writes: dict[str, int] = field(default_factory=dict)
    message: bytes | None = None


@dataclass(frozen=True)
class ActivateStart:
    element_id: str


@dataclass(frozen=True)
class Fake:
    pass


Action = Complete | ActivateStart | Fake


@dataclass(frozen=True)
class View:
    """Audited head of an instance: the decrypted state behind h."""

    seq: int
    state: ProcessState
    salt: bytes
    h: bytes


@dataclass(frozen=True)
class UpdateParts:
    h: bytes
    ciphertext: bytes
    sig: bytes
    proof: bytes


def message_digest(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()


def verify_received_message(
    descriptor: Descriptor, state: ProcessState, catch_id: str, payload: bytes
) -> bool:
    """True when the payload matches the slot of the catch's throw and
    the throw has actually completed."""
    try:
        catch_idx = descriptor.index_of(catch_id)
    except KeyError:
        raise ParticipantError(f"unknown element {catch_id!r}")
    for slot, (throw, catch) in enumerate(descriptor.msg_slots):
        if catch == catch_idx:
            return (
                state.v[throw] == 2
                and state.msg_hashes[slot] == message_digest(payload)
            )
    raise ParticipantError(f"{catch_id!r} is not a catch event")


class Engine:
    def __init__(
        self,
        descriptor: Descriptor,
        keypair: KeyPair,
        group_key: bytes,
        instance_id: str,
        client: LedgerClient,
        backend: proving.ProofBackend | None = None,
        rng: Callable[[int], bytes] = secrets.token_bytes,
    ):
        self.descriptor = descriptor
        self.keypair = keypair
        self.group_key = group_key
        self.instance_id = instance_id
        self.client = client
        self.backend = backend or proving.default_backend()
        self.evaluation_key = self.backend.setup(descriptor)
        self.rng = rng
        self._view: View | None = None

    def deploy(self) -> LedgerRecord:
        state = statecodec.zero_state(self.descriptor.dims)
        salt = statecodec.new_salt(self.rng)
        h = statecodec.commit(state, salt)
        ciphertext = statecodec.encrypt_state(state, salt, self.group_key, self.rng)
        sig = signing.sign(self.keypair.sk, GENESIS_PREFIX + h)
        return self.client.deploy(
            self.instance_id,
            self.backend.backend_id,
            proving.serialize_key(self.evaluation_key),
            sorted(self.descriptor.participant_keys),
            h,
            ciphertext,
            sig,
        )

    def _identify_signer(self, prev_h: bytes, record: LedgerRecord) -> str | None:
        for pk in self.descriptor.participant_keys:
            if signing.verify(bytes.fromhex(pk), prev_h + record.h, record.sig):
                return pk
        return None

    def _audit(self, prev: View | None, record: LedgerRecord) -> View:
        prev_h = GENESIS_PREFIX if prev is None else prev.h
        signer = self._identify_signer(prev_h, record)
        try:
            state, salt = statecodec.decrypt_state(
                record.ciphertext, self.group_key, self.descriptor.dims
            )
        except statecodec.DecryptError:
            raise DecryptFailure(record.seq)
        if statecodec.commit(state, salt) != record.h:
            raise CongruenceViolation(
                record.seq, signer, "ciphertext does not open the commitment"
            )
        if prev is None:
            if state != statecodec.zero_state(self.descriptor.dims):
                raise CongruenceViolation(record.seq, signer, "genesis state is not blank")
        else:
            failure = statement.transition_failure(self.descriptor, prev.state, state)
            if failure is not None:
                raise CongruenceViolation(record.seq, signer, failure)
        if signer is None:
            raise CongruenceViolation(record.seq, None, "no participant signed this record")
        return View(record.seq, state, salt, record.h)

    def sync(self) -> View:
        start = 0 if self._view is None else self._view.seq + 1
        for record in self.client.get_history(self.instance_id, start):
            self._view = self._audit(self._view, record)
        if self._view is None:
            raise ParticipantError(f"instance {self.instance_id!r} has no records")
        return self._view

    def _apply_entry(self, entry, state: ProcessState) -> ProcessState | None:
        v = list(state.v)
        for delta, idx in entry.row_set:
            if delta == -1:
                if v[idx] != 1:
                    return None
                v[idx] = 2
            else:
                if v[idx] != 0:
                    return None
                v[idx] = 1
        return replace(state, v=tuple(v))

    def propose(self, view: View, action: Action) -> ProcessState:
        state = view.state
        if isinstance(action, Fake):
            return state

        try:
            idx = self.descriptor.index_of(action.element_id)
        except KeyError:
            raise ParticipantError(f"unknown element {action.element_id!r}")
        if isinstance(action, ActivateStart):
            candidates = [
                e for e in self.descriptor.p_array if e.row_set == frozenset({(1, idx)})
            ]
            new_vars, new_msgs = state.var_values, state.msg_hashes
        else:
            candidates = [
                e for e in self.descriptor.p_array if (-1, idx) in e.row_set
            ]
            values = dict(zip(self.descriptor.var_names, state.var_values))
            for name, value in action.var_writes.items():
                if name not in values:
                    raise ParticipantError(f"unknown variable {name!r}")
                values[name] = wrap64(value)
            new_vars = tuple(values[n] for n in self.descriptor.var_names)
            msgs = list(state.msg_hashes)
            for slot, (throw, _) in enumerate(self.descriptor.msg_slots):
                if throw == idx:
                    if action.message is None:
                        raise ParticipantError(
                            f"completing {action.element_id!r} needs a message payload"
                        )
                    msgs[slot] = message_digest(action.message)
            new_msgs = tuple(msgs)

        for entry in candidates:
            candidate = self._apply_entry(entry, state)
            if candidate is None:
                continue
            candidate = replace(candidate, var_values=new_vars, msg_hashes=new_msgs)
            if statement.check_transition(self.descriptor, state, candidate):
                return candidate
        raise NoAdmissibleStep(
            f"no admissible step for {action.element_id!r} from the current state"
        )

    def auto_action(self, view: View) -> Action | None:
        """Deterministic next real move this party can make, if any."""
        mine = self.keypair.pk_hex
        owners = self.descriptor.owner_keys
        throws = dict.fromkeys(self.descriptor.throw_indices)
        for idx, element_id in enumerate(self.descriptor.elements):
            if owners[idx] != mine:
                continue
            if view.state.v[idx] == 1:
                message = f"msg:{element_id}".encode() if idx in throws else None
                action = Complete(element_id, message=message)
            elif view.state.v[idx] == 0 and self._is_start(idx):
                action = ActivateStart(element_id)
            else:
                continue
            try:
                self.propose(view, action)
            except NoAdmissibleStep:
                continue
            return action
        return None

    def _is_start(self, idx: int) -> bool:
        return any(
            entry.row_set == frozenset({(1, idx)}) for entry in self.descriptor.p_array
        )

    def build_update(self, view: View, s_new: ProcessState) -> UpdateParts:
        r_new = statecodec.new_salt(self.rng)
        h_new = statecodec.commit(s_new, r_new)
        sig = signing.sign(self.keypair.sk, view.h + h_new)
        ciphertext = statecodec.encrypt_state(s_new, r_new, self.group_key, self.rng)
        priv = PrivateInputs(
            view.state, view.salt, s_new, r_new, self.keypair.pk, self.keypair.sk
        )
        proof = self.backend.prove(
            self.evaluation_key, priv, PublicInputs(view.h, sig)
        )
        return UpdateParts(h_new, ciphertext, sig, proving.serialize_proof(proof))

    def submit(self, parts: UpdateParts) -> LedgerRecord:
        return self.client.submit_update(
            self.instance_id, parts.h, parts.ciphertext, parts.sig, parts.proof
        )

    def step(self, action: Action) -> LedgerRecord:
        view = self.sync()
        s_new = self.propose(view, action)
        return self.submit(self.build_update(view, s_new))
