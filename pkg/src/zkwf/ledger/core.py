"""Simulated append-only ledger.

Each instance is an ordered list of records starting with a deploy.  A
record carries only the public triple (commitment, ciphertext,
signature) plus the update proof; the ledger never learns who submitted
it.  Updates are verified and appended under a per-instance lock, so of
several submissions racing on the same head exactly one wins.  With a
storage directory the ledger appends one JSON line per record and can
be reopened from disk.
"""

from __future__ import annotations

import json
import queue
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .. import proving, signing

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_GENESIS_PREFIX = bytes(32)


class LedgerError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    timestamp: float
    kind: str  # "deploy" or "update"
    h: bytes
    ciphertext: bytes
    sig: bytes
    proof: bytes | None = None

    def to_jsonable(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "h": self.h.hex(),
            "ciphertext": self.ciphertext.hex(),
            "sig": self.sig.hex(),
            "proof": self.proof.hex() if self.proof is not None else None,
        }

    @staticmethod
    def from_jsonable(data: dict) -> "LedgerRecord":
        return LedgerRecord(
            seq=data["seq"],
            timestamp=data["timestamp"],
            kind=data["kind"],
            h=bytes.fromhex(data["h"]),
            ciphertext=bytes.fromhex(data["ciphertext"]),
            sig=bytes.fromhex(data["sig"]),
            proof=bytes.fromhex(data["proof"]) if data["proof"] is not None else None,
        )


@dataclass(frozen=True)
class InstanceMeta:
    instance_id: str
    backend_id: str
    evaluation_key: bytes
    participant_keys: tuple[str, ...]


class _Instance:
    def __init__(self, meta: InstanceMeta, path: Path | None):
        self.meta = meta
        self.path = path
        self.records: list[LedgerRecord] = []
        self.lock = threading.Lock()
        self.subscribers: list[queue.SimpleQueue] = []


class Ledger:
    def __init__(self, root: Path | str | None = None, clock: Callable[[], float] = time.time):
        self._root = Path(root) if root is not None else None
        self._clock = clock
        self._instances: dict[str, _Instance] = {}
        self._create_lock = threading.Lock()
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)
            for path in sorted(self._root.glob("*.jsonl")):
                self._load(path)

    def _load(self, path: Path) -> None:
        with path.open() as fh:
            head = json.loads(fh.readline())
            meta = InstanceMeta(
                instance_id=head["instanceId"],
                backend_id=head["backendId"],
                evaluation_key=bytes.fromhex(head["evaluationKey"]),
                participant_keys=tuple(head["participantKeys"]),
            )
            inst = _Instance(meta, path)
            for line in fh:
                inst.records.append(LedgerRecord.from_jsonable(json.loads(line)))
        self._instances[meta.instance_id] = inst

    def _get(self, instance_id: str) -> _Instance:
        try:
            return self._instances[instance_id]
        except KeyError:
            raise LedgerError("NOT_FOUND", f"no instance {instance_id!r}")

    def _append(self, inst: _Instance, record: LedgerRecord, head: str | None = None) -> None:
        if inst.path is not None:
            with inst.path.open("a") as fh:
                if head is not None:
                    fh.write(head + "\n")
                fh.write(json.dumps(record.to_jsonable()) + "\n")
        inst.records.append(record)
        for sub in inst.subscribers:
            sub.put(record)

    def instance_ids(self) -> list[str]:
        return sorted(self._instances)

    def meta(self, instance_id: str) -> InstanceMeta:
        return self._get(instance_id).meta

    def deploy(
        self,
        instance_id: str,
        backend_id: str,
        evaluation_key: bytes,
        participant_keys: list[str],
        h: bytes,
        ciphertext: bytes,
        sig: bytes,
    ) -> LedgerRecord:
        if not _ID_RE.match(instance_id):
            raise LedgerError("BAD_INSTANCE_ID", "use 1-64 chars of [A-Za-z0-9_-]")
        try:
            proving.backend(backend_id)
        except proving.ProvingError as err:
            raise LedgerError("UNKNOWN_BACKEND", str(err))
        if not participant_keys:
            raise LedgerError("BAD_GENESIS", "participant key list is empty")
        if not any(
            signing.verify(bytes.fromhex(pk), _GENESIS_PREFIX + h, sig)
            for pk in participant_keys
        ):
            raise LedgerError("BAD_GENESIS_SIG", "no participant signed the genesis")
        with self._create_lock:
            if instance_id in self._instances:
                raise LedgerError("EXISTS", f"instance {instance_id!r} already deployed")
            meta = InstanceMeta(instance_id, backend_id, evaluation_key, tuple(participant_keys))
            path = self._root / f"{instance_id}.jsonl" if self._root is not None else None
            inst = _Instance(meta, path)
            record = LedgerRecord(0, self._clock(), "deploy", h, ciphertext, sig)
            head = json.dumps(
                {
                    "instanceId": instance_id,
                    "backendId": backend_id,
                    "evaluationKey": evaluation_key.hex(),
                    "participantKeys": list(participant_keys),
                }
            )
            self._append(inst, record, head=head)
            self._instances[instance_id] = inst
        return record

    def submit_update(
        self, instance_id: str, h: bytes, ciphertext: bytes, sig: bytes, proof: bytes
    ) -> LedgerRecord:
        inst = self._get(instance_id)
        backend = proving.backend(inst.meta.backend_id)
        key = proving.deserialize_key(inst.meta.evaluation_key)
        with inst.lock:
            current = inst.records[-1]
            try:
                parsed = proving.deserialize_proof(proof)
                backend.verify(key, parsed, current.h, h, sig)
            except proving.ProvingError as err:
                raise LedgerError("MALFORMED_PROOF", str(err))
            except proving.ProofRejected as err:
                raise LedgerError(err.code, err.detail or str(err))
            record = LedgerRecord(
                current.seq + 1, self._clock(), "update", h, ciphertext, sig, proof
            )
            self._append(inst, record)
        return record

    def get_state(self, instance_id: str) -> LedgerRecord:
        inst = self._get(instance_id)
        with inst.lock:
            return inst.records[-1]

    def get_history(self, instance_id: str, start: int = 0) -> list[LedgerRecord]:
        inst = self._get(instance_id)
        with inst.lock:
            return inst.records[start:]

    def subscribe(self, instance_id: str, start: int = 0) -> "Subscription":
        inst = self._get(instance_id)
        sub: queue.SimpleQueue = queue.SimpleQueue()
        with inst.lock:
            backlog = inst.records[start:]
            inst.subscribers.append(sub)
        for record in backlog:
            sub.put(record)
        return Subscription(self, instance_id, sub)

    def _unsubscribe(self, instance_id: str, sub: queue.SimpleQueue) -> None:
        inst = self._get(instance_id)
        with inst.lock:
            if sub in inst.subscribers:
                inst.subscribers.remove(sub)


class Subscription:
    """Queue of records from a start point onward; close() detaches it."""

    def __init__(self, ledger: Ledger, instance_id: str, q: queue.SimpleQueue):
        self._ledger = ledger
        self._instance_id = instance_id
        self._queue = q

    def get(self, timeout: float | None = None) -> LedgerRecord | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def __iter__(self) -> Iterator[LedgerRecord]:
        while True:
            record = self.get()
            if record is None:
                return
            yield record

    def close(self) -> None:
        self._ledger._unsubscribe(self._instance_id, self._queue)
