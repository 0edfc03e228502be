"""Ring schedule and traffic observation.

The timing side channel is closed by a fixed rotation: in epoch i only
participant i mod n submits, sending a real step when it has one and a
cover (fake) step otherwise.  Ciphertext and proof sizes depend only on
the model, so an observer of the ledger sees one identically-sized
transaction per epoch no matter what the workflow is doing.  The
observer helpers below compute exactly what such a watcher could see.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from statistics import pvariance

from .ledger import LedgerRecord
from .participant import Action, Engine, Fake


class VirtualClock:
    """Manual clock for deterministic runs; call it like time.time."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def __call__(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("the clock only moves forward")
        self._now += dt


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    participant: int
    real: bool
    seq: int


@dataclass
class RingResult:
    epochs: int = 0
    real_steps: int = 0
    fake_steps: int = 0
    completed: bool = False
    log: list[EpochLog] = field(default_factory=list)


def _workflow_done(engine: Engine) -> bool:
    view = engine.sync()
    return all(view.state.v[i] == 2 for i in engine.descriptor.terminal_indices)


def run_ring(
    engines: list[Engine],
    clock: VirtualClock,
    quantum: float = 1.0,
    tail_epochs: int = 3,
    max_epochs: int = 1000,
) -> RingResult:
    """Drive the instance with one submission per epoch until the
    workflow finishes, then keep covering for tail_epochs more."""
    if not engines:
        raise ValueError("the ring needs at least one participant")
    result = RingResult()
    remaining_tail: int | None = None
    for epoch in range(max_epochs):
        if remaining_tail is None and _workflow_done(engines[0]):
            remaining_tail = tail_epochs
        if remaining_tail is not None:
            if remaining_tail == 0:
                result.completed = True
                break
            remaining_tail -= 1
        engine = engines[epoch % len(engines)]
        view = engine.sync()
        action: Action | None = None
        if remaining_tail is None:
            action = engine.auto_action(view)
        real = action is not None
        if action is None:
            action = Fake()
        clock.advance(quantum)
        record = engine.submit(engine.build_update(view, engine.propose(view, action)))
        result.log.append(EpochLog(epoch, epoch % len(engines), real, record.seq))
        result.epochs += 1
        result.real_steps += int(real)
        result.fake_steps += int(not real)
    else:
        result.completed = _workflow_done(engines[0])
    return result


def record_size(record: LedgerRecord) -> int:
    """Bytes of the record an outside watcher sees."""
    proof = record.proof or b""
    return len(record.h) + len(record.ciphertext) + len(record.sig) + len(proof)


@dataclass(frozen=True)
class TrafficReport:
    updates: int
    per_epoch_counts: tuple[int, ...]
    inter_arrival_variance: float
    size_variance: float


def observe(records: list[LedgerRecord], quantum: float) -> TrafficReport:
    """Statistics computable from public history alone."""
    updates = [r for r in records if r.kind == "update"]
    if not updates:
        return TrafficReport(0, (), 0.0, 0.0)
    base = records[0].timestamp
    last_bucket = int(round((updates[-1].timestamp - base) / quantum))
    counts = [0] * max(last_bucket, 1)
    for record in updates:
        bucket = int(round((record.timestamp - base) / quantum)) - 1
        counts[bucket] += 1
    stamps = [r.timestamp for r in updates]
    gaps = [b - a for a, b in zip(stamps, stamps[1:])]
    sizes = [record_size(r) for r in updates]
    return TrafficReport(
        updates=len(updates),
        per_epoch_counts=tuple(counts),
        inter_arrival_variance=pvariance(gaps) if len(gaps) > 1 else 0.0,
        size_variance=pvariance(sizes) if len(sizes) > 1 else 0.0,
    )


def observables_digest(records: list[LedgerRecord]) -> bytes:
    """Hash of the (relative time, size) stream; two runs look the same
    to a watcher exactly when these digests match."""
    if not records:
        return hashlib.sha256(b"").digest()
    base = records[0].timestamp
    feed = hashlib.sha256()
    for record in records:
        feed.update(struct.pack(">dI", record.timestamp - base, record_size(record)))
    return feed.digest()
