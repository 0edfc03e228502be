"""The update statement: what a submitted transition proof actually claims.

Given the private pre/post states with their salts and the signer's key
pair, plus the public commitment and signature, the statement checks the
commitment opening, the legality of the marking delta against the
descriptor, the signer's authorization over the completed elements, and
the signature binding the old commitment to the new one.  The output is
the new commitment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import conditions, signing, statecodec
from .compiler import Descriptor, PEntry
from .statecodec import ProcessState, ZERO_HASH


class Reason(str, Enum):
    HASH_MISMATCH = "HASH_MISMATCH"
    BAD_TRANSITION = "BAD_TRANSITION"
    BAD_AUTH = "BAD_AUTH"
    BAD_SIG = "BAD_SIG"


class StatementRejected(Exception):
    def __init__(self, reason: Reason, detail: str = ""):
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class PrivateInputs:
    s_current: ProcessState
    r_current: bytes
    s_new: ProcessState
    r_new: bytes
    pk: bytes
    sk: bytes


@dataclass(frozen=True)
class PublicInputs:
    h_current: bytes
    new_sig: bytes  # signature over h_current || h_new


@dataclass(frozen=True)
class FakeUpdate:
    pass


@dataclass(frozen=True)
class DiffRows:
    rows: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class InvalidDiff:
    detail: str


Diff = FakeUpdate | DiffRows | InvalidDiff

_ROW_FOR_CHANGE = {(1, 2): -1, (0, 1): 1, (0, 2): 1}


def diff_matrix(v_current: tuple[int, ...], v_new: tuple[int, ...]) -> Diff:
    """Classify the marking change as fake, a row list, or inadmissible."""
    if len(v_current) != len(v_new):
        raise ValueError("marking vectors differ in length")
    rows: list[tuple[int, int]] = []
    for i, (old, new) in enumerate(zip(v_current, v_new)):
        if old == new:
            continue
        delta = _ROW_FOR_CHANGE.get((old, new))
        if delta is None:
            return InvalidDiff(f"element {i} cannot move from {old} to {new}")
        if len(rows) == 3:
            return InvalidDiff("more than three elements changed")
        rows.append((delta, i))
    if not rows:
        return FakeUpdate()
    return DiffRows(tuple(rows))


def _entry_applies(entry: PEntry, descriptor: Descriptor, s_new: ProcessState) -> bool:
    if entry.guard is not None:
        env = dict(zip(descriptor.var_names, s_new.var_values))
        if not conditions.eval_condition(entry.guard, env):
            return False
    for succ, (p, q) in entry.joins:
        if (1, succ) in entry.row_set and not (s_new.v[p] == 2 and s_new.v[q] == 2):
            return False  # the join may only open once both branches are done
    return True


def transition_failure(
    descriptor: Descriptor, s_current: ProcessState, s_new: ProcessState
) -> str | None:
    """None when the step is admissible, else a human-readable explanation."""
    diff = diff_matrix(s_current.v, s_new.v)
    if isinstance(diff, InvalidDiff):
        return diff.detail
    if isinstance(diff, FakeUpdate):
        if s_new.var_values != s_current.var_values:
            return "fake update changed a variable"
        if s_new.msg_hashes != s_current.msg_hashes:
            return "fake update changed a message hash"
        return None

    row_set = frozenset(diff.rows)
    candidates = descriptor.entries_by_row_set.get(row_set, ())
    if not candidates:
        return f"no admissible delta matches rows {sorted(row_set)}"
    if not any(_entry_applies(entry, descriptor, s_new) for entry in candidates):
        return "no matching delta passes its guard and join constraint"

    for succ, (p, q) in descriptor.all_joins:
        both_before = s_current.v[p] == 2 and s_current.v[q] == 2
        both_after = s_new.v[p] == 2 and s_new.v[q] == 2
        if both_after and not both_before and s_new.v[succ] == 0:
            return f"parallel join over ({p},{q}) closed without activating {succ}"

    completed = {
        i for i in range(len(s_new.v)) if s_current.v[i] != 2 and s_new.v[i] == 2
    }
    for k, name in enumerate(descriptor.var_names):
        if s_new.var_values[k] != s_current.var_values[k]:
            if not completed.intersection(descriptor.var_writers.get(name, ())):
                return f"variable {name} changed without a completing writer"

    for slot, (throw, catch) in enumerate(descriptor.msg_slots):
        if s_new.v[throw] == 2 and s_new.msg_hashes[slot] == ZERO_HASH:
            return f"throw event {throw} completed with an empty message slot"
        if catch in completed and s_current.v[throw] != 2:
            return f"catch event {catch} completed before its throw"
        if s_new.msg_hashes[slot] != s_current.msg_hashes[slot] and throw not in completed:
            return f"message slot {slot} changed outside its throw's completion"

    return None


def check_transition(
    descriptor: Descriptor, s_current: ProcessState, s_new: ProcessState
) -> bool:
    return transition_failure(descriptor, s_current, s_new) is None


def check_authorization(descriptor: Descriptor, diff: Diff, pk: bytes) -> bool:
    """Fake updates need membership; completions need ownership of every
    completed element; pure activations need ownership of the start."""
    pk_hex = pk.hex()
    if isinstance(diff, InvalidDiff):
        return False
    if isinstance(diff, FakeUpdate):
        return pk_hex in descriptor.participant_keys
    negatives = [i for delta, i in diff.rows if delta == -1]
    relevant = negatives if negatives else [i for _, i in diff.rows]
    return all(descriptor.owner_keys[i] == pk_hex for i in relevant)


def evaluate_statement(
    descriptor: Descriptor, priv: PrivateInputs, pub: PublicInputs
) -> bytes:
    """Run the full statement; returns h_new or raises StatementRejected."""
    if statecodec.commit(priv.s_current, priv.r_current) != pub.h_current:
        raise StatementRejected(Reason.HASH_MISMATCH, "current state does not open h_current")

    failure = transition_failure(descriptor, priv.s_current, priv.s_new)
    if failure is not None:
        raise StatementRejected(Reason.BAD_TRANSITION, failure)

    h_new = statecodec.commit(priv.s_new, priv.r_new)

    if signing.derive_pk(priv.sk) != priv.pk:
        raise StatementRejected(Reason.BAD_AUTH, "secret key does not match claimed key")
    diff = diff_matrix(priv.s_current.v, priv.s_new.v)
    if not check_authorization(descriptor, diff, priv.pk):
        raise StatementRejected(Reason.BAD_AUTH, "key does not own the completed elements")
    if not signing.verify(priv.pk, pub.h_current + h_new, pub.new_sig):
        raise StatementRejected(Reason.BAD_SIG, "signature does not bind the commitments")

    return h_new
