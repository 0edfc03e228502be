"""Compile a validated Model into the descriptor the transition checker runs on.

The descriptor fixes the ordered executable index, the table of admissible
one-step token deltas (at most one completion plus up to two activations),
per-element owner keys, variable writer sets, and message slot pairs.  Its
canonical JSON bytes are deterministic, so every participant derives the
same descriptor and the same digest from the same model.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

from . import conditions, model as model_mod
from .conditions import Expr
from .model import Model
from .statecodec import StateDims

PAD_ROW = (0, -1)


class CompileError(ValueError):
    def __init__(self, message: str, issues: list[model_mod.Issue] | None = None):
        if issues:
            message = message + "\n" + "\n".join(str(i) for i in issues)
        super().__init__(message)
        self.issues = issues or []


@dataclass(frozen=True)
class PEntry:
    """One admissible token-marking delta: up to three (change, index) rows.

    joins lists (successorIdx, (predIdxA, predIdxB)) for every parallel join
    this delta touches; when the successor row is present the entry only
    applies if both predecessors end up completed.
    """

    rows: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]
    guard: Expr | None = None
    joins: tuple[tuple[int, tuple[int, int]], ...] = ()

    @cached_property
    def row_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(r for r in self.rows if r != PAD_ROW)


@dataclass(frozen=True)
class Descriptor:
    model_digest: str
    elements: tuple[str, ...]
    owner_keys: tuple[str, ...]
    participant_keys: frozenset[str]
    var_names: tuple[str, ...]
    var_writers: dict[str, tuple[int, ...]]
    msg_slots: tuple[tuple[int, int], ...]
    p_array: tuple[PEntry, ...]
    flow_conditions: dict[str, Expr]

    def index_of(self, element_id: str) -> int:
        return self._positions[element_id]

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {eid: i for i, eid in enumerate(self.elements)}

    @cached_property
    def all_joins(self) -> tuple[tuple[int, tuple[int, int]], ...]:
        seen: dict[tuple[int, tuple[int, int]], None] = {}
        for entry in self.p_array:
            for join in entry.joins:
                seen[join] = None
        return tuple(seen)

    @cached_property
    def dims(self) -> StateDims:
        return StateDims(len(self.elements), len(self.var_names), len(self.msg_slots))

    @cached_property
    def throw_indices(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.msg_slots)

    @cached_property
    def entries_by_row_set(self) -> dict[frozenset, tuple[PEntry, ...]]:
        table: dict[frozenset, list[PEntry]] = {}
        for entry in self.p_array:
            table.setdefault(entry.row_set, []).append(entry)
        return {rows: tuple(entries) for rows, entries in table.items()}

    @cached_property
    def terminal_indices(self) -> tuple[int, ...]:
        """Elements whose completion never activates anything."""
        activating: set[int] = set()
        completing: set[int] = set()
        for entry in self.p_array:
            negatives = [i for delta, i in entry.row_set if delta == -1]
            completing.update(negatives)
            if negatives and len(entry.row_set) > 1:
                activating.update(negatives)
        return tuple(i for i in sorted(completing) if i not in activating)


@dataclass(frozen=True)
class _Alternative:
    direct: tuple[int, ...]  # executable indices activated outright
    joins: tuple[str, ...]  # parallel join gateway ids reached
    guards: tuple[Expr, ...]


def build_descriptor(model: Model) -> Descriptor:
    issues = model_mod.validate_structure(model)
    if issues:
        raise CompileError("model failed structural validation", issues)

    order = model.executable_ids
    pos = {eid: i for i, eid in enumerate(order)}
    owners = tuple(model_mod.resolve_owner(model, eid) for eid in order)
    var_names = tuple(v.name for v in model.variables)
    var_writers = {
        v.name: tuple(sorted(pos[w] for w in v.writers)) for v in model.variables
    }
    msg_slots = tuple((pos[m.source], pos[m.target]) for m in model.message_flows)

    outgoing: dict[str, list[model_mod.SequenceFlow]] = {e.id: [] for e in model.elements}
    for flow in model.flows:
        outgoing[flow.source].append(flow)

    flow_conditions: dict[str, Expr] = {}
    for element in model.elements:
        if element.kind == model_mod.EXCLUSIVE_GATEWAY and len(outgoing[element.id]) > 1:
            for flow in outgoing[element.id]:
                if flow.condition is not None:
                    flow_conditions[flow.id] = conditions.compile_condition(
                        flow.condition, frozenset(var_names)
                    )

    def branch_guard(flow: model_mod.SequenceFlow, siblings) -> Expr:
        if flow.id in flow_conditions:
            return flow_conditions[flow.id]
        others = [flow_conditions[f.id] for f in siblings if f.id in flow_conditions]
        if len(others) != len(siblings):
            raise CompileError(f"exclusive split at {flow.source} has two default branches")
        guard = conditions.conjoin([conditions.negated(g) for g in others])
        assert guard is not None
        return guard

    def resolve(target_id: str, guards: tuple[Expr, ...], depth: int) -> list[_Alternative]:
        if depth > len(model.elements):
            raise CompileError(f"gateway chain too deep near {target_id}")
        element = model.element(target_id)
        outs = outgoing[target_id]
        if element.kind in model_mod.EXECUTABLE_KINDS:
            return [_Alternative((pos[target_id],), (), guards)]
        if element.kind == model_mod.PARALLEL_GATEWAY:
            if len(outs) > 1:  # split
                first = resolve(outs[0].target, guards, depth + 1)
                second = resolve(outs[1].target, (), depth + 1)
                return [
                    _Alternative(
                        a.direct + b.direct, a.joins + b.joins, a.guards + b.guards
                    )
                    for a in first
                    for b in second
                ]
            return [_Alternative((), (target_id,), guards)]  # join
        # exclusive gateway
        if len(outs) > 1:  # guarded split
            alternatives = []
            for flow in outs:
                siblings = [f for f in outs if f is not flow]
                guard = branch_guard(flow, siblings)
                alternatives.extend(resolve(flow.target, guards + (guard,), depth + 1))
            return alternatives
        return resolve(outs[0].target, guards, depth + 1)  # merge passes through

    alternatives: dict[str, list[_Alternative]] = {}
    join_preds: dict[str, list[int]] = {}
    for eid in order:
        element = model.element(eid)
        if element.kind == model_mod.END_EVENT:
            continue
        alts = resolve(outgoing[eid][0].target, (), 0)
        alternatives[eid] = alts
        for alt in alts:
            for join_id in alt.joins:
                join_preds.setdefault(join_id, [])
                if pos[eid] not in join_preds[join_id]:
                    join_preds[join_id].append(pos[eid])

    join_succ: dict[str, int] = {}
    for join_id, preds in join_preds.items():
        if len(preds) != 2:
            raise CompileError(
                f"parallel join {join_id} needs exactly two contributing elements, "
                f"found {len(preds)}"
            )
        target = outgoing[join_id][0].target
        if model.element(target).kind not in model_mod.EXECUTABLE_KINDS:
            raise CompileError(f"parallel join {join_id} must lead directly to an element")
        join_succ[join_id] = pos[target]

    def pad(rows: list[tuple[int, int]]) -> tuple:
        rows = sorted(rows, key=lambda r: (r[1], r[0]))
        if len(rows) > 3:
            raise CompileError("a single step would activate more than two elements")
        while len(rows) < 3:
            rows.append(PAD_ROW)
        return tuple(rows)

    entries: list[PEntry] = []
    seen: set[PEntry] = set()

    def emit(entry: PEntry) -> None:
        if entry not in seen:
            seen.add(entry)
            entries.append(entry)

    for eid in order:
        element = model.element(eid)
        i = pos[eid]
        if element.kind == model_mod.START_EVENT:
            emit(PEntry(pad([(1, i)])))
        if element.kind == model_mod.END_EVENT:
            emit(PEntry(pad([(-1, i)])))
            continue
        for alt in alternatives[eid]:
            guard = conditions.conjoin(list(alt.guards))
            joins_meta = tuple(
                sorted(
                    (join_succ[j], tuple(sorted(join_preds[j]))) for j in set(alt.joins)
                )
            )
            for fire_count in range(len(alt.joins) + 1):
                for fired in combinations(sorted(set(alt.joins)), fire_count):
                    rows = [(-1, i)]
                    rows += [(1, d) for d in alt.direct]
                    rows += [(1, join_succ[j]) for j in fired]
                    emit(PEntry(pad(rows), guard, joins_meta))

    return Descriptor(
        model_digest=model_mod.model_digest(model).hex(),
        elements=order,
        owner_keys=owners,
        participant_keys=model.participant_keys,
        var_names=var_names,
        var_writers=var_writers,
        msg_slots=msg_slots,
        p_array=tuple(entries),
        flow_conditions=flow_conditions,
    )


def to_jsonable(d: Descriptor) -> dict:
    return {
        "modelDigest": d.model_digest,
        "elements": list(d.elements),
        "ownerKeys": list(d.owner_keys),
        "participantKeys": sorted(d.participant_keys),
        "varNames": list(d.var_names),
        "varWriters": {name: list(idxs) for name, idxs in d.var_writers.items()},
        "msgSlots": [list(slot) for slot in d.msg_slots],
        "pArray": [
            {
                "rows": [list(row) for row in entry.rows],
                "guard": conditions.to_jsonable(entry.guard) if entry.guard else None,
                "joins": [[succ, list(preds)] for succ, preds in entry.joins],
            }
            for entry in d.p_array
        ],
        "flowConditions": {
            fid: conditions.to_jsonable(expr) for fid, expr in d.flow_conditions.items()
        },
    }


def to_canonical_json(d: Descriptor) -> str:
    return json.dumps(to_jsonable(d), sort_keys=True, separators=(",", ":"))


def descriptor_digest(d: Descriptor) -> bytes:
    return hashlib.sha256(to_canonical_json(d).encode()).digest()


def from_jsonable(data: dict) -> Descriptor:
    return Descriptor(
        model_digest=data["modelDigest"],
        elements=tuple(data["elements"]),
        owner_keys=tuple(data["ownerKeys"]),
        participant_keys=frozenset(data["participantKeys"]),
        var_names=tuple(data["varNames"]),
        var_writers={k: tuple(v) for k, v in data["varWriters"].items()},
        msg_slots=tuple((a, b) for a, b in data["msgSlots"]),
        p_array=tuple(
            PEntry(
                rows=tuple((d_, i) for d_, i in e["rows"]),
                guard=conditions.from_jsonable(e["guard"]) if e["guard"] else None,
                joins=tuple((succ, (p, q)) for succ, (p, q) in e["joins"]),
            )
            for e in data["pArray"]
        ),
        flow_conditions={
            fid: conditions.from_jsonable(ast) for fid, ast in data["flowConditions"].items()
        },
    )


def from_json(text: str) -> Descriptor:
    return from_jsonable(json.loads(text))
