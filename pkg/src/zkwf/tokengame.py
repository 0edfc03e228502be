"""Reference token game over the model graph.

This walks the BPMN graph directly, without the compiled delta table, and
enumerates every marking reachable in one step: start activations, element
completions with their gateway-resolved activations, parallel join firing
when the sibling branch is done, and the short-cut where an activated
element lands on completed immediately.  The transition checker must agree
with this enumeration exactly; the test suite compares the two.
"""

from __future__ import annotations

from itertools import product

from . import conditions, model as model_mod
from .model import Model


class TokenGameError(ValueError):
    pass


class TokenGame:
    def __init__(self, model: Model, var_values: dict[str, int]):
        self.model = model
        self.var_values = dict(var_values)
        self.order = model.executable_ids
        self.pos = {eid: i for i, eid in enumerate(self.order)}
        self.kinds = tuple(model.element(eid).kind for eid in self.order)

        self.outgoing: dict[str, list[model_mod.SequenceFlow]] = {
            e.id: [] for e in model.elements
        }
        for flow in model.flows:
            self.outgoing[flow.source].append(flow)

        self.throw_of: dict[int, int] = {}
        for mf in model.message_flows:
            self.throw_of[self.pos[mf.target]] = self.pos[mf.source]

        var_names = frozenset(v.name for v in model.variables)
        self._compiled = {
            f.id: conditions.compile_condition(f.condition, var_names)
            for f in model.flows
            if f.condition is not None
        }

        # (direct activations, joins reached) per executable, with exclusive
        # branches already pruned under the fixed variable assignment
        self._alternatives: dict[int, list[tuple[tuple[int, ...], tuple[str, ...]]]] = {}
        join_preds: dict[str, list[int]] = {}
        for eid in self.order:
            if model.element(eid).kind == model_mod.END_EVENT:
                continue
            alts = self._resolve(self.outgoing[eid][0].target, 0)
            index = self.pos[eid]
            self._alternatives[index] = alts
            for _, joins in alts:
                for join_id in joins:
                    join_preds.setdefault(join_id, [])
                    if index not in join_preds[join_id]:
                        join_preds[join_id].append(index)

        self.join_preds: dict[str, tuple[int, int]] = {}
        self.join_succ: dict[str, int] = {}
        for join_id, preds in join_preds.items():
            if len(preds) != 2:
                raise TokenGameError(f"join {join_id} has {len(preds)} contributing elements")
            self.join_preds[join_id] = (preds[0], preds[1])
            target = self.outgoing[join_id][0].target
            if self.model.element(target).kind not in model_mod.EXECUTABLE_KINDS:
                raise TokenGameError(f"join {join_id} does not lead to an element")
            self.join_succ[join_id] = self.pos[target]
        self.joins = tuple(
            (self.join_succ[j], self.join_preds[j]) for j in sorted(self.join_succ)
        )

    def _guard_true(self, flow: model_mod.SequenceFlow, siblings) -> bool:
        if flow.id in self._compiled:
            return conditions.eval_condition(self._compiled[flow.id], self.var_values)
        return not any(
            conditions.eval_condition(self._compiled[f.id], self.var_values)
            for f in siblings
            if f.id in self._compiled
        )

    def _resolve(self, target_id: str, depth: int) -> list[tuple[tuple[int, ...], tuple[str, ...]]]:
        if depth > len(self.model.elements):
            raise TokenGameError(f"gateway chain too deep near {target_id}")
        element = self.model.element(target_id)
        outs = self.outgoing[target_id]
        if element.kind in model_mod.EXECUTABLE_KINDS:
            return [((self.pos[target_id],), ())]
        if element.kind == model_mod.PARALLEL_GATEWAY:
            if len(outs) > 1:
                return [
                    (a_direct + b_direct, a_joins + b_joins)
                    for a_direct, a_joins in self._resolve(outs[0].target, depth + 1)
                    for b_direct, b_joins in self._resolve(outs[1].target, depth + 1)
                ]
            return [((), (target_id,))]
        if len(outs) > 1:  # exclusive split: keep branches whose guard holds
            alts = []
            for flow in outs:
                siblings = [f for f in outs if f is not flow]
                if self._guard_true(flow, siblings):
                    alts.extend(self._resolve(flow.target, depth + 1))
            return alts
        return self._resolve(outs[0].target, depth + 1)

    def _joins_satisfied(self, v_cur, v_new) -> bool:
        for succ, (p, q) in self.joins:
            before = v_cur[p] == 2 and v_cur[q] == 2
            after = v_new[p] == 2 and v_new[q] == 2
            if after and not before and v_new[succ] == 0:
                return False
        return True

    def _catch_ok(self, index: int, v_cur) -> bool:
        throw = self.throw_of.get(index)
        return throw is None or v_cur[throw] == 2

    def successors(self, v: tuple[int, ...]) -> set[tuple[int, ...]]:
        """Every marking reachable from v in one legal non-fake step."""
        found: set[tuple[int, ...]] = set()
        for index, kind in enumerate(self.kinds):
            if kind == model_mod.START_EVENT and v[index] == 0:
                for value in (1, 2):
                    candidate = v[:index] + (value,) + v[index + 1 :]
                    if self._joins_satisfied(v, candidate):
                        found.add(candidate)
            if v[index] != 1:
                continue
            if kind == model_mod.MESSAGE_CATCH and not self._catch_ok(index, v):
                continue
            if kind == model_mod.END_EVENT:
                candidate = v[:index] + (2,) + v[index + 1 :]
                if self._joins_satisfied(v, candidate):
                    found.add(candidate)
                continue
            for direct, join_ids in self._alternatives[index]:
                targets = list(direct)
                for join_id in join_ids:
                    p, q = self.join_preds[join_id]
                    sibling = q if p == index else p
                    if v[sibling] == 2:
                        targets.append(self.join_succ[join_id])
                if any(v[t] != 0 for t in targets):
                    continue
                for values in product((1, 2), repeat=len(targets)):
                    if any(
                        value == 2 and not self._catch_ok(target, v)
                        for target, value in zip(targets, values)
                    ):
                        continue
                    nv = list(v)
                    nv[index] = 2
                    for target, value in zip(targets, values):
                        nv[target] = value
                    candidate = tuple(nv)
                    if self._joins_satisfied(v, candidate):
                        found.add(candidate)
        return found

    def reachable(self, limit: int = 200_000) -> set[tuple[int, ...]]:
        start = (0,) * len(self.order)
        seen = {start}
        frontier = [start]
        while frontier:
            state = frontier.pop()
            for nxt in self.successors(state):
                if nxt not in seen:
                    seen.add(nxt)
                    if len(seen) > limit:
                        raise TokenGameError("reachable marking set exceeds limit")
                    frontier.append(nxt)
        return seen


def oracle_step(
    model: Model, v: tuple[int, ...], var_values: dict[str, int]
) -> set[tuple[int, ...]]:
    return TokenGame(model, var_values).successors(v)
