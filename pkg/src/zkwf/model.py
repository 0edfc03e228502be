"""BPMN collaboration parsing, structural validation, serialization.

The supported subset: start/end events, tasks, message throw/catch events,
binary exclusive and parallel gateways, pools with optional lanes, sequence
flows (with guard conditions on exclusive splits), and message flows between
pools.  Ownership and variable declarations come from extension attributes:

    zkp:publicKey  - hex Ed25519 key on a pool, lane, or executable element
    zkp:variables  - comma-separated variable names on a task
"""

from __future__ import annotations

import hashlib
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import cached_property

from . import conditions

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
ZKP_NS = "http://zkwf.dev/schema/bpmn/extensions"

START_EVENT = "StartEvent"
END_EVENT = "EndEvent"
TASK = "Task"
MESSAGE_THROW = "MessageThrowEvent"
MESSAGE_CATCH = "MessageCatchEvent"
EXCLUSIVE_GATEWAY = "ExclusiveGateway"
PARALLEL_GATEWAY = "ParallelGateway"

EXECUTABLE_KINDS = frozenset(
    {START_EVENT, END_EVENT, TASK, MESSAGE_THROW, MESSAGE_CATCH}
)
GATEWAY_KINDS = frozenset({EXCLUSIVE_GATEWAY, PARALLEL_GATEWAY})
ALL_KINDS = EXECUTABLE_KINDS | GATEWAY_KINDS

_TAG_TO_KIND = {
    "startEvent": START_EVENT,
    "endEvent": END_EVENT,
    "task": TASK,
    "exclusiveGateway": EXCLUSIVE_GATEWAY,
    "parallelGateway": PARALLEL_GATEWAY,
}

# Process children we read through without treating as flow nodes.
_IGNORED_PROCESS_TAGS = frozenset({"documentation", "extensionElements", "laneSet"})
_IGNORED_NODE_TAGS = frozenset({"incoming", "outgoing", "documentation", "extensionElements"})


class ModelError(ValueError):
    pass


class ParseError(ModelError):
    def __init__(self, message: str, offenders: list[str] | None = None):
        if offenders:
            message = f"{message}: {', '.join(offenders)}"
        super().__init__(message)
        self.offenders = offenders or []


class UnownedElementError(ModelError):
    def __init__(self, element_id: str):
        super().__init__(f"no owner key resolves for element {element_id!r}")
        self.element_id = element_id


@dataclass(frozen=True)
class Element:
    id: str
    kind: str
    owner_key: str | None = None
    writable_vars: tuple[str, ...] = ()


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str
    condition: str | None = None


@dataclass(frozen=True)
class MessageFlow:
    id: str
    source: str  # throw event id
    target: str  # catch event id


@dataclass(frozen=True)
class Lane:
    id: str
    key: str | None
    members: tuple[str, ...]


@dataclass(frozen=True)
class Pool:
    id: str
    name: str | None
    key: str | None
    lanes: tuple[Lane, ...]
    members: tuple[str, ...]


@dataclass(frozen=True)
class VariableDecl:
    name: str
    writers: tuple[str, ...]  # element ids, in document order


@dataclass(frozen=True)
class Issue:
    code: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.subject}: {self.detail}"


@dataclass(frozen=True)
class Model:
    elements: tuple[Element, ...]
    flows: tuple[SequenceFlow, ...]
    message_flows: tuple[MessageFlow, ...]
    pools: tuple[Pool, ...]
    variables: tuple[VariableDecl, ...]

    def element(self, element_id: str) -> Element:
        return self._by_id[element_id]

    @cached_property
    def _by_id(self) -> dict[str, Element]:
        return {e.id: e for e in self.elements}

    @property
    def executable_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.elements if e.kind in EXECUTABLE_KINDS)

    @property
    def participant_keys(self) -> frozenset[str]:
        keys = set()
        for pool in self.pools:
            if pool.key:
                keys.add(pool.key)
            for lane in pool.lanes:
                if lane.key:
                    keys.add(lane.key)
        for element in self.elements:
            if element.owner_key:
                keys.add(element.owner_key)
        return frozenset(keys)

    def pool_of(self, element_id: str) -> Pool | None:
        for pool in self.pools:
            if element_id in pool.members:
                return pool
        return None


def _local(tag: str) -> tuple[str, str]:
    if tag.startswith("{"):
        uri, _, name = tag[1:].partition("}")
        return uri, name
    return "", tag


def _zkp_attr(node: ET.Element, name: str) -> str | None:
    return node.get(f"{{{ZKP_NS}}}{name}")


def _parse_key(raw: str, context: str) -> str:
    value = raw.strip().lower()
    try:
        decoded = bytes.fromhex(value)
    except ValueError:
        raise ParseError(f"invalid public key on {context}: not hex") from None
    if len(decoded) != 32:
        raise ParseError(f"invalid public key on {context}: expected 32 bytes")
    return value


def parse_bpmn(data: bytes | str) -> Model:
    """Parse BPMN XML into a Model, rejecting anything outside the subset."""
    if isinstance(data, str):
        data = data.encode()
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"XML syntax error: {exc}") from None
    uri, name = _local(root.tag)
    if uri != BPMN_NS or name != "definitions":
        raise ParseError("root element is not a BPMN definitions document")

    processes: list[ET.Element] = []
    participants: list[ET.Element] = []
    message_flow_nodes: list[ET.Element] = []
    for child in root:
        child_uri, child_name = _local(child.tag)
        if child_uri != BPMN_NS:
            continue  # diagram interchange and vendor content
        if child_name == "process":
            processes.append(child)
        elif child_name == "collaboration":
            for sub in child:
                sub_uri, sub_name = _local(sub.tag)
                if sub_uri != BPMN_NS:
                    continue
                if sub_name == "participant":
                    participants.append(sub)
                elif sub_name == "messageFlow":
                    message_flow_nodes.append(sub)
                elif sub_name != "documentation":
                    raise ParseError(
                        "unsupported BPMN elements", [f"collaboration/{sub_name}"]
                    )
        elif child_name in ("message", "documentation"):
            continue
        else:
            raise ParseError("unsupported BPMN elements", [child_name])
    if not processes:
        raise ParseError("no process definitions found")

    elements: list[Element] = []
    flows: list[SequenceFlow] = []
    pools: list[Pool] = []
    var_order: list[str] = []
    var_writers: dict[str, list[str]] = {}
    unsupported: list[str] = []
    seen_ids: set[str] = set()

    pool_by_process: dict[str, tuple[str, str | None, str | None]] = {}
    for participant in participants:
        pid = participant.get("id")
        ref = participant.get("processRef")
        if pid is None or ref is None:
            raise ParseError("participant is missing id or processRef")
        key_raw = _zkp_attr(participant, "publicKey")
        key = _parse_key(key_raw, f"participant {pid}") if key_raw else None
        pool_by_process[ref] = (pid, participant.get("name"), key)

    for process in processes:
        process_id = process.get("id")
        if process_id is None:
            raise ParseError("process is missing id")
        process_key_raw = _zkp_attr(process, "publicKey")
        process_key = (
            _parse_key(process_key_raw, f"process {process_id}") if process_key_raw else None
        )
        pool_id, pool_name, pool_key = pool_by_process.get(
            process_id, (process_id, process.get("name"), process_key)
        )
        member_ids: list[str] = []
        lanes: list[Lane] = []

        for node in process:
            node_uri, tag = _local(node.tag)
            if node_uri != BPMN_NS:
                continue
            if tag in _IGNORED_PROCESS_TAGS:
                if tag == "laneSet":
                    lanes.extend(_parse_lanes(node))
                continue
            node_id = node.get("id")
            if tag == "sequenceFlow":
                if node_id is None:
                    raise ParseError("sequenceFlow is missing id")
                source, target = node.get("sourceRef"), node.get("targetRef")
                if source is None or target is None:
                    raise ParseError(f"sequenceFlow {node_id} is missing endpoints")
                condition = None
                for sub in node:
                    if _local(sub.tag) == (BPMN_NS, "conditionExpression"):
                        condition = (sub.text or "").strip()
                flows.append(SequenceFlow(node_id, source, target, condition))
                continue
            kind = _flow_node_kind(node, tag, unsupported)
            if kind is None:
                continue
            if node_id is None:
                raise ParseError(f"{tag} element is missing id")
            if node_id in seen_ids:
                raise ParseError(f"duplicate element id {node_id!r}")
            seen_ids.add(node_id)
            key_raw = _zkp_attr(node, "publicKey")
            vars_raw = _zkp_attr(node, "variables")
            if kind in GATEWAY_KINDS and (key_raw or vars_raw):
                raise ParseError(f"extension attributes not allowed on gateway {node_id}")
            if vars_raw is not None and kind != TASK:
                raise ParseError(f"zkp:variables only allowed on tasks, found on {node_id}")
            owner = _parse_key(key_raw, f"element {node_id}") if key_raw else None
            writable: tuple[str, ...] = ()
            if vars_raw:
                names = [v.strip() for v in vars_raw.split(",") if v.strip()]
                writable = tuple(names)
                for var_name in names:
                    if var_name not in var_writers:
                        var_order.append(var_name)
                        var_writers[var_name] = []
                    if node_id not in var_writers[var_name]:
                        var_writers[var_name].append(node_id)
            elements.append(Element(node_id, kind, owner, writable))
            member_ids.append(node_id)

        pools.append(Pool(pool_id, pool_name, pool_key, tuple(lanes), tuple(member_ids)))

    if unsupported:
        raise ParseError("unsupported BPMN elements", sorted(set(unsupported)))

    known = {e.id for e in elements}
    dangling = [f.id for f in flows if f.source not in known or f.target not in known]
    message_flows = []
    for node in message_flow_nodes:
        mid, source, target = node.get("id"), node.get("sourceRef"), node.get("targetRef")
        if mid is None or source is None or target is None:
            raise ParseError("messageFlow is missing id or endpoints")
        if source not in known or target not in known:
            dangling.append(mid)
        message_flows.append(MessageFlow(mid, source, target))
    if dangling:
        raise ParseError("dangling flow references", sorted(dangling))

    for pool in pools:
        for lane in pool.lanes:
            missing = [m for m in lane.members if m not in known]
            if missing:
                raise ParseError("lane references unknown elements", missing)

    variables = tuple(
        VariableDecl(name, tuple(var_writers[name])) for name in var_order
    )
    return Model(
        elements=tuple(elements),
        flows=tuple(flows),
        message_flows=tuple(message_flows),
        pools=tuple(pools),
        variables=variables,
    )


def _flow_node_kind(node: ET.Element, tag: str, unsupported: list[str]) -> str | None:
    if tag in _IGNORED_NODE_TAGS:
        return None
    if tag in _TAG_TO_KIND:
        return _TAG_TO_KIND[tag]
    if tag in ("intermediateThrowEvent", "intermediateCatchEvent"):
        has_message = any(
            _local(sub.tag) == (BPMN_NS, "messageEventDefinition") for sub in node
        )
        if not has_message:
            unsupported.append(f"{tag} without messageEventDefinition ({node.get('id')})")
            return None
        return MESSAGE_THROW if tag == "intermediateThrowEvent" else MESSAGE_CATCH
    unsupported.append(f"{tag} ({node.get('id')})")
    return None


def _parse_lanes(lane_set: ET.Element) -> list[Lane]:
    lanes = []
    for node in lane_set:
        if _local(node.tag) != (BPMN_NS, "lane"):
            continue
        lane_id = node.get("id")
        if lane_id is None:
            raise ParseError("lane is missing id")
        key_raw = _zkp_attr(node, "publicKey")
        key = _parse_key(key_raw, f"lane {lane_id}") if key_raw else None
        members = tuple(
            (sub.text or "").strip()
            for sub in node
            if _local(sub.tag) == (BPMN_NS, "flowNodeRef")
        )
        lanes.append(Lane(lane_id, key, members))
    return lanes


def resolve_owner(model: Model, element_id: str) -> str:
    """Owner key lookup: the element's own key, else its lane's, else its pool's."""
    element = model.element(element_id)
    if element.owner_key:
        return element.owner_key
    pool = model.pool_of(element_id)
    if pool is not None:
        for lane in pool.lanes:
            if element_id in lane.members and lane.key:
                return lane.key
        if pool.key:
            return pool.key
    raise UnownedElementError(element_id)


_ARITY = {
    START_EVENT: (0, 1),
    END_EVENT: (1, 0),
    TASK: (1, 1),
    MESSAGE_THROW: (1, 1),
    MESSAGE_CATCH: (1, 1),
}


def validate_structure(model: Model) -> list[Issue]:
    """Deterministic structural report; an empty report means the model is usable."""
    issues: list[Issue] = []
    incoming: dict[str, list[SequenceFlow]] = {e.id: [] for e in model.elements}
    outgoing: dict[str, list[SequenceFlow]] = {e.id: [] for e in model.elements}
    for flow in model.flows:
        outgoing[flow.source].append(flow)
        incoming[flow.target].append(flow)

    for element in model.elements:
        n_in, n_out = len(incoming[element.id]), len(outgoing[element.id])
        if element.kind in GATEWAY_KINDS:
            if (n_in, n_out) not in ((1, 2), (2, 1)):
                issues.append(
                    Issue(
                        "gateway-not-binary",
                        element.id,
                        f"has {n_in} incoming and {n_out} outgoing flows",
                    )
                )
        else:
            want_in, want_out = _ARITY[element.kind]
            if (n_in, n_out) != (want_in, want_out):
                issues.append(
                    Issue(
                        "bad-arity",
                        element.id,
                        f"{element.kind} has {n_in} incoming and {n_out} outgoing "
                        f"flows, expected {want_in} and {want_out}",
                    )
                )

    cycle = _find_cycle(model)
    if cycle:
        issues.append(Issue("cycle", cycle[0], " -> ".join(cycle)))

    for element_id in model.executable_ids:
        try:
            resolve_owner(model, element_id)
        except UnownedElementError:
            issues.append(Issue("unowned-element", element_id, "no key on element, lane, or pool"))

    var_names = frozenset(v.name for v in model.variables)
    for element in model.elements:
        outs = outgoing[element.id]
        is_xor_split = element.kind == EXCLUSIVE_GATEWAY and len(outs) > 1
        if is_xor_split:
            defaults = [f for f in outs if f.condition is None]
            if len(defaults) > 1:
                issues.append(
                    Issue(
                        "missing-condition",
                        element.id,
                        "more than one outgoing flow has no condition",
                    )
                )
            for flow in outs:
                if flow.condition is None:
                    continue
                try:
                    conditions.compile_condition(flow.condition, var_names)
                except conditions.ConditionError as exc:
                    issues.append(Issue("bad-condition", flow.id, str(exc)))
        else:
            for flow in outs:
                if flow.condition is not None:
                    issues.append(
                        Issue(
                            "unexpected-condition",
                            flow.id,
                            "conditions are only allowed on exclusive gateway splits",
                        )
                    )

    pool_of = {m: p.id for p in model.pools for m in p.members}
    for flow in model.flows:
        if pool_of.get(flow.source) != pool_of.get(flow.target):
            issues.append(Issue("cross-pool-flow", flow.id, "sequence flow crosses pools"))

    throw_counts: dict[str, int] = {}
    catch_counts: dict[str, int] = {}
    for mf in model.message_flows:
        source = model.element(mf.source)
        target = model.element(mf.target)
        if source.kind != MESSAGE_THROW:
            issues.append(Issue("bad-message-flow", mf.id, "source is not a message throw event"))
        if target.kind != MESSAGE_CATCH:
            issues.append(Issue("bad-message-flow", mf.id, "target is not a message catch event"))
        if pool_of.get(mf.source) == pool_of.get(mf.target):
            issues.append(Issue("bad-message-flow", mf.id, "message flow stays inside one pool"))
        throw_counts[mf.source] = throw_counts.get(mf.source, 0) + 1
        catch_counts[mf.target] = catch_counts.get(mf.target, 0) + 1
    for element in model.elements:
        if element.kind == MESSAGE_THROW and throw_counts.get(element.id, 0) != 1:
            issues.append(
                Issue("unpaired-message-event", element.id, "throw needs exactly one message flow")
            )
        if element.kind == MESSAGE_CATCH and catch_counts.get(element.id, 0) != 1:
            issues.append(
                Issue("unpaired-message-event", element.id, "catch needs exactly one message flow")
            )

    issues.sort(key=lambda i: (i.code, i.subject, i.detail))
    return issues


def _find_cycle(model: Model) -> list[str] | None:
    adjacency: dict[str, list[str]] = {e.id: [] for e in model.elements}
    for flow in model.flows:
        adjacency[flow.source].append(flow.target)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {node: WHITE for node in adjacency}
    parent: dict[str, str] = {}

    for start in adjacency:
        if color[start] != WHITE:
            continue
        stack = [(start, iter(adjacency[start]))]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    parent[nxt] = node
                    stack.append((nxt, iter(adjacency[nxt])))
                    advanced = True
                    break
                if color[nxt] == GREY:
                    chain = [nxt, node]
                    cursor = node
                    while cursor != nxt:
                        cursor = parent[cursor]
                        chain.append(cursor)
                    chain.reverse()
                    return chain
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


def to_jsonable(model: Model) -> dict:
    return {
        "elements": [
            {
                "id": e.id,
                "kind": e.kind,
                "ownerKey": e.owner_key,
                "writableVars": list(e.writable_vars),
            }
            for e in model.elements
        ],
        "flows": [
            {"id": f.id, "source": f.source, "target": f.target, "condition": f.condition}
            for f in model.flows
        ],
        "messageFlows": [
            {"id": m.id, "throw": m.source, "catch": m.target} for m in model.message_flows
        ],
        "pools": [
            {
                "id": p.id,
                "name": p.name,
                "key": p.key,
                "lanes": [
                    {"id": l.id, "key": l.key, "members": list(l.members)} for l in p.lanes
                ],
                "members": list(p.members),
            }
            for p in model.pools
        ],
        "variables": [{"name": v.name, "writers": list(v.writers)} for v in model.variables],
    }


def to_canonical_json(model: Model) -> str:
    return json.dumps(to_jsonable(model), sort_keys=True, separators=(",", ":"))


def model_digest(model: Model) -> bytes:
    return hashlib.sha256(to_canonical_json(model).encode()).digest()


def from_jsonable(data: dict) -> Model:
    return Model(
        elements=tuple(
            Element(
                e["id"],
                e["kind"],
                e.get("ownerKey"),
                tuple(e.get("writableVars", ())),
            )
            for e in data["elements"]
        ),
        flows=tuple(
            SequenceFlow(f["id"], f["source"], f["target"], f.get("condition"))
            for f in data["flows"]
        ),
        message_flows=tuple(
            MessageFlow(m["id"], m["throw"], m["catch"]) for m in data["messageFlows"]
        ),
        pools=tuple(
            Pool(
                p["id"],
                p.get("name"),
                p.get("key"),
                tuple(Lane(l["id"], l.get("key"), tuple(l["members"])) for l in p["lanes"]),
                tuple(p["members"]),
            )
            for p in data["pools"]
        ),
        variables=tuple(
            VariableDecl(v["name"], tuple(v["writers"])) for v in data["variables"]
        ),
    )


def from_json(text: str) -> Model:
    return from_jsonable(json.loads(text))
