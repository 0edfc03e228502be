"""Scripted multi-party runs loaded from YAML.

A scenario names a model file, an instance, the participants (demo key
seeds or key files), and an ordered list of steps.  Runs default to an
in-process ledger on a virtual clock, so a scripted day of work takes
milliseconds and is fully reproducible.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import compiler, model, signing, statecodec
from .compiler import Descriptor
from .ledger import InProcessClient, Ledger, LedgerClient, LedgerRecord
from .participant import Action, ActivateStart, Complete, Engine, Fake
from .schedule import VirtualClock
from .signing import KeyPair
from .statecodec import ProcessState


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioStep:
    participant: str
    action: Action


@dataclass(frozen=True)
class Scenario:
    model_path: Path
    instance_id: str
    group_key: bytes
    backend_id: str
    quantum: float
    deployer: str
    participants: dict[str, KeyPair]
    steps: tuple[ScenarioStep, ...]


@dataclass
class ScenarioResult:
    records: list[LedgerRecord] = field(default_factory=list)
    final_state: ProcessState | None = None
    final_seq: int = 0
    elapsed: float = 0.0


def group_key_from_seed(seed: str) -> bytes:
    """Deterministic demo group key; real runs should pass raw bytes."""
    return hashlib.sha256(f"group:{seed}".encode()).digest()


def _parse_action(raw: dict) -> Action:
    kinds = [k for k in ("activate", "complete", "fake") if k in raw]
    if len(kinds) != 1:
        raise ScenarioError(
            f"step needs exactly one of activate/complete/fake, got {sorted(raw)}"
        )
    kind = kinds[0]
    if kind == "fake":
        return Fake()
    if kind == "activate":
        return ActivateStart(str(raw["activate"]))
    message = None
    if "message" in raw:
        message = str(raw["message"]).encode()
    elif "message_hex" in raw:
        message = bytes.fromhex(raw["message_hex"])
    var_writes = {str(k): int(v) for k, v in (raw.get("vars") or {}).items()}
    return Complete(str(raw["complete"]), var_writes=var_writes, message=message)


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ScenarioError(f"bad YAML in {path}: {err}")
    if not isinstance(data, dict):
        raise ScenarioError(f"{path} does not hold a scenario mapping")
    try:
        model_path = (path.parent / data["model"]).resolve()
        instance_id = str(data["instance"])
        raw_participants = data["participants"]
        raw_steps = data["steps"]
    except KeyError as err:
        raise ScenarioError(f"scenario is missing {err.args[0]!r}")

    if "group_key" in data:
        group_key = bytes.fromhex(str(data["group_key"]))
    elif "group_key_seed" in data:
        group_key = group_key_from_seed(str(data["group_key_seed"]))
    else:
        raise ScenarioError("scenario needs group_key or group_key_seed")

    participants: dict[str, KeyPair] = {}
    for entry in raw_participants:
        name = str(entry["name"])
        if "key_seed" in entry:
            participants[name] = signing.keypair_from_seed(str(entry["key_seed"]))
        elif "key_file" in entry:
            participants[name] = signing.load_key_file(path.parent / entry["key_file"])
        else:
            raise ScenarioError(f"participant {name!r} needs key_seed or key_file")

    steps = []
    for raw in raw_steps:
        who = str(raw.get("participant", ""))
        if who not in participants:
            raise ScenarioError(f"step references unknown participant {who!r}")
        steps.append(ScenarioStep(who, _parse_action(raw)))

    deployer = str(data.get("deployer", next(iter(participants))))
    if deployer not in participants:
        raise ScenarioError(f"deployer {deployer!r} is not a participant")
    return Scenario(
        model_path=model_path,
        instance_id=instance_id,
        group_key=group_key,
        backend_id=str(data.get("backend", "reexec-v1")),
        quantum=float(data.get("quantum", 1.0)),
        deployer=deployer,
        participants=participants,
        steps=tuple(steps),
    )


def build_engines(
    scenario: Scenario, client: LedgerClient, descriptor: Descriptor | None = None
) -> dict[str, Engine]:
    if descriptor is None:
        parsed = model.parse_bpmn(scenario.model_path.read_text())
        descriptor = compiler.build_descriptor(parsed)
    from . import proving

    backend = proving.backend(scenario.backend_id)
    return {
        name: Engine(
            descriptor,
            keypair,
            scenario.group_key,
            scenario.instance_id,
            client,
            backend=backend,
        )
        for name, keypair in scenario.participants.items()
    }


def run_scenario(
    scenario: Scenario,
    client: LedgerClient | None = None,
    clock: VirtualClock | None = None,
    deploy: bool = True,
) -> ScenarioResult:
    if client is None:
        clock = clock or VirtualClock()
        client = InProcessClient(Ledger(clock=clock))
    engines = build_engines(scenario, client)
    result = ScenarioResult()
    started = time.perf_counter()
    if deploy:
        result.records.append(engines[scenario.deployer].deploy())
    for step in scenario.steps:
        if clock is not None:
            clock.advance(scenario.quantum)
        result.records.append(engines[step.participant].step(step.action))
    view = engines[scenario.deployer].sync()
    result.final_state = view.state
    result.final_seq = view.seq
    result.elapsed = time.perf_counter() - started
    return result


_MARKS = {0: "inactive", 1: "active", 2: "completed"}


def format_marking(descriptor: Descriptor, state: ProcessState) -> str:
    lines = [
        f"{element_id}: {_MARKS[state.v[i]]}"
        for i, element_id in enumerate(descriptor.elements)
    ]
    for name, value in zip(descriptor.var_names, state.var_values):
        lines.append(f"{name} = {value}")
    for slot, (throw, catch) in enumerate(descriptor.msg_slots):
        label = "empty" if state.msg_hashes[slot] == statecodec.ZERO_HASH else (
            state.msg_hashes[slot].hex()[:16] + "..."
        )
        lines.append(
            f"message {descriptor.elements[throw]} -> {descriptor.elements[catch]}: {label}"
        )
    return "\n".join(lines)
