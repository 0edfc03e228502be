"""Personal HTTP backend for one participant, consumed by the web UI.

The bridge owns a single Engine: it audits the shared ledger, decrypts
with the group key, and signs with the participant's key.  The UI never
sees key material, only ids, markings, and hex digests.  Endpoints:
GET /bridge/meta (static model facts), GET /bridge/state (audited head),
POST /bridge/step, GET /bridge/events (server-sent state refreshes).
"""

from __future__ import annotations

import json
import threading
from typing import Iterator

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from .ledger import LedgerError
from .participant import (
    ActivateStart,
    AuditError,
    Complete,
    CongruenceViolation,
    DecryptFailure,
    Engine,
    Fake,
    NoAdmissibleStep,
    ParticipantError,
    View,
)
from .statecodec import ZERO_HASH
from .statement import StatementRejected

MARKING_NAMES = ("inactive", "active", "completed")


class BridgeError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class ElementMeta(BaseModel):
    id: str
    index: int
    owner: str
    mine: bool
    start: bool
    terminal: bool
    throws_slot: int | None = Field(default=None, serialization_alias="throwsSlot")
    catches_slot: int | None = Field(default=None, serialization_alias="catchesSlot")
    writable_vars: list[str] = Field(default_factory=list, serialization_alias="writableVars")


class MetaOut(BaseModel):
    instance_id: str = Field(serialization_alias="instanceId")
    participant: str
    participant_keys: list[str] = Field(serialization_alias="participantKeys")
    var_names: list[str] = Field(serialization_alias="varNames")
    elements: list[ElementMeta]


class MessageOut(BaseModel):
    slot: int
    throw_id: str = Field(serialization_alias="throwId")
    catch_id: str = Field(serialization_alias="catchId")
    hash: str | None


class StateOut(BaseModel):
    seq: int
    h: str
    markings: list[str]
    vars: dict[str, int]
    messages: list[MessageOut]
    completed: bool


class StepIn(BaseModel):
    kind: str
    element_id: str | None = Field(default=None, alias="elementId")
    vars: dict[str, int] = Field(default_factory=dict)
    message: str | None = None
    message_hex: str | None = Field(default=None, alias="messageHex")


class StepOut(BaseModel):
    seq: int
    h: str


def _action_from(body: StepIn):
    if body.kind == "fake":
        return Fake()
    if body.element_id is None:
        raise BridgeError(400, "BAD_ACTION", f"{body.kind} needs elementId")
    if body.kind == "activate":
        return ActivateStart(body.element_id)
    if body.kind != "complete":
        raise BridgeError(400, "BAD_ACTION", f"unknown action kind {body.kind!r}")
    payload = None
    if body.message_hex is not None:
        try:
            payload = bytes.fromhex(body.message_hex)
        except ValueError:
            raise BridgeError(400, "BAD_ACTION", "messageHex is not hex") from None
    elif body.message is not None:
        payload = body.message.encode()
    return Complete(body.element_id, var_writes=dict(body.vars), message=payload)


def create_bridge_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="workflow bridge")
    # the UI is a static page on another port, so browsers preflight
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    lock = threading.Lock()
    descriptor = engine.descriptor
    starts = frozenset(
        i
        for i in range(len(descriptor.elements))
        if frozenset({(1, i)}) in descriptor.entries_by_row_set
    )
    terminals = frozenset(descriptor.terminal_indices)
    throws = {t: slot for slot, (t, _) in enumerate(descriptor.msg_slots)}
    catches = {c: slot for slot, (_, c) in enumerate(descriptor.msg_slots)}
    writers: dict[int, list[str]] = {}
    for name, idxs in descriptor.var_writers.items():
        for i in idxs:
            writers.setdefault(i, []).append(name)

    @app.exception_handler(BridgeError)
    def bridge_error(request: Request, err: BridgeError):
        return JSONResponse(
            status_code=err.status, content={"code": err.code, "message": err.message}
        )

    def audit_error(err: AuditError) -> BridgeError:
        if isinstance(err, CongruenceViolation):
            return BridgeError(
                500,
                "AUDIT_CONGRUENCE",
                f"record {err.seq} by {err.signer_pk or 'unknown signer'}: {err.detail}",
            )
        if isinstance(err, DecryptFailure):
            return BridgeError(500, "AUDIT_DECRYPT", f"record {err.seq} does not decrypt")
        return BridgeError(500, "AUDIT", str(err))

    def synced_view() -> View:
        try:
            with lock:
                return engine.sync()
        except AuditError as err:
            raise audit_error(err) from None
        except LedgerError as err:
            raise BridgeError(502, err.code, err.message) from None

    def state_out(view: View) -> StateOut:
        state = view.state
        return StateOut(
            seq=view.seq,
            h=view.h.hex(),
            markings=[MARKING_NAMES[m] for m in state.v],
            vars=dict(zip(descriptor.var_names, state.var_values)),
            messages=[
                MessageOut(
                    slot=slot,
                    throw_id=descriptor.elements[t],
                    catch_id=descriptor.elements[c],
                    hash=None if state.msg_hashes[slot] == ZERO_HASH else state.msg_hashes[slot].hex(),
                )
                for slot, (t, c) in enumerate(descriptor.msg_slots)
            ],
            completed=all(state.v[i] == 2 for i in terminals),
        )

    @app.get("/bridge/meta", response_model=MetaOut, response_model_by_alias=True)
    def get_meta() -> MetaOut:
        mine = engine.keypair.pk_hex
        return MetaOut(
            instance_id=engine.instance_id,
            participant=mine,
            participant_keys=sorted(descriptor.participant_keys),
            var_names=list(descriptor.var_names),
            elements=[
                ElementMeta(
                    id=eid,
                    index=i,
                    owner=descriptor.owner_keys[i],
                    mine=descriptor.owner_keys[i] == mine,
                    start=i in starts,
                    terminal=i in terminals,
                    throws_slot=throws.get(i),
                    catches_slot=catches.get(i),
                    writable_vars=sorted(writers.get(i, [])),
                )
                for i, eid in enumerate(descriptor.elements)
            ],
        )

    @app.get("/bridge/state", response_model=StateOut, response_model_by_alias=True)
    def get_state() -> StateOut:
        return state_out(synced_view())

    @app.post("/bridge/step", response_model=StepOut, response_model_by_alias=True)
    def post_step(body: StepIn) -> StepOut:
        action = _action_from(body)
        try:
            with lock:
                record = engine.step(action)
        except NoAdmissibleStep as err:
            raise BridgeError(409, "NO_ADMISSIBLE_STEP", str(err)) from None
        except AuditError as err:
            raise audit_error(err) from None
        except ParticipantError as err:
            raise BridgeError(400, "BAD_ACTION", str(err)) from None
        except StatementRejected as err:
            raise BridgeError(409, err.reason.value, err.detail) from None
        except LedgerError as err:
            raise BridgeError(409, err.code, err.message) from None
        return StepOut(seq=record.seq, h=record.h.hex())

    @app.get("/bridge/events")
    def get_events(
        request: Request,
        limit: int | None = None,
        from_seq: int | None = Query(default=None, alias="from"),
    ) -> StreamingResponse:
        start = from_seq if from_seq is not None else synced_view().seq + 1

        def stream() -> Iterator[str]:
            for record in engine.client.watch(engine.instance_id, start=start, limit=limit):
                try:
                    view = synced_view()
                except BridgeError as err:
                    payload = {"code": err.code, "message": err.message}
                    yield f"event: audit\ndata: {json.dumps(payload)}\n\n"
                    return
                body = state_out(view).model_dump(by_alias=True)
                yield f"data: {json.dumps(body)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
