"""HTTP face of the ledger: JSON over FastAPI plus an SSE event feed.

Byte-valued fields travel as lowercase hex strings.  Failures come back
as {"code": ..., "message": ...} with a status that matches the code.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field, field_validator

from .core import Ledger, LedgerError, LedgerRecord

_STATUS = {
    "NOT_FOUND": 404,
    "EXISTS": 409,
    "BAD_INSTANCE_ID": 400,
    "BAD_HEX": 400,
    "BAD_GENESIS": 400,
    "BAD_GENESIS_SIG": 400,
    "UNKNOWN_BACKEND": 400,
}


def _hex_field(value: str, name: str) -> bytes:
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise LedgerError("BAD_HEX", f"{name} is not valid hex")


class DeployRequest(BaseModel):
    instance_id: str = Field(alias="instanceId")
    backend_id: str = Field(alias="backendId")
    evaluation_key: str = Field(alias="evaluationKey")
    participant_keys: list[str] = Field(alias="participantKeys")
    h: str
    ciphertext: str
    sig: str

    @field_validator("participant_keys")
    @classmethod
    def _keys_are_hex(cls, keys: list[str]) -> list[str]:
        for key in keys:
            if len(key) != 64 or any(c not in "0123456789abcdef" for c in key):
                raise ValueError("participant keys must be 32-byte lowercase hex")
        return keys


class UpdateRequest(BaseModel):
    h: str
    ciphertext: str
    sig: str
    proof: str


class RecordOut(BaseModel):
    seq: int
    timestamp: float
    kind: str
    h: str
    ciphertext: str
    sig: str
    proof: str | None = None

    @staticmethod
    def from_record(record: LedgerRecord) -> "RecordOut":
        return RecordOut(**record.to_jsonable())


class MetaOut(BaseModel):
    instance_id: str = Field(serialization_alias="instanceId")
    backend_id: str = Field(serialization_alias="backendId")
    evaluation_key: str = Field(serialization_alias="evaluationKey")
    participant_keys: list[str] = Field(serialization_alias="participantKeys")


class HistoryOut(BaseModel):
    records: list[RecordOut]


def create_app(ledger: Ledger) -> FastAPI:
    app = FastAPI(title="zkwf ledger", version="0.1.0")
    app.state.ledger = ledger

    @app.exception_handler(LedgerError)
    async def _ledger_error(_: Request, err: LedgerError) -> JSONResponse:
        status = _STATUS.get(err.code, 422)
        return JSONResponse(
            status_code=status, content={"code": err.code, "message": err.message}
        )

    @app.post("/instances", status_code=201, response_model=RecordOut)
    def deploy(body: DeployRequest) -> RecordOut:
        record = ledger.deploy(
            body.instance_id,
            body.backend_id,
            _hex_field(body.evaluation_key, "evaluationKey"),
            body.participant_keys,
            _hex_field(body.h, "h"),
            _hex_field(body.ciphertext, "ciphertext"),
            _hex_field(body.sig, "sig"),
        )
        return RecordOut.from_record(record)

    @app.get("/instances", response_model=list[str])
    def instances() -> list[str]:
        return ledger.instance_ids()

    @app.get("/instances/{instance_id}", response_model=MetaOut)
    def meta(instance_id: str) -> MetaOut:
        info = ledger.meta(instance_id)
        return MetaOut(
            instance_id=info.instance_id,
            backend_id=info.backend_id,
            evaluation_key=info.evaluation_key.hex(),
            participant_keys=list(info.participant_keys),
        )

    @app.get("/instances/{instance_id}/state", response_model=RecordOut)
    def state(instance_id: str) -> RecordOut:
        return RecordOut.from_record(ledger.get_state(instance_id))

    @app.get("/instances/{instance_id}/history", response_model=HistoryOut)
    def history(
        instance_id: str, start: int = Query(default=0, alias="from", ge=0)
    ) -> HistoryOut:
        records = ledger.get_history(instance_id, start)
        return HistoryOut(records=[RecordOut.from_record(r) for r in records])

    @app.post("/instances/{instance_id}/updates", response_model=RecordOut)
    def update(instance_id: str, body: UpdateRequest) -> RecordOut:
        record = ledger.submit_update(
            instance_id,
            _hex_field(body.h, "h"),
            _hex_field(body.ciphertext, "ciphertext"),
            _hex_field(body.sig, "sig"),
            _hex_field(body.proof, "proof"),
        )
        return RecordOut.from_record(record)

    @app.get("/instances/{instance_id}/events")
    def events(
        instance_id: str,
        start: int = Query(default=0, alias="from", ge=0),
        limit: int | None = Query(default=None, ge=1),
    ) -> StreamingResponse:
        subscription = ledger.subscribe(instance_id, start)

        def stream():
            sent = 0
            try:
                while limit is None or sent < limit:
                    record = subscription.get(timeout=0.5)
                    if record is None:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(record.to_jsonable())}\n\n"
                    sent += 1
            finally:
                subscription.close()

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
