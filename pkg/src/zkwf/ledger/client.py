"""Uniform ledger access for participants.

InProcessClient talks to a Ledger object directly; HttpClient speaks
the service's JSON contract.  Both raise LedgerError with the same
codes, so engines never care which one they hold.
"""

from __future__ import annotations

import json
from typing import Iterator, Protocol

import httpx

from .core import InstanceMeta, Ledger, LedgerError, LedgerRecord


class LedgerClient(Protocol):
    def deploy(
        self,
        instance_id: str,
        backend_id: str,
        evaluation_key: bytes,
        participant_keys: list[str],
        h: bytes,
        ciphertext: bytes,
        sig: bytes,
    ) -> LedgerRecord: ...

    def submit_update(
        self, instance_id: str, h: bytes, ciphertext: bytes, sig: bytes, proof: bytes
    ) -> LedgerRecord: ...

    def get_meta(self, instance_id: str) -> InstanceMeta: ...

    def get_state(self, instance_id: str) -> LedgerRecord: ...

    def get_history(self, instance_id: str, start: int = 0) -> list[LedgerRecord]: ...

    def watch(
        self, instance_id: str, start: int = 0, limit: int | None = None
    ) -> Iterator[LedgerRecord]: ...


class InProcessClient:
    def __init__(self, ledger: Ledger):
        self._ledger = ledger

    def deploy(self, instance_id, backend_id, evaluation_key, participant_keys, h, ciphertext, sig):
        return self._ledger.deploy(
            instance_id, backend_id, evaluation_key, participant_keys, h, ciphertext, sig
        )

    def submit_update(self, instance_id, h, ciphertext, sig, proof):
        return self._ledger.submit_update(instance_id, h, ciphertext, sig, proof)

    def get_meta(self, instance_id):
        return self._ledger.meta(instance_id)

    def get_state(self, instance_id):
        return self._ledger.get_state(instance_id)

    def get_history(self, instance_id, start=0):
        return self._ledger.get_history(instance_id, start)

    def watch(self, instance_id, start=0, limit=None):
        subscription = self._ledger.subscribe(instance_id, start)
        sent = 0
        try:
            while limit is None or sent < limit:
                record = subscription.get(timeout=0.5)
                if record is not None:
                    yield record
                    sent += 1
        finally:
            subscription.close()


class HttpClient:
    def __init__(self, base_url: str = "", http: httpx.Client | None = None):
        self._http = http or httpx.Client(base_url=base_url, timeout=30.0)

    def close(self) -> None:
        self._http.close()

    def _result(self, response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                body = response.json()
                raise LedgerError(body["code"], body["message"])
            except (json.JSONDecodeError, KeyError):
                raise LedgerError("HTTP_ERROR", f"status {response.status_code}")
        return response.json()

    def deploy(self, instance_id, backend_id, evaluation_key, participant_keys, h, ciphertext, sig):
        body = {
            "instanceId": instance_id,
            "backendId": backend_id,
            "evaluationKey": evaluation_key.hex(),
            "participantKeys": list(participant_keys),
            "h": h.hex(),
            "ciphertext": ciphertext.hex(),
            "sig": sig.hex(),
        }
        return LedgerRecord.from_jsonable(self._result(self._http.post("/instances", json=body)))

    def submit_update(self, instance_id, h, ciphertext, sig, proof):
        body = {
            "h": h.hex(),
            "ciphertext": ciphertext.hex(),
            "sig": sig.hex(),
            "proof": proof.hex(),
        }
        return LedgerRecord.from_jsonable(
            self._result(self._http.post(f"/instances/{instance_id}/updates", json=body))
        )

    def get_meta(self, instance_id):
        data = self._result(self._http.get(f"/instances/{instance_id}"))
        return InstanceMeta(
            instance_id=data["instanceId"],
            backend_id=data["backendId"],
            evaluation_key=bytes.fromhex(data["evaluationKey"]),
            participant_keys=tuple(data["participantKeys"]),
        )

    def get_state(self, instance_id):
        return LedgerRecord.from_jsonable(
            self._result(self._http.get(f"/instances/{instance_id}/state"))
        )

    def get_history(self, instance_id, start=0):
        data = self._result(
            self._http.get(f"/instances/{instance_id}/history", params={"from": start})
        )
        return [LedgerRecord.from_jsonable(r) for r in data["records"]]

    def watch(self, instance_id, start=0, limit=None):
        params = {"from": start}
        if limit is not None:
            params["limit"] = limit
        with self._http.stream(
            "GET", f"/instances/{instance_id}/events", params=params
        ) as response:
            if response.status_code >= 400:
                raise LedgerError("HTTP_ERROR", f"status {response.status_code}")
            for line in response.iter_lines():
                if line.startswith("data: "):
                    yield LedgerRecord.from_jsonable(json.loads(line[len("data: "):]))
