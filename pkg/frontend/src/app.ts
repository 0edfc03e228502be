// Controller: one bridge client, one event-stream consumer, one render
// target.  Steps are optimistic (pending flag) and reconciled against the
// server verdict; accepted state always arrives through the stream.

import { BridgeClient, BridgeError } from "./api.js";
import { render, type Actions } from "./render.js";
import { initialSession, reduce, type Session, type SessionEvent } from "./session.js";
import type { StepRequest } from "./types.js";

export interface App {
  dispatch(event: SessionEvent): void;
  session(): Session;
  start(): Promise<void>;
  stop(): void;
  submit(body: StepRequest, target: string): Promise<boolean>;
}

export function createApp(
  root: HTMLElement,
  client: BridgeClient,
  opts: { retryMs?: number } = {},
): App {
  let session = initialSession();
  const aborter = new AbortController();

  const actions: Actions = {
    activate: (id) => void submit({ kind: "activate", elementId: id }, id),
    complete: (id) => void submit(completeRequest(session, id), id),
    fake: () => void submit({ kind: "fake" }, "fake"),
    input: (field, value) => dispatch({ type: "input", field, value }),
  };

  function dispatch(event: SessionEvent): void {
    session = reduce(session, event);
    render(root, session, actions);
  }

  async function submit(body: StepRequest, target: string): Promise<boolean> {
    dispatch({ type: "submitted", target });
    try {
      const verdict = await client.step(body);
      dispatch({
        type: "verdict",
        ok: true,
        text: `accepted seq ${verdict.seq}`,
        clearPrefix: body.elementId,
      });
      return true;
    } catch (err) {
      const text =
        err instanceof BridgeError ? `${err.code}: ${err.message}` : "bridge unreachable";
      dispatch({ type: "verdict", ok: false, text });
      return false;
    }
  }

  async function start(): Promise<void> {
    const retryMs = opts.retryMs ?? 2000;
    render(root, session, actions);
    for (;;) {
      if (aborter.signal.aborted) return;
      try {
        if (!session.meta) dispatch({ type: "meta", meta: await client.meta() });
        dispatch({ type: "state", state: await client.state() });
        dispatch({ type: "connection", status: "live" });
        const cursor = session.state!.seq + 1;
        for await (const event of client.events(cursor, aborter.signal)) {
          if (event.type === "state") dispatch({ type: "state", state: event.state });
          else {
            dispatch({ type: "audit", fault: event.fault });
            return;
          }
        }
      } catch (err) {
        if (aborter.signal.aborted) return;
        if (err instanceof BridgeError && err.code.startsWith("AUDIT")) {
          dispatch({ type: "audit", fault: { code: err.code, message: err.message } });
          return;
        }
        dispatch({ type: "connection", status: "lost" });
      }
      if (aborter.signal.aborted) return;
      await sleep(retryMs, aborter.signal);
    }
  }

  return {
    dispatch,
    session: () => session,
    start,
    stop: () => aborter.abort(),
    submit,
  };
}

// Gather the element's form inputs into a step request.
export function completeRequest(session: Session, elementId: string): StepRequest {
  const element = session.meta?.elements.find((e) => e.id === elementId);
  const body: StepRequest = { kind: "complete", elementId };
  if (!element) return body;
  const vars: Record<string, number> = {};
  for (const name of element.writableVars) {
    const raw = session.inputs[`${elementId}.${name}`];
    if (raw === undefined || raw.trim() === "") continue;
    const value = Number(raw);
    if (Number.isSafeInteger(value)) vars[name] = value;
  }
  if (Object.keys(vars).length > 0) body.vars = vars;
  if (element.throwsSlot !== null) {
    body.message = session.inputs[`${elementId}.message`] ?? "";
  }
  return body;
}

function sleep(ms: number, signal: AbortSignal): Promise<void> {
  return new Promise((resolve) => {
    const timer = setTimeout(done, ms);
    signal.addEventListener("abort", done, { once: true });
    function done() {
      clearTimeout(timer);
      resolve();
    }
  });
}
