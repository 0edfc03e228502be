// Typed client for the participant bridge.  The event stream is read with
// a streaming fetch instead of EventSource so the same code runs in the
// browser and under node-based tests.

import type { BridgeFault, Meta, StateView, StepRequest, StepVerdict } from "./types.js";

export class BridgeError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "BridgeError";
  }
}

export type BridgeEvent =
  | { type: "state"; state: StateView }
  | { type: "audit"; fault: BridgeFault };

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class BridgeClient {
  constructor(
    readonly base: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let fault: BridgeFault = { code: `HTTP_${response.status}`, message: response.statusText };
      try {
        fault = (await response.json()) as BridgeFault;
      } catch {
        // non-JSON error body, keep the status fallback
      }
      throw new BridgeError(response.status, fault.code, fault.message);
    }
    return (await response.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/bridge/meta");
  }

  state(): Promise<StateView> {
    return this.request<StateView>("/bridge/state");
  }

  step(body: StepRequest): Promise<StepVerdict> {
    return this.request<StepVerdict>("/bridge/step", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async *events(from: number, signal?: AbortSignal): AsyncGenerator<BridgeEvent> {
    const response = await this.fetchImpl(`${this.base}/bridge/events?from=${from}`, { signal });
    if (!response.ok || !response.body) {
      throw new BridgeError(response.status, "STREAM_REFUSED", "event stream refused");
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let cut: number;
      while ((cut = buffer.indexOf("\n\n")) >= 0) {
        const parsed = parseSseFrame(buffer.slice(0, cut));
        buffer = buffer.slice(cut + 2);
        if (parsed) yield parsed;
      }
    }
  }
}

export function parseSseFrame(frame: string): BridgeEvent | null {
  let kind = "message";
  const dataLines: string[] = [];
  for (const line of frame.split("\n")) {
    if (line.startsWith("event:")) kind = line.slice(6).trim();
    else if (line.startsWith("data:")) dataLines.push(line.slice(5).trim());
  }
  if (dataLines.length === 0) return null;
  const data = JSON.parse(dataLines.join("\n"));
  if (kind === "audit") return { type: "audit", fault: data as BridgeFault };
  return { type: "state", state: data as StateView };
}
