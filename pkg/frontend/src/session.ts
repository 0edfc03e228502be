// Session state and its reducer.  Everything the page shows derives from
// this structure, and the reducer is pure: replaying the same event list
// over initialSession() reproduces the identical view.

import type { BridgeFault, Meta, StateView } from "./types.js";

export type Connection = "connecting" | "live" | "lost";

export interface TimelineEntry {
  seq: number;
  summary: string;
}

export interface Toast {
  ok: boolean;
  text: string;
}

export interface Session {
  meta: Meta | null;
  state: StateView | null;
  timeline: TimelineEntry[];
  connection: Connection;
  alarm: BridgeFault | null;
  toast: Toast | null;
  inputs: Record<string, string>;
  pending: string | null;
}

export type SessionEvent =
  | { type: "meta"; meta: Meta }
  | { type: "state"; state: StateView }
  | { type: "connection"; status: Connection }
  | { type: "audit"; fault: BridgeFault }
  | { type: "submitted"; target: string }
  | { type: "verdict"; ok: boolean; text: string; clearPrefix?: string }
  | { type: "input"; field: string; value: string };

export function initialSession(): Session {
  return {
    meta: null,
    state: null,
    timeline: [],
    connection: "connecting",
    alarm: null,
    toast: null,
    inputs: {},
    pending: null,
  };
}

export function reduce(session: Session, event: SessionEvent): Session {
  switch (event.type) {
    case "meta":
      return { ...session, meta: event.meta };
    case "state": {
      if (session.state && event.state.seq <= session.state.seq) return session;
      const entry: TimelineEntry = {
        seq: event.state.seq,
        summary: describeDelta(session.meta, session.state, event.state),
      };
      return {
        ...session,
        state: event.state,
        timeline: [...session.timeline, entry],
      };
    }
    case "connection":
      return { ...session, connection: event.status };
    case "audit":
      return { ...session, alarm: event.fault, connection: "lost" };
    case "submitted":
      return { ...session, pending: event.target, toast: null };
    case "verdict": {
      let inputs = session.inputs;
      if (event.ok && event.clearPrefix) {
        inputs = Object.fromEntries(
          Object.entries(inputs).filter(([key]) => !key.startsWith(event.clearPrefix + ".")),
        );
      }
      return { ...session, pending: null, toast: { ok: event.ok, text: event.text }, inputs };
    }
    case "input":
      return { ...session, inputs: { ...session.inputs, [event.field]: event.value } };
  }
}

function describeDelta(meta: Meta | null, prev: StateView | null, next: StateView): string {
  if (next.seq === 0) return "genesis";
  if (!prev) return "joined at this point";
  const parts: string[] = [];
  const ids = meta ? meta.elements.map((e) => e.id) : next.markings.map((_, i) => `#${i}`);
  next.markings.forEach((marking, i) => {
    const before = prev.markings[i];
    if (before !== undefined && before !== marking) {
      parts.push(`${ids[i] ?? `#${i}`} ${before} → ${marking}`);
    }
  });
  for (const [name, value] of Object.entries(next.vars)) {
    if (prev.vars[name] !== value) parts.push(`${name} := ${value}`);
  }
  next.messages.forEach((slot, i) => {
    const before = prev.messages[i];
    if (before && before.hash === null && slot.hash !== null) {
      parts.push(`message ${slot.throwId} → ${slot.catchId}`);
    }
  });
  if (parts.length === 0) return "cover step (fresh commitment only)";
  return parts.join(", ");
}

// True when the participant may act on the element right now.
export function canActivate(session: Session, elementId: string): boolean {
  const el = session.meta?.elements.find((e) => e.id === elementId);
  const idx = el?.index;
  if (!el || !el.mine || !el.start || idx === undefined || !session.state) return false;
  return session.state.markings[idx] === "inactive";
}

export function canComplete(session: Session, elementId: string): boolean {
  const el = session.meta?.elements.find((e) => e.id === elementId);
  const idx = el?.index;
  if (!el || !el.mine || idx === undefined || !session.state) return false;
  return session.state.markings[idx] === "active";
}
