// Hand-built bridge payloads for tests that run without a live bridge.
// Shape mirrors a two-pool model with one message slot.

import type { Marking, Meta, StateView } from "../src/types.js";

export const ME = "aa".repeat(32);
export const PEER = "bb".repeat(32);

export function makeMeta(): Meta {
  return {
    instanceId: "unit-1",
    participant: ME,
    participantKeys: [ME, PEER].sort(),
    varNames: ["total"],
    elements: [
      { id: "draft", index: 0, owner: ME, mine: true, start: true, terminal: false, throwsSlot: null, catchesSlot: null, writableVars: ["total"] },
      { id: "send", index: 1, owner: ME, mine: true, start: false, terminal: false, throwsSlot: 0, catchesSlot: null, writableVars: [] },
      { id: "done", index: 2, owner: ME, mine: true, start: false, terminal: true, throwsSlot: null, catchesSlot: null, writableVars: [] },
      { id: "inbox", index: 3, owner: PEER, mine: false, start: true, terminal: false, throwsSlot: null, catchesSlot: null, writableVars: [] },
      { id: "receive", index: 4, owner: PEER, mine: false, start: false, terminal: false, throwsSlot: null, catchesSlot: 0, writableVars: [] },
      { id: "close", index: 5, owner: PEER, mine: false, start: false, terminal: true, throwsSlot: null, catchesSlot: null, writableVars: [] },
    ],
  };
}

export function makeState(
  seq: number,
  markings: Marking[],
  extra: Partial<Pick<StateView, "vars" | "messages" | "completed">> = {},
): StateView {
  return {
    seq,
    h: seq.toString(16).padStart(64, "0"),
    markings,
    vars: extra.vars ?? { total: 0 },
    messages: extra.messages ?? [{ slot: 0, throwId: "send", catchId: "receive", hash: null }],
    completed: extra.completed ?? false,
  };
}

export const GENESIS = makeState(0, [
  "inactive",
  "inactive",
  "inactive",
  "inactive",
  "inactive",
  "inactive",
]);
