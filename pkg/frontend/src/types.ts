// Shapes mirrored from the bridge JSON payloads.

export interface ElementMeta {
  id: string;
  index: number;
  owner: string;
  mine: boolean;
  start: boolean;
  terminal: boolean;
  throwsSlot: number | null;
  catchesSlot: number | null;
  writableVars: string[];
}

export interface Meta {
  instanceId: string;
  participant: string;
  participantKeys: string[];
  varNames: string[];
  elements: ElementMeta[];
}

export type Marking = "inactive" | "active" | "completed";

export interface MessageSlot {
  slot: number;
  throwId: string;
  catchId: string;
  hash: string | null;
}

export interface StateView {
  seq: number;
  h: string;
  markings: Marking[];
  vars: Record<string, number>;
  messages: MessageSlot[];
  completed: boolean;
}

export interface StepRequest {
  kind: "activate" | "complete" | "fake";
  elementId?: string;
  vars?: Record<string, number>;
  message?: string;
}

export interface StepVerdict {
  seq: number;
  h: string;
}

export interface BridgeFault {
  code: string;
  message: string;
}
