// DOM renderer.  Rebuilds the page from the session on every dispatch;
// all nodes come from the mount root's document so tests can supply any
// DOM implementation.

import { canActivate, canComplete, type Session } from "./session.js";
import type { ElementMeta } from "./types.js";

export interface Actions {
  activate(elementId: string): void;
  complete(elementId: string): void;
  fake(): void;
  input(field: string, value: string): void;
}

const shorten = (hex: string) => `${hex.slice(0, 8)}…`;

export function render(root: HTMLElement, session: Session, actions: Actions): void {
  const doc = root.ownerDocument;
  const el = (tag: string, cls?: string, text?: string) => {
    const node = doc.createElement(tag);
    if (cls) node.className = cls;
    if (text !== undefined) node.textContent = text;
    return node;
  };

  root.textContent = "";
  const { meta, state } = session;

  const header = el("header");
  header.appendChild(el("h1", undefined, meta ? `instance ${meta.instanceId}` : "connecting"));
  if (meta) {
    const who = el("span", "who", `you: ${shorten(meta.participant)}`);
    who.title = meta.participant;
    header.appendChild(who);
  }
  const badge = el("span", `conn ${session.connection}`, session.connection);
  badge.setAttribute("data-testid", "connection");
  header.appendChild(badge);
  if (state) {
    header.appendChild(el("span", "seq", `seq ${state.seq}`));
  }
  root.appendChild(header);

  if (session.connection === "lost" && !session.alarm) {
    const banner = el("div", "banner offline", "bridge unreachable, retrying");
    banner.setAttribute("data-testid", "offline");
    root.appendChild(banner);
  }
  if (session.alarm) {
    const banner = el(
      "div",
      "banner alarm",
      `audit alarm ${session.alarm.code}: ${session.alarm.message}`,
    );
    banner.setAttribute("data-testid", "alarm");
    root.appendChild(banner);
  }
  if (session.toast) {
    const toast = el("div", session.toast.ok ? "toast ok" : "toast reject", session.toast.text);
    toast.setAttribute("data-testid", "toast");
    root.appendChild(toast);
  }
  if (state?.completed) {
    const banner = el("div", "banner done", "process completed");
    banner.setAttribute("data-testid", "done");
    root.appendChild(banner);
  }

  if (!meta || !state) {
    root.appendChild(el("p", "hint", "waiting for bridge"));
    return;
  }

  const board = el("section", "board");
  board.appendChild(el("h2", undefined, "elements"));
  const list = el("ul", "elements");
  for (const element of meta.elements) {
    list.appendChild(renderElement(session, element, actions, el));
  }
  board.appendChild(list);
  root.appendChild(board);

  const varsSection = el("section", "vars");
  varsSection.appendChild(el("h2", undefined, "variables"));
  const varsTable = el("table");
  varsTable.setAttribute("data-testid", "vars");
  for (const name of meta.varNames) {
    const row = el("tr");
    row.appendChild(el("td", undefined, name));
    row.appendChild(el("td", "num", String(state.vars[name] ?? 0)));
    varsTable.appendChild(row);
  }
  if (meta.varNames.length === 0) varsTable.appendChild(el("tr")).appendChild(el("td", "hint", "none"));
  varsSection.appendChild(varsTable);
  root.appendChild(varsSection);

  const msgSection = el("section", "messages");
  msgSection.appendChild(el("h2", undefined, "messages"));
  const msgList = el("ul");
  msgList.setAttribute("data-testid", "messages");
  for (const slot of state.messages) {
    const item = el("li", slot.hash ? "sent" : "unsent");
    item.appendChild(el("span", undefined, `${slot.throwId} → ${slot.catchId}: `));
    item.appendChild(el("code", undefined, slot.hash ? shorten(slot.hash) : "no message yet"));
    msgList.appendChild(item);
  }
  if (state.messages.length === 0) msgList.appendChild(el("li", "hint", "none"));
  msgSection.appendChild(msgList);
  root.appendChild(msgSection);

  const controls = el("section", "controls");
  const fake = el("button", "fake", "cover step") as HTMLButtonElement;
  fake.setAttribute("data-testid", "fake");
  fake.addEventListener("click", () => actions.fake());
  controls.appendChild(fake);
  controls.appendChild(
    el("span", "hint", "re-randomizes the commitment without changing state"),
  );
  root.appendChild(controls);

  const timeline = el("section", "timeline");
  timeline.appendChild(el("h2", undefined, "timeline"));
  const log = el("ol");
  log.setAttribute("data-testid", "timeline");
  for (const entry of session.timeline) {
    log.appendChild(el("li", undefined, `seq ${entry.seq}: ${entry.summary}`));
  }
  timeline.appendChild(log);
  root.appendChild(timeline);
}

function renderElement(
  session: Session,
  element: ElementMeta,
  actions: Actions,
  el: (tag: string, cls?: string, text?: string) => HTMLElement,
): HTMLElement {
  const state = session.state!;
  const marking = state.markings[element.index] ?? "inactive";
  const item = el("li", `element ${marking}`);
  item.setAttribute("data-el", element.id);
  item.setAttribute("data-marking", marking);

  item.appendChild(el("span", `dot ${marking}`));
  item.appendChild(el("span", "id", element.id));
  const owner = el("span", element.mine ? "owner mine" : "owner foreign", element.mine ? "you" : shorten(element.owner));
  owner.title = element.owner;
  item.appendChild(owner);
  if (element.terminal) item.appendChild(el("span", "tag", "end"));
  if (element.throwsSlot !== null) item.appendChild(el("span", "tag", "sends"));
  if (element.catchesSlot !== null) item.appendChild(el("span", "tag", "receives"));

  const busy = session.pending !== null;
  if (element.start) {
    const activate = el("button", undefined, "activate") as HTMLButtonElement;
    activate.setAttribute("data-action", "activate");
    activate.disabled = busy || !canActivate(session, element.id);
    if (!element.mine) activate.title = "owned by another participant";
    activate.addEventListener("click", () => actions.activate(element.id));
    item.appendChild(activate);
  }

  const complete = el("button", undefined, "complete") as HTMLButtonElement;
  complete.setAttribute("data-action", "complete");
  complete.disabled = busy || !canComplete(session, element.id);
  if (!element.mine) complete.title = "owned by another participant";
  complete.addEventListener("click", () => actions.complete(element.id));
  item.appendChild(complete);

  const editable = element.mine && marking === "active";
  if (editable && element.writableVars.length > 0) {
    for (const name of element.writableVars) {
      const field = `${element.id}.${name}`;
      const input = el("input") as HTMLInputElement;
      input.type = "text";
      input.placeholder = name;
      input.value = session.inputs[field] ?? "";
      input.setAttribute("data-input", field);
      input.addEventListener("input", () => actions.input(field, input.value));
      item.appendChild(input);
    }
  }
  if (editable && element.throwsSlot !== null) {
    const field = `${element.id}.message`;
    const input = el("input") as HTMLInputElement;
    input.type = "text";
    input.placeholder = "message";
    input.value = session.inputs[field] ?? "";
    input.setAttribute("data-input", field);
    input.addEventListener("input", () => actions.input(field, input.value));
    item.appendChild(input);
  }
  return item;
}
