// The view model is a pure function of the received frame log: `reduce`
// never touches the DOM or the socket, which keeps every game replayable
// and the UI rules unit-testable.

import type { Dot, OutcomeFrame, ServerFrame, Timing } from "./protocol.js";

export type Phase =
  | "connecting"
  | "waiting"
  | "reading"
  | "active"
  | "done"
  | "disconnected";

export interface ChatLine {
  from: 0 | 1;
  text: string;
  ts: number;
}

export interface Notice {
  code: string;
  message: string;
}

export interface ViewModel {
  phase: Phase;
  agent: 0 | 1 | null;
  sessionId: string | null;
  dots: Dot[];
  viewRadius: number;
  timing: Timing | null;
  chat: ChatLine[];
  myTurn: boolean;
  remainingMs: number | null;
  selectOpen: boolean;
  mySelection: number | null;
  outcome: OutcomeFrame | null;
  notices: Notice[];
  unknownFrames: string[]; // no frame type is dropped silently
}

export function initialModel(): ViewModel {
  return {
    phase: "connecting",
    agent: null,
    sessionId: null,
    dots: [],
    viewRadius: 1,
    timing: null,
    chat: [],
    myTurn: false,
    remainingMs: null,
    selectOpen: false,
    mySelection: null,
    outcome: null,
    notices: [],
    unknownFrames: [],
  };
}

export function reduce(vm: ViewModel, frame: ServerFrame): ViewModel {
  const next = { ...vm };
  switch (frame.type) {
    case "ack":
      if (frame.of === "join") {
        next.phase = "waiting";
      } else if (frame.of === "select" && frame.entity_id !== undefined) {
        next.mySelection = frame.entity_id;
      }
      return next;
    case "paired":
      next.phase = "reading";
      next.agent = frame.agent;
      next.sessionId = frame.session_id;
      next.dots = frame.dots;
      next.viewRadius = frame.view_radius;
      next.timing = frame.timing;
      next.myTurn = frame.next_speaker === frame.agent;
      next.remainingMs = frame.timing.reading_ms;
      return next;
    case "message":
      next.chat = [...vm.chat, { from: frame.from, text: frame.text, ts: frame.ts }];
      return next;
    case "turn":
      next.myTurn = vm.agent !== null && frame.next_speaker === vm.agent;
      return next;
    case "tick":
      if (vm.phase === "reading" || vm.phase === "active" || vm.phase === "waiting") {
        next.phase = frame.phase;
      }
      next.remainingMs = frame.remaining_ms;
      next.selectOpen = frame.select_open;
      return next;
    case "outcome":
      next.phase = "done";
      next.outcome = frame;
      next.selectOpen = false;
      return next;
    case "error":
      next.notices = [...vm.notices, { code: frame.code, message: frame.message }];
      return next;
    default: {
      const t = (frame as { type?: string }).type ?? "<untyped>";
      next.unknownFrames = [...vm.unknownFrames, t];
      next.notices = [...vm.notices, { code: "UnknownFrame", message: t }];
      return next;
    }
  }
}

export function onDisconnect(vm: ViewModel): ViewModel {
  if (vm.phase === "done") {
    return vm;
  }
  return { ...vm, phase: "disconnected", myTurn: false, selectOpen: false };
}

// Intent guards: the render layer disables controls with these, and the
// network layer refuses to send when they say no.

export function canSendMessage(vm: ViewModel): boolean {
  return vm.phase === "active" && vm.myTurn;
}

export function canSelect(vm: ViewModel, dotId: number): boolean {
  return (
    vm.phase === "active" &&
    vm.selectOpen &&
    vm.mySelection === null &&
    vm.dots.some((d) => d.id === dotId)
  );
}

export function lockoutRemainingMs(vm: ViewModel): number | null {
  // during the active phase before selection opens: time until it does
  if (vm.phase !== "active" || vm.selectOpen || vm.timing === null ||
      vm.remainingMs === null) {
    return null;
  }
  const elapsed = vm.timing.active_ms - vm.remainingMs;
  return Math.max(0, vm.timing.lockout_ms - elapsed);
}

export function partnerSelection(vm: ViewModel): number | null {
  if (vm.outcome === null || vm.agent === null) {
    return null;
  }
  return vm.outcome.selections[1 - vm.agent] ?? null;
}
