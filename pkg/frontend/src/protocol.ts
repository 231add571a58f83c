// Wire frames, mirroring docs/protocol.md. Every server frame carries a
// `type` field; anything else is rejected by the reducer as unknown.

export interface Dot {
  id: number;
  x: number;       // view-relative, unit view circle
  y: number;
  size: number;    // canonical range [8, 15]
  color: number;   // grayscale [25, 205], smaller = darker
}

export interface Timing {
  reading_ms: number;
  active_ms: number;
  lockout_ms: number;
}

export interface PairedFrame {
  type: "paired";
  session_id: string;
  agent: 0 | 1;
  observation: { agent: number; rows: number[][]; entity_ids: number[] };
  dots: Dot[];
  view_radius: number;
  timing: Timing;
  started_at: number;
  next_speaker: 0 | 1;
}

export interface MessageFrame {
  type: "message";
  from: 0 | 1;
  text: string;
  ts: number;
}

export interface TurnFrame {
  type: "turn";
  next_speaker: 0 | 1;
  ts: number;
}

export interface TickFrame {
  type: "tick";
  phase: "reading" | "active";
  remaining_ms: number;
  select_open: boolean;
  ts: number;
}

export interface AckFrame {
  type: "ack";
  of: "join" | "select";
  entity_id?: number;
  ts?: number;
}

export interface OutcomeFrame {
  type: "outcome";
  status: "success" | "failure" | "expired";
  selections: (number | null)[];
  ts: number;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  message: string;
}

export type ServerFrame =
  | PairedFrame
  | MessageFrame
  | TurnFrame
  | TickFrame
  | AckFrame
  | OutcomeFrame
  | ErrorFrame;

export type ClientFrame =
  | { type: "join" }
  | { type: "message"; text: string }
  | { type: "select"; entity_id: number };
