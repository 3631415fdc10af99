// Wire protocol shared with the gateway: newline-delimited JSON objects,
// every message carrying {v, kind, t, payload}. The console only builds
// client messages and validates server ones; all state logic stays server
// side.

export const PROTOCOL_VERSION = 1;

export const CLIENT_KINDS = [
  "grab",
  "release",
  "move",
  "set_goal",
  "reset",
  "config",
] as const;

export const SERVER_KINDS = [
  "state",
  "barrier_added",
  "barrier_removed",
  "barrier_refined",
  "event",
  "error",
] as const;

export type ClientKind = (typeof CLIENT_KINDS)[number];
export type ServerKind = (typeof SERVER_KINDS)[number];

export interface ClientMessage {
  v: typeof PROTOCOL_VERSION;
  kind: ClientKind;
  t: number;
  payload: Record<string, unknown>;
}

export interface ServerMessage {
  v: number;
  kind: ServerKind;
  t: number;
  payload: Record<string, unknown>;
}

export interface BarrierPayload {
  id: string;
  normal: number[];
  offset: number;
  gain: number;
}

export interface StatePayload {
  x: number[];
  u: number[];
  h_values: number[];
  active_ids: string[];
  mode: string;
  goal_index: number;
  goal: number[] | null;
  captures: number;
  fault: string | boolean;
}

export class ProtocolError extends Error {}

export function clientMessage(
  kind: ClientKind,
  t: number,
  payload: Record<string, unknown> = {},
): ClientMessage {
  return { v: PROTOCOL_VERSION, kind, t, payload };
}

export function serializeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

export function parseServerMessage(raw: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new ProtocolError(`not JSON: ${raw.slice(0, 80)}`);
  }
  if (!isRecord(doc)) {
    throw new ProtocolError("message must be an object");
  }
  if (doc.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(doc.v)}`);
  }
  const kind = doc.kind;
  if (typeof kind !== "string" || !(SERVER_KINDS as readonly string[]).includes(kind)) {
    throw new ProtocolError(`unknown server message kind ${String(kind)}`);
  }
  if (typeof doc.t !== "number" || !Number.isFinite(doc.t)) {
    throw new ProtocolError("message t must be a finite number");
  }
  const payload = doc.payload ?? {};
  if (!isRecord(payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return { v: PROTOCOL_VERSION, kind: kind as ServerKind, t: doc.t, payload };
}
