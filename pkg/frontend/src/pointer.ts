// Pointer capture to client messages: pointer-down grabs the virtual
// end-effector, drags stream throttled move messages in world coordinates,
// pointer-up releases. The 50 Hz throttle is client-side only; the training
// decimation stays on the server so replaying the message log is exact.

import { clientMessage, type ClientMessage } from "./protocol.js";
import { screenToWorld, type Viewport } from "./world.js";

export const MOVE_RATE_HZ = 50;
const THROTTLE_EPS = 1e-9;

export interface PointerSample {
  type: "down" | "move" | "up";
  t: number;
  sx: number;
  sy: number;
}

export class PointerTracker {
  private captured = false;
  private lastMoveT = Number.NEGATIVE_INFINITY;

  constructor(private readonly vp: Viewport) {}

  get isCaptured(): boolean {
    return this.captured;
  }

  handle(ev: PointerSample): ClientMessage[] {
    if (ev.type === "down") {
      if (this.captured) {
        return [];
      }
      this.captured = true;
      this.lastMoveT = Number.NEGATIVE_INFINITY;
      return [clientMessage("grab", ev.t)];
    }
    if (ev.type === "up") {
      if (!this.captured) {
        return [];
      }
      this.captured = false;
      return [clientMessage("release", ev.t)];
    }
    if (!this.captured) {
      return [];
    }
    if (ev.t - this.lastMoveT < 1 / MOVE_RATE_HZ - THROTTLE_EPS) {
      return [];
    }
    this.lastMoveT = ev.t;
    const world = screenToWorld(this.vp, [ev.sx, ev.sy]);
    return [clientMessage("move", ev.t, { x: [world[0], world[1]] })];
  }
}
