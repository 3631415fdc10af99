// Render state derived solely from server messages plus the local pointer
// flag. The reducer is pure and never mutates its input; barriers change
// only on server acknowledgement, there is no client-side physics.

import type { BarrierPayload, ServerMessage, StatePayload } from "./protocol.js";
import { barrierSegment, type Vec2 } from "./world.js";

export const TRAIL_LIMIT = 600;

export interface BarrierView {
  id: string;
  normal: [number, number];
  offset: number;
  gain: number;
  segment: [Vec2, Vec2] | null;
}

export interface ViewModel {
  half: number;
  serverT: number;
  mode: string;
  x: Vec2 | null;
  trail: Vec2[];
  barriers: BarrierView[];
  activeIds: string[];
  goal: Vec2 | null;
  captures: number;
  minH: number | null;
  fault: string;
  banner: string | null;
}

export function emptyViewModel(half: number): ViewModel {
  return {
    half,
    serverT: 0,
    mode: "execute",
    x: null,
    trail: [],
    barriers: [],
    activeIds: [],
    goal: null,
    captures: 0,
    minH: null,
    fault: "",
    banner: null,
  };
}

function isPlanar(values: unknown): values is [number, number] {
  return (
    Array.isArray(values) &&
    values.length === 2 &&
    values.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}

function toBarrierView(payload: BarrierPayload, half: number): BarrierView | null {
  if (!isPlanar(payload.normal)) {
    return null; // 3D scenarios stay CLI-only
  }
  const normal: [number, number] = [payload.normal[0], payload.normal[1]];
  return {
    id: payload.id,
    normal,
    offset: payload.offset,
    gain: payload.gain,
    segment: barrierSegment(normal, payload.offset, half),
  };
}

function applyState(vm: ViewModel, t: number, state: StatePayload): ViewModel {
  const next: ViewModel = { ...vm, serverT: t };
  next.mode = state.mode;
  next.captures = state.captures;
  next.activeIds = [...state.active_ids];
  next.minH = state.h_values.length ? Math.min(...state.h_values) : null;
  next.goal = isPlanar(state.goal) ? [state.goal[0], state.goal[1]] : null;
  next.fault = state.fault ? String(state.fault) : "";
  if (isPlanar(state.x)) {
    next.x = [state.x[0], state.x[1]];
    next.trail = [...vm.trail, next.x].slice(-TRAIL_LIMIT);
  }
  return next;
}

export function applyServerMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  switch (msg.kind) {
    case "state":
      return applyState(vm, msg.t, msg.payload as unknown as StatePayload);
    case "barrier_added":
    case "barrier_refined": {
      const view = toBarrierView(
        (msg.payload as { barrier: BarrierPayload }).barrier,
        vm.half,
      );
      if (view === null) {
        return vm;
      }
      const rest = vm.barriers.filter((b) => b.id !== view.id);
      return { ...vm, serverT: msg.t, barriers: [...rest, view] };
    }
    case "barrier_removed": {
      const id = msg.payload.id as string;
      return {
        ...vm,
        serverT: msg.t,
        barriers: vm.barriers.filter((b) => b.id !== id),
      };
    }
    case "error": {
      const text = String(msg.payload.message ?? "server error");
      const fault = msg.payload.fault ? text : vm.fault;
      return { ...vm, serverT: msg.t, banner: text, fault };
    }
    case "event":
      return { ...vm, serverT: msg.t };
    default:
      return vm;
  }
}
