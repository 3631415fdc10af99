import { describe, expect, it } from "vitest";

import type { ServerMessage } from "../src/protocol.js";
import {
  applyServerMessage,
  emptyViewModel,
  TRAIL_LIMIT,
  type ViewModel,
} from "../src/viewmodel.js";
import type { Vec2 } from "../src/world.js";

function stateMsg(t: number, x: number[], h: number[] = []): ServerMessage {
  return {
    v: 1,
    kind: "state",
    t,
    payload: {
      x,
      u: [0, 0],
      h_values: h,
      active_ids: [],
      mode: "execute",
      goal_index: 0,
      goal: [0, 0],
      captures: 2,
      fault: "",
    },
  };
}

function barrierMsg(
  kind: "barrier_added" | "barrier_refined",
  id: string,
  normal: number[],
  offset: number,
): ServerMessage {
  return { v: 1, kind, t: 1, payload: { barrier: { id, normal, offset, gain: 10 } } };
}

describe("view model reduction", () => {
  it("renders a barrier only after the server acknowledges it", () => {
    const vm0 = emptyViewModel(1.2);
    expect(vm0.barriers).toEqual([]);
    const vm1 = applyServerMessage(vm0, barrierMsg("barrier_added", "b1", [0, -1], 1));
    expect(vm1.barriers.length).toBe(1);
    const b = vm1.barriers[0];
    expect(b.id).toBe("b1");
    expect(b.segment).not.toBeNull();
    const [p, q] = b.segment as [Vec2, Vec2];
    expect(p[1]).toBeCloseTo(1, 12);
    expect(q[1]).toBeCloseTo(1, 12);
  });

  it("never mutates the previous view model", () => {
    const vm0 = emptyViewModel(1.2);
    const before = JSON.stringify(vm0);
    const vm1 = applyServerMessage(vm0, barrierMsg("barrier_added", "b1", [1, 0], 0.8));
    applyServerMessage(vm1, stateMsg(0.01, [0.1, 0.2], [0.5]));
    expect(JSON.stringify(vm0)).toBe(before);
    expect(vm1).not.toBe(vm0);
  });

  it("replaces geometry on refinement and drops it on removal", () => {
    let vm = emptyViewModel(1.2);
    vm = applyServerMessage(vm, barrierMsg("barrier_added", "b1", [0, -1], 1));
    vm = applyServerMessage(vm, barrierMsg("barrier_refined", "b1", [0, -1], 0.5));
    expect(vm.barriers.length).toBe(1);
    const [p] = vm.barriers[0].segment as [Vec2, Vec2];
    expect(p[1]).toBeCloseTo(0.5, 12);
    vm = applyServerMessage(vm, {
      v: 1,
      kind: "barrier_removed",
      t: 2,
      payload: { id: "b1" },
    });
    expect(vm.barriers).toEqual([]);
  });

  it("ignores barriers from non-planar scenarios", () => {
    const vm = applyServerMessage(
      emptyViewModel(1.2),
      barrierMsg("barrier_added", "b1", [0, 0, 1], 0.3),
    );
    expect(vm.barriers).toEqual([]);
  });

  it("tracks state, min h, and a bounded trail", () => {
    let vm = emptyViewModel(1.2);
    for (let k = 0; k < TRAIL_LIMIT + 50; k += 1) {
      vm = applyServerMessage(vm, stateMsg(0.01 * k, [0.001 * k, 0], [0.4, -0.02]));
    }
    expect(vm.x).toEqual([0.001 * (TRAIL_LIMIT + 49), 0]);
    expect(vm.minH).toBe(-0.02);
    expect(vm.captures).toBe(2);
    expect(vm.goal).toEqual([0, 0]);
    expect(vm.trail.length).toBe(TRAIL_LIMIT);
    expect(vm.trail[0]).toEqual([0.001 * 50, 0]);
  });

  it("reports min h as null with no barriers", () => {
    const vm = applyServerMessage(emptyViewModel(1.2), stateMsg(0, [0, 0], []));
    expect(vm.minH).toBeNull();
  });

  it("surfaces error banners and fault flags", () => {
    let vm: ViewModel = emptyViewModel(1.2);
    vm = applyServerMessage(vm, {
      v: 1,
      kind: "error",
      t: 3,
      payload: { message: "fit discarded: coincident points" },
    });
    expect(vm.banner).toMatch(/fit discarded/);
    expect(vm.fault).toBe("");
    vm = applyServerMessage(vm, {
      v: 1,
      kind: "error",
      t: 4,
      payload: { message: "filter infeasible", fault: true },
    });
    expect(vm.fault).toBe("filter infeasible");
  });
});
