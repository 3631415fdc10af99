import { describe, expect, it } from "vitest";

import {
  barrierSegment,
  barrierValue,
  clipToHalfPlane,
  screenToWorld,
  worldSquare,
  worldToScreen,
  type Vec2,
  type Viewport,
} from "../src/world.js";

const vp: Viewport = { width: 900, height: 600, half: 1.2 };

describe("coordinate transforms", () => {
  it("round-trips world -> screen -> world within 1e-9", () => {
    const values = [-1.2, -0.73, -0.1, 0, 0.31, 0.999, 1.2];
    for (const x of values) {
      for (const y of values) {
        const [wx, wy] = screenToWorld(vp, worldToScreen(vp, [x, y]));
        expect(Math.abs(wx - x)).toBeLessThanOrEqual(1e-9);
        expect(Math.abs(wy - y)).toBeLessThanOrEqual(1e-9);
      }
    }
  });

  it("round-trips screen -> world -> screen within 1e-9", () => {
    for (const sx of [0, 123.4, 450, 899]) {
      for (const sy of [0, 77.7, 300, 599]) {
        const [bx, by] = worldToScreen(vp, screenToWorld(vp, [sx, sy]));
        expect(Math.abs(bx - sx)).toBeLessThanOrEqual(1e-9);
        expect(Math.abs(by - sy)).toBeLessThanOrEqual(1e-9);
      }
    }
  });

  it("maps the world origin to the canvas center with y up", () => {
    expect(worldToScreen(vp, [0, 0])).toEqual([450, 300]);
    const [, syUp] = worldToScreen(vp, [0, 1]);
    expect(syUp).toBeLessThan(300);
  });
});

describe("barrier boundary segments", () => {
  it("renders h = -y + 1 as the horizontal line y = 1", () => {
    const seg = barrierSegment([0, -1], 1, 1.2);
    expect(seg).not.toBeNull();
    const [p, q] = seg as [Vec2, Vec2];
    expect(p[1]).toBeCloseTo(1, 12);
    expect(q[1]).toBeCloseTo(1, 12);
    const xs = [p[0], q[0]].sort((a, b) => a - b);
    expect(xs[0]).toBeCloseTo(-1.2, 12);
    expect(xs[1]).toBeCloseTo(1.2, 12);
  });

  it("keeps oblique boundaries on the plane and inside the square", () => {
    const normal: Vec2 = [-1 / Math.sqrt(1.09), 0.3 / Math.sqrt(1.09)];
    const offset = 0.4 / Math.sqrt(1.09);
    const seg = barrierSegment(normal, offset, 1.2);
    expect(seg).not.toBeNull();
    for (const p of seg as [Vec2, Vec2]) {
      expect(Math.abs(barrierValue(normal, offset, p))).toBeLessThanOrEqual(1e-12);
      expect(Math.abs(p[0])).toBeLessThanOrEqual(1.2 + 1e-12);
      expect(Math.abs(p[1])).toBeLessThanOrEqual(1.2 + 1e-12);
    }
  });

  it("returns null when the line misses the viewport square", () => {
    expect(barrierSegment([1, 0], -5, 1.2)).toBeNull();
    expect(barrierSegment([0, 1], 9, 1.2)).toBeNull();
  });

  it("returns null for a zero normal", () => {
    expect(barrierSegment([0, 0], 1, 1.2)).toBeNull();
  });
});

describe("half-plane clipping", () => {
  it("clips the square to the admissible side", () => {
    const poly = clipToHalfPlane(worldSquare(1.2), [0, -1], 1);
    expect(poly.length).toBe(4);
    for (const p of poly) {
      expect(p[1]).toBeLessThanOrEqual(1 + 1e-12);
    }
    expect(Math.max(...poly.map((p) => p[1]))).toBeCloseTo(1, 12);
  });

  it("keeps the polygon when fully admissible and empties it when not", () => {
    expect(clipToHalfPlane(worldSquare(1.2), [0, 1], 5).length).toBe(4);
    expect(clipToHalfPlane(worldSquare(1.2), [0, 1], -5).length).toBe(0);
  });
});
