// World/screen geometry. The world is the square [-half, half]^2 mapped
// uniformly onto the canvas with y pointing up; barriers are half-planes
// h(x) = normal . x + offset >= 0 whose boundary lines are clipped to the
// square for drawing.

export type Vec2 = readonly [number, number];

export interface Viewport {
  width: number;
  height: number;
  half: number;
}

function scaleOf(vp: Viewport): number {
  return Math.min(vp.width, vp.height) / (2 * vp.half);
}

export function worldToScreen(vp: Viewport, p: Vec2): [number, number] {
  const s = scaleOf(vp);
  return [vp.width / 2 + p[0] * s, vp.height / 2 - p[1] * s];
}

export function screenToWorld(vp: Viewport, p: Vec2): [number, number] {
  const s = scaleOf(vp);
  return [(p[0] - vp.width / 2) / s, (vp.height / 2 - p[1]) / s];
}

export function worldSquare(half: number): Vec2[] {
  return [
    [-half, -half],
    [half, -half],
    [half, half],
    [-half, half],
  ];
}

export function barrierValue(normal: Vec2, offset: number, p: Vec2): number {
  return normal[0] * p[0] + normal[1] * p[1] + offset;
}

// Boundary line of a half-plane clipped to the world square, or null when
// the line misses it entirely.
export function barrierSegment(
  normal: Vec2,
  offset: number,
  half: number,
): [Vec2, Vec2] | null {
  const nn = normal[0] * normal[0] + normal[1] * normal[1];
  if (nn === 0) {
    return null;
  }
  // Closest point of the line to the origin, then slide along it.
  const p0: Vec2 = [(-offset * normal[0]) / nn, (-offset * normal[1]) / nn];
  const d: Vec2 = [-normal[1], normal[0]];
  let tMin = Number.NEGATIVE_INFINITY;
  let tMax = Number.POSITIVE_INFINITY;
  for (const axis of [0, 1] as const) {
    if (d[axis] === 0) {
      if (p0[axis] < -half || p0[axis] > half) {
        return null;
      }
      continue;
    }
    const t1 = (-half - p0[axis]) / d[axis];
    const t2 = (half - p0[axis]) / d[axis];
    tMin = Math.max(tMin, Math.min(t1, t2));
    tMax = Math.min(tMax, Math.max(t1, t2));
  }
  if (!(tMin <= tMax)) {
    return null;
  }
  return [
    [p0[0] + tMin * d[0], p0[1] + tMin * d[1]],
    [p0[0] + tMax * d[0], p0[1] + tMax * d[1]],
  ];
}

// Part of a convex polygon with h(x) >= 0 (Sutherland-Hodgman, one plane).
export function clipToHalfPlane(poly: Vec2[], normal: Vec2, offset: number): Vec2[] {
  const out: Vec2[] = [];
  for (let i = 0; i < poly.length; i += 1) {
    const a = poly[i];
    const b = poly[(i + 1) % poly.length];
    const ha = barrierValue(normal, offset, a);
    const hb = barrierValue(normal, offset, b);
    if (ha >= 0) {
      out.push(a);
    }
    if ((ha >= 0) !== (hb >= 0)) {
      const t = ha / (ha - hb);
      out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
  }
  return out;
}
