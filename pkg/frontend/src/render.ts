// Canvas drawing from the view model: admissible-region shading, barrier
// boundary lines, trajectory ribbon, goal and state markers, and the HUD
// badges. Pure consumer of ViewModel; draws nothing it was not told.

import type { BarrierView, ViewModel } from "./viewmodel.js";
import {
  clipToHalfPlane,
  worldSquare,
  worldToScreen,
  type Vec2,
  type Viewport,
} from "./world.js";

const COLORS = {
  background: "#10141a",
  grid: "#232a33",
  admissible: "rgba(86, 180, 120, 0.12)",
  barrier: "#6ea8dc",
  barrierActive: "#f0a941",
  trail: "rgba(126, 179, 230, 0.55)",
  state: "#e8edf2",
  goal: "#56b478",
  warn: "#e06a6a",
};

function tracePolygon(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  poly: Vec2[],
): void {
  ctx.beginPath();
  poly.forEach((p, i) => {
    const [sx, sy] = worldToScreen(vp, p);
    if (i === 0) {
      ctx.moveTo(sx, sy);
    } else {
      ctx.lineTo(sx, sy);
    }
  });
  ctx.closePath();
}

function drawAdmissibleRegion(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  barriers: BarrierView[],
): void {
  let poly = worldSquare(vp.half);
  for (const b of barriers) {
    poly = clipToHalfPlane(poly, b.normal, b.offset);
    if (poly.length === 0) {
      return;
    }
  }
  tracePolygon(ctx, vp, poly);
  ctx.fillStyle = COLORS.admissible;
  ctx.fill();
}

function drawBarrier(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  b: BarrierView,
  active: boolean,
): void {
  if (b.segment === null) {
    return;
  }
  const [p, q] = b.segment;
  const [px, py] = worldToScreen(vp, p);
  const [qx, qy] = worldToScreen(vp, q);
  ctx.strokeStyle = active ? COLORS.barrierActive : COLORS.barrier;
  ctx.lineWidth = active ? 2.5 : 1.5;
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(qx, qy);
  ctx.stroke();
  // Short tick toward the admissible side.
  const mid: Vec2 = [(p[0] + q[0]) / 2, (p[1] + q[1]) / 2];
  const tip: Vec2 = [mid[0] + 0.06 * b.normal[0], mid[1] + 0.06 * b.normal[1]];
  const [mx, my] = worldToScreen(vp, mid);
  const [tx, ty] = worldToScreen(vp, tip);
  ctx.beginPath();
  ctx.moveTo(mx, my);
  ctx.lineTo(tx, ty);
  ctx.stroke();
}

function drawDot(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  p: Vec2,
  radius: number,
  color: string,
): void {
  const [sx, sy] = worldToScreen(vp, p);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(sx, sy, radius, 0, 2 * Math.PI);
  ctx.fill();
}

export function render(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  vm: ViewModel,
  teaching: boolean,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vp.width, vp.height);

  tracePolygon(ctx, vp, worldSquare(vp.half));
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  ctx.stroke();

  drawAdmissibleRegion(ctx, vp, vm.barriers);
  for (const b of vm.barriers) {
    drawBarrier(ctx, vp, b, vm.activeIds.includes(b.id));
  }

  if (vm.trail.length > 1) {
    ctx.strokeStyle = COLORS.trail;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    vm.trail.forEach((p, i) => {
      const [sx, sy] = worldToScreen(vp, p);
      if (i === 0) {
        ctx.moveTo(sx, sy);
      } else {
        ctx.lineTo(sx, sy);
      }
    });
    ctx.stroke();
  }

  if (vm.goal !== null) {
    drawDot(ctx, vp, vm.goal, 6, COLORS.goal);
  }
  if (vm.x !== null) {
    drawDot(ctx, vp, vm.x, 5, teaching ? COLORS.barrierActive : COLORS.state);
  }

  ctx.font = "13px system-ui, sans-serif";
  ctx.fillStyle = COLORS.state;
  const badge = vm.fault
    ? `FAULT: ${vm.fault}`
    : `${vm.mode}${teaching ? " (holding)" : ""}`;
  ctx.fillText(badge, 12, 20);
  if (vm.minH !== null) {
    ctx.fillStyle = vm.minH < 0 ? COLORS.warn : COLORS.goal;
    ctx.fillText(`min h = ${vm.minH.toFixed(4)}`, 12, 38);
  }
  ctx.fillStyle = COLORS.state;
  ctx.fillText(`captures: ${vm.captures}`, 12, 56);
  if (vm.banner !== null) {
    ctx.fillStyle = COLORS.warn;
    ctx.fillText(vm.banner, 12, vp.height - 12);
  }
}
