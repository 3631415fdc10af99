// Wiring: URL query -> session endpoint, pointer events -> tracker ->
// socket, server messages -> view model, requestAnimationFrame -> render.

import { Connection } from "./net.js";
import { PointerTracker, type PointerSample } from "./pointer.js";
import { clientMessage } from "./protocol.js";
import { applyServerMessage, emptyViewModel, type ViewModel } from "./viewmodel.js";
import { render } from "./render.js";
import type { Viewport } from "./world.js";

const WORLD_HALF = 1.2;

function sessionUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const explicit = params.get("ws");
  if (explicit !== null) {
    return explicit;
  }
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${window.location.host}/ws`;
}

function main(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("canvas 2d context unavailable");
  }

  const vp: Viewport = { width: canvas.width, height: canvas.height, half: WORLD_HALF };
  let vm: ViewModel = emptyViewModel(WORLD_HALF);
  const tracker = new PointerTracker(vp);

  const conn = new Connection(sessionUrl(), {
    onMessage: (msg) => {
      vm = applyServerMessage(vm, msg);
    },
    onStatus: (connected, note) => {
      vm = { ...vm, banner: connected && note === "connected" ? null : note };
    },
  });

  const sample = (type: PointerSample["type"], ev: PointerEvent): PointerSample => {
    const rect = canvas.getBoundingClientRect();
    return {
      type,
      t: performance.now() / 1000,
      sx: ((ev.clientX - rect.left) / rect.width) * canvas.width,
      sy: ((ev.clientY - rect.top) / rect.height) * canvas.height,
    };
  };
  const forward = (s: PointerSample): void => {
    for (const msg of tracker.handle(s)) {
      conn.send(msg);
    }
  };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    forward(sample("down", ev));
  });
  canvas.addEventListener("pointermove", (ev) => forward(sample("move", ev)));
  canvas.addEventListener("pointerup", (ev) => forward(sample("up", ev)));
  canvas.addEventListener("pointercancel", (ev) => forward(sample("up", ev)));

  const resetButton = document.getElementById("reset");
  resetButton?.addEventListener("click", () => {
    conn.send(clientMessage("reset", 0));
  });

  const frame = (): void => {
    render(ctx, vp, vm, tracker.isCaptured);
    window.requestAnimationFrame(frame);
  };
  window.requestAnimationFrame(frame);
}

main();
