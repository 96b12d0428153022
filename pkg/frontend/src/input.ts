// Keyboard + slider state folded into input messages, one per client tick,
// with idle suppression (no message when nothing changed and nothing held).

import type { CameraTweaks, InputMessage, InputPayload, Overlays } from "./protocol.js";

const KEY_VECTORS: Record<string, [number, number]> = {
  KeyW: [0, 1],
  ArrowUp: [0, 1],
  KeyS: [0, -1],
  ArrowDown: [0, -1],
  KeyA: [-1, 0],
  ArrowLeft: [-1, 0],
  KeyD: [1, 0],
  ArrowRight: [1, 0],
};

export class InputTracker {
  private held = new Set<string>();
  private lastMove: [number, number] = [0, 0];
  private lastCamera: CameraTweaks = {};
  private pendingCamera: CameraTweaks = {};
  private pendingFly: boolean | null = null;
  private pendingLand = false;
  private pendingOverlays: Overlays | null = null;
  private seq = 0;

  keyDown(code: string): void {
    if (code in KEY_VECTORS) this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  setCamera(tweaks: CameraTweaks): void {
    this.pendingCamera = { ...this.pendingCamera, ...tweaks };
  }

  toggleFly(on: boolean): void {
    this.pendingFly = on;
  }

  requestLand(): void {
    this.pendingLand = true;
  }

  setOverlays(overlays: Overlays): void {
    this.pendingOverlays = { ...overlays };
  }

  moveVector(): [number, number] {
    let x = 0;
    let z = 0;
    for (const code of this.held) {
      const [dx, dz] = KEY_VECTORS[code];
      x += dx;
      z += dz;
    }
    const n = Math.hypot(x, z);
    return n > 0 ? [x / n, z / n] : [0, 0];
  }

  /** Next input message, or null when idle (nothing held, nothing changed). */
  nextMessage(): InputMessage | null {
    const move = this.moveVector();
    const payload: InputPayload = {};
    const moving = move[0] !== 0 || move[1] !== 0;
    const moveChanged = move[0] !== this.lastMove[0] || move[1] !== this.lastMove[1];
    if (moving || moveChanged) {
      payload.move = move;
    }
    const cameraChanged: CameraTweaks = {};
    for (const key of ["altitude", "distance", "down_angle"] as const) {
      const v = this.pendingCamera[key];
      if (v !== undefined && v !== this.lastCamera[key]) {
        cameraChanged[key] = v;
      }
    }
    if (Object.keys(cameraChanged).length > 0) {
      payload.camera = cameraChanged;
    }
    if (this.pendingFly !== null) {
      payload.fly = this.pendingFly;
    }
    if (this.pendingLand) {
      payload.land = true;
    }
    if (this.pendingOverlays !== null) {
      payload.overlays = this.pendingOverlays;
    }
    this.pendingCamera = {};
    this.pendingFly = null;
    this.pendingLand = false;
    this.pendingOverlays = null;
    if (Object.keys(payload).length === 0) {
      return null; // idle suppression
    }
    this.lastMove = move;
    if (payload.camera) {
      this.lastCamera = { ...this.lastCamera, ...payload.camera };
    }
    this.seq += 1;
    return { type: "input", seq: this.seq, payload };
  }
}
