// Client-side state: latest snapshot + latest frame, with stale frames
// dropped so the rendered seq never goes backwards.

import type { Frame, Overlays, ServerMessage, Snapshot } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export class ClientState {
  status: ConnectionStatus = "connecting";
  snapshot: Snapshot | null = null;
  frame: Frame | null = null;
  lastSeq = -1;
  droppedFrames = 0;
  errors: string[] = [];
  overlays: Overlays = { graph: false, voxels: false, portals: false, visible: false };

  handleMessage(msg: ServerMessage): void {
    if (msg.seq <= this.lastSeq) {
      this.droppedFrames += 1;
      return; // stale or duplicate: rendered seq must be monotonic
    }
    this.lastSeq = msg.seq;
    if (msg.type === "snapshot") {
      this.snapshot = msg.payload as Snapshot;
    } else if (msg.type === "frame") {
      this.frame = msg.payload as Frame;
    } else if (msg.type === "error") {
      this.errors.push(String(msg.payload));
    }
  }

  readyToRender(): boolean {
    return this.snapshot !== null;
  }
}
