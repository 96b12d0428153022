// End-to-end round trip against the real simulation server: 120 forward-move
// inputs, asserting monotone player advance, at least one visible-count
// change as portals come into view, and highlight counts that match the
// frame payload on every frame.

import { spawn, ChildProcess, execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ClientState } from "../src/state.js";
import { InputTracker } from "../src/input.js";
import { renderFrame } from "../src/renderer.js";
import { recordingSurface } from "./helpers.js";
import type { Frame, ServerMessage, Snapshot } from "../src/protocol.js";

const ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PORT = 18731;

let server: ChildProcess | null = null;

function pythonConfig(dir: string): { world: string; grids: string } {
  const config = {
    dungeons: [
      { id: "d0", side_count: 6, radius: [6.0, 7.5], progression_index: 0,
        has_columns: false },
      { id: "d1", side_count: 5, radius: [6.0, 7.0], progression_index: 1,
        has_columns: false },
    ],
    connections: [["d0", "d1", "gate"]],
  };
  const cfgPath = join(dir, "config.json");
  const worldPath = join(dir, "world.json");
  const gridsPath = join(dir, "grids.json");
  writeFileSync(cfgPath, JSON.stringify(config));
  execFileSync("python3", ["-m", "dungeonworld", "generate",
    "--config", cfgPath, "--seed", "33", "--out", worldPath], { cwd: ROOT });
  execFileSync("python3", ["-m", "dungeonworld", "voxelize",
    "--world", worldPath, "--out", gridsPath, "--layers", "4"], { cwd: ROOT });
  return { world: worldPath, grids: gridsPath };
}

describe("viewer round trip", () => {
  let snapshot: Snapshot;

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "dwviewer-"));
    const { world, grids } = pythonConfig(dir);
    server = spawn("python3", ["-m", "dungeonworld", "serve",
      "--world", world, "--grids", grids, "--port", String(PORT),
      "--max-ticks", "5000"], { cwd: ROOT, stdio: ["ignore", "pipe", "pipe"] });
    await new Promise<void>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("server start timeout")), 30000);
      server!.stdout!.on("data", (chunk: Buffer) => {
        if (chunk.toString().includes("serving on")) {
          clearTimeout(timer);
          resolve();
        }
      });
      server!.stderr!.on("data", (chunk: Buffer) => {
        process.stderr.write(chunk);
      });
    });
  }, 60000);

  afterAll(() => {
    server?.kill();
  });

  it("advances the player and tracks visibility through a portal", async () => {
    const state = new ClientState();
    const input = new InputTracker();
    const ws = new WebSocket(`ws://127.0.0.1:${PORT}`);
    const frames: Frame[] = [];

    await new Promise<void>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("round trip timeout")), 90000);
      let sentInputs = 0;
      let moveDir: [number, number] | null = null;

      ws.on("message", (raw) => {
        const msg = JSON.parse(String(raw)) as ServerMessage;
        state.handleMessage(msg);
        if (msg.type === "snapshot") {
          snapshot = msg.payload as Snapshot;
          // steer through the gate: from d0's center toward d1's center
          const d0 = snapshot.dungeons.find((d) => d.id === "d0")!;
          const d1 = snapshot.dungeons.find((d) => d.id === "d1")!;
          const dx = d1.center[0] - d0.center[0];
          const dz = d1.center[2] - d0.center[2];
          const n = Math.hypot(dx, dz);
          moveDir = [dx / n, dz / n];
          return;
        }
        if (msg.type !== "frame") return;
        const frame = msg.payload as Frame;
        frames.push(frame);
        if (moveDir && sentInputs < 120) {
          ws.send(JSON.stringify({
            type: "input", seq: sentInputs + 1,
            payload: { move: moveDir },
          }));
          sentInputs += 1;
        }
        // enough frames to cover the 120 inputs plus settling time
        if (frames.length >= 260) {
          clearTimeout(timer);
          ws.close();
          resolve();
        }
      });
      ws.on("error", reject);
    });

    expect(state.readyToRender()).toBe(true);
    expect(frames.length).toBeGreaterThanOrEqual(260);

    // player position advances monotonically along the steering direction
    // (non-strictly: early frames predate the first input)
    const d0 = snapshot.dungeons.find((d) => d.id === "d0")!;
    const d1 = snapshot.dungeons.find((d) => d.id === "d1")!;
    const dir = [d1.center[0] - d0.center[0], d1.center[2] - d0.center[2]];
    const norm = Math.hypot(dir[0], dir[1]);
    const along = frames.map((f) =>
      (f.player.pos[0] * dir[0] + f.player.pos[2] * dir[1]) / norm);
    let regressions = 0;
    for (let i = 1; i < along.length; i += 1) {
      if (along[i] < along[i - 1] - 1e-6) regressions += 1;
    }
    expect(regressions).toBe(0);
    expect(along[along.length - 1] - along[0]).toBeGreaterThan(3.0);

    // at least one visible-count change as the portal comes into view
    const counts = new Set(frames.map((f) => f.visible_count));
    expect(counts.size).toBeGreaterThan(1);

    // highlighted element count equals the frame payload on every frame
    for (const frame of frames) {
      const { surface } = recordingSurface();
      const stats = renderFrame(surface, snapshot, frame,
        { graph: false, voxels: false, portals: false, visible: true });
      expect(stats.highlightedElements).toBe(frame.visible_ids.length);
      expect(frame.visible_count).toBe(frame.visible_ids.length);
    }

    // server sequence numbers strictly increase
    expect(state.droppedFrames).toBe(0);
  }, 120000);
});
