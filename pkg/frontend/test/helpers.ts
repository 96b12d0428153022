import type { Frame, Snapshot } from "../src/protocol.js";
import type { Surface } from "../src/renderer.js";

export function fakeSnapshot(): Snapshot {
  return {
    dungeons: [
      {
        id: "d0", name: "entry", center: [0, 0, 0], floor_altitude: 0,
        footprint: [[-5, 0, -5], [-5, 0, 5], [5, 0, 5], [6, 0, 0], [5, 0, -5]],
        progression_index: 0, connectors: ["c0"],
      },
      {
        id: "d1", name: "hall", center: [14, 0, 0], floor_altitude: 0,
        footprint: [[9, 0, -5], [9, 0, 5], [19, 0, 5], [19, 0, -5], [14, 0, -7]],
        progression_index: 1, connectors: ["c0"],
      },
    ],
    connectors: [{
      id: "c0", kind: "gate", endpoints: ["d0", "d1"],
      portal: [[7, 0, -1.5], [7, 0, 1.5], [7, 3.4, 1.5], [7, 3.4, -1.5]],
      attach_a: [6, 0, 0], attach_b: [9, 0, 0], width_a: 3.4, width_b: 3.4,
    }],
    elements: [
      { id: "e0", category: "wall", dungeon: "d0", center: [-5, 2, 0], radius: 5 },
      { id: "e1", category: "column", dungeon: "d0", center: [2, 2, 2], radius: 2 },
      { id: "e2", category: "wall", dungeon: "d1", center: [19, 2, 0], radius: 5 },
      { id: "e3", category: "torch", dungeon: "d1", center: [10, 2, 4], radius: 0.4 },
    ],
    lights: [{ id: "l0", pos: [10, 2.2, 4] }],
    grid: {
      origin_x: -6, origin_z: -8, voxel: 1.0, nx: 4, nz: 3,
      mid_layer: ["1100", "0010", "0001"],
    },
    tick_rate: 60,
  };
}

export function fakeFrame(partial: Partial<Frame> = {}): Frame {
  return {
    tick: 1,
    player: { pos: [0, 0, 0], heading: [1, 0, 0], dungeon: "d0", flying: false },
    camera: { pos: [-3, 1.8, 0], look: [0, 1.6, 0], phase: "idle", path: [] },
    agents: [{ id: "b1", kind: "bat", pos: [12, 2, 1], heading: [0, 0, 1], mode: "pursue" }],
    serpents: [],
    visible_count: 2,
    visible_dynamic: 0,
    visible_ids: ["e0", "e1"],
    portal_chains: [],
    violations: { camera_clip: 0 },
    ...partial,
  };
}

export interface Recorded {
  polygons: number;
  lines: number;
  circles: { radius: number; stroke: string }[];
  texts: string[];
}

export function recordingSurface(): { surface: Surface; recorded: Recorded } {
  const recorded: Recorded = { polygons: 0, lines: 0, circles: [], texts: [] };
  const surface: Surface = {
    width: 800,
    height: 600,
    clear() {},
    polygon() {
      recorded.polygons += 1;
    },
    line() {
      recorded.lines += 1;
    },
    circle(_c, radius, stroke) {
      recorded.circles.push({ radius, stroke });
    },
    text(s) {
      recorded.texts.push(s);
    },
  };
  return { surface, recorded };
}
