import { describe, expect, it } from "vitest";

import { renderFrame } from "../src/renderer.js";
import { fakeFrame, fakeSnapshot, recordingSurface } from "./helpers.js";

const OFF = { graph: false, voxels: false, portals: false, visible: false };

describe("renderFrame", () => {
  it("draws geometry and agent markers with all overlays off", () => {
    const { surface, recorded } = recordingSurface();
    const stats = renderFrame(surface, fakeSnapshot(), fakeFrame(), OFF);
    expect(stats.dungeonsDrawn).toBe(2);
    expect(stats.agentsDrawn).toBe(2); // bat + player
    expect(stats.highlightedElements).toBe(0);
    expect(stats.portalBeams).toBe(0);
    expect(recorded.polygons).toBeGreaterThanOrEqual(2);
  });

  it("highlighted count equals the frame visible id payload", () => {
    const { surface } = recordingSurface();
    const frame = fakeFrame({ visible_ids: ["e0", "e2", "e3"], visible_count: 3 });
    const stats = renderFrame(surface, fakeSnapshot(), frame,
                              { ...OFF, visible: true });
    expect(stats.highlightedElements).toBe(3);
    expect(stats.dimmedElements).toBe(fakeSnapshot().elements.length - 3);
  });

  it("portal beams match the chain payload count", () => {
    const { surface } = recordingSurface();
    const frame = fakeFrame({
      portal_chains: [
        { dungeon: "d1", depth: 1,
          portal: [[7, 0, -1.5], [7, 0, 1.5], [7, 3.4, 1.5], [7, 3.4, -1.5]] },
        { dungeon: "d0", depth: 2,
          portal: [[7, 0, -1.5], [7, 0, 1.5], [7, 3.4, 1.5], [7, 3.4, -1.5]] },
      ],
    });
    const stats = renderFrame(surface, fakeSnapshot(), frame,
                              { ...OFF, portals: true });
    expect(stats.portalBeams).toBe(2);
  });

  it("graph overlay draws one edge per connector plus labels", () => {
    const { surface, recorded } = recordingSurface();
    const stats = renderFrame(surface, fakeSnapshot(), fakeFrame(),
                              { ...OFF, graph: true });
    expect(stats.graphEdges).toBe(1);
    expect(recorded.texts).toContain("entry");
    expect(recorded.texts).toContain("hall");
  });

  it("voxel overlay draws exactly the solid mid-layer cells", () => {
    const { surface } = recordingSurface();
    const stats = renderFrame(surface, fakeSnapshot(), fakeFrame(),
                              { ...OFF, voxels: true });
    expect(stats.voxelCells).toBe(4); // "1100" + "0010" + "0001"
  });

  it("renders a waiting indicator without a frame", () => {
    const { surface, recorded } = recordingSurface();
    renderFrame(surface, fakeSnapshot(), null, OFF);
    expect(recorded.texts.some((t) => t.includes("waiting"))).toBe(true);
  });
});
