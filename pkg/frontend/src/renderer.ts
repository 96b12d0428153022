// Top-down vector rendering of the world and the live frame.  Draws against
// a minimal 2D surface interface so tests can count primitives without a DOM.

import type { Frame, Overlays, Snapshot, Vec3 } from "./protocol.js";

export interface Surface {
  width: number;
  height: number;
  clear(color: string): void;
  polygon(points: [number, number][], stroke: string, fill: string | null,
          lineWidth: number): void;
  line(a: [number, number], b: [number, number], color: string,
       lineWidth: number): void;
  circle(center: [number, number], radius: number, stroke: string,
         fill: string | null): void;
  text(s: string, at: [number, number], color: string): void;
}

export interface RenderStats {
  dungeonsDrawn: number;
  highlightedElements: number;
  dimmedElements: number;
  portalBeams: number;
  graphEdges: number;
  voxelCells: number;
  agentsDrawn: number;
}

const KIND_COLORS: Record<string, string> = {
  bat: "#c678dd",
  scorpion: "#e5c07b",
  serpent_head: "#98c379",
  mummy: "#56b6c2",
};

export class Viewport {
  scale = 1.0;
  offsetX = 0;
  offsetY = 0;

  fit(snapshot: Snapshot, width: number, height: number): void {
    let minX = Infinity, maxX = -Infinity, minZ = Infinity, maxZ = -Infinity;
    for (const d of snapshot.dungeons) {
      for (const [x, , z] of d.footprint) {
        minX = Math.min(minX, x);
        maxX = Math.max(maxX, x);
        minZ = Math.min(minZ, z);
        maxZ = Math.max(maxZ, z);
      }
    }
    const pad = 3.0;
    const w = maxX - minX + 2 * pad;
    const h = maxZ - minZ + 2 * pad;
    this.scale = Math.min(width / w, height / h);
    this.offsetX = (minX - pad);
    this.offsetY = (minZ - pad);
  }

  toScreen([x, , z]: Vec3): [number, number] {
    return [(x - this.offsetX) * this.scale, (z - this.offsetY) * this.scale];
  }
}

export function renderFrame(surface: Surface, snapshot: Snapshot,
                            frame: Frame | null, overlays: Overlays,
                            viewport?: Viewport): RenderStats {
  const vp = viewport ?? new Viewport();
  if (!viewport) {
    vp.fit(snapshot, surface.width, surface.height);
  }
  const stats: RenderStats = {
    dungeonsDrawn: 0, highlightedElements: 0, dimmedElements: 0,
    portalBeams: 0, graphEdges: 0, voxelCells: 0, agentsDrawn: 0,
  };
  surface.clear("#15151c");

  for (const dungeon of snapshot.dungeons) {
    surface.polygon(dungeon.footprint.map((v) => vp.toScreen(v)),
                    "#6e6a86", "#201f2b", 1.5);
    stats.dungeonsDrawn += 1;
  }
  for (const conn of snapshot.connectors) {
    surface.line(vp.toScreen(conn.attach_a), vp.toScreen(conn.attach_b),
                 "#6e6a86", Math.max(1, conn.width_a * vp.scale * 0.5));
  }

  if (overlays.voxels) {
    const g = snapshot.grid;
    for (let iz = 0; iz < g.nz; iz += 1) {
      const row = g.mid_layer[iz];
      for (let ix = 0; ix < g.nx; ix += 1) {
        if (row[ix] === "1") {
          const x = g.origin_x + (ix + 0.5) * g.voxel;
          const z = g.origin_z + (iz + 0.5) * g.voxel;
          surface.circle(vp.toScreen([x, 0, z]), g.voxel * vp.scale * 0.4,
                         "#3b3f51", "#3b3f51");
          stats.voxelCells += 1;
        }
      }
    }
  }

  if (overlays.graph) {
    const centers = new Map(snapshot.dungeons.map((d) => [d.id, d.center]));
    for (const conn of snapshot.connectors) {
      const a = centers.get(conn.endpoints[0]);
      const b = centers.get(conn.endpoints[1]);
      if (a && b) {
        surface.line(vp.toScreen(a), vp.toScreen(b), "#56b6c2", 1);
        stats.graphEdges += 1;
      }
    }
    for (const d of snapshot.dungeons) {
      surface.text(d.name, vp.toScreen(d.center), "#9aa0b6");
    }
  }

  const visible = new Set(frame?.visible_ids ?? []);
  if (overlays.visible && frame) {
    for (const elem of snapshot.elements) {
      const at = vp.toScreen(elem.center);
      if (visible.has(elem.id)) {
        surface.circle(at, Math.max(2, elem.radius * vp.scale * 0.3),
                       "#e5c07b", null);
        stats.highlightedElements += 1;
      } else {
        surface.circle(at, Math.max(1, elem.radius * vp.scale * 0.15),
                       "#343848", null);
        stats.dimmedElements += 1;
      }
    }
  }

  if (frame) {
    if (overlays.portals && frame.camera.pos) {
      const apex = vp.toScreen(frame.camera.pos);
      for (const chain of frame.portal_chains) {
        const pts = chain.portal.map((v) => vp.toScreen(v));
        surface.polygon(pts, "#98c379", null, 1);
        for (const p of pts) {
          surface.line(apex, p, "#98c37955", 1);
        }
        stats.portalBeams += 1;
      }
    }
    for (const agent of frame.agents) {
      const at = vp.toScreen(agent.pos);
      surface.circle(at, 4, KIND_COLORS[agent.kind] ?? "#aaaaaa",
                     KIND_COLORS[agent.kind] ?? "#aaaaaa");
      const tip: Vec3 = [agent.pos[0] + agent.heading[0] * 0.8, 0,
                         agent.pos[2] + agent.heading[2] * 0.8];
      surface.line(at, vp.toScreen(tip), "#ffffff", 1);
      stats.agentsDrawn += 1;
    }
    for (const serpent of frame.serpents) {
      for (const seg of serpent.segments) {
        surface.circle(vp.toScreen(seg), 3, "#98c379", null);
      }
    }
    const p = vp.toScreen(frame.player.pos);
    surface.circle(p, 5, "#61afef", "#61afef");
    const ptip: Vec3 = [frame.player.pos[0] + frame.player.heading[0] * 1.2, 0,
                        frame.player.pos[2] + frame.player.heading[2] * 1.2];
    surface.line(p, vp.toScreen(ptip), "#ffffff", 2);
    stats.agentsDrawn += 1;
    if (frame.camera.pos) {
      const c = vp.toScreen(frame.camera.pos);
      surface.circle(c, 5, "#e06c75", null);
      if (frame.camera.look) {
        surface.line(c, vp.toScreen(frame.camera.look), "#e06c7588", 1);
      }
      for (let i = 0; i + 1 < frame.camera.path.length; i += 1) {
        surface.line(vp.toScreen(frame.camera.path[i]),
                     vp.toScreen(frame.camera.path[i + 1]), "#e06c7544", 1);
      }
    }
  } else {
    surface.text("waiting for first frame...", [12, 20], "#9aa0b6");
  }
  return stats;
}
