// Wire protocol mirrored from the simulation server: text frames carrying
// JSON {type, seq, payload}, server seq strictly increasing.

export type Vec3 = [number, number, number];

export interface SnapshotDungeon {
  id: string;
  name: string;
  center: Vec3;
  floor_altitude: number;
  footprint: Vec3[];
  progression_index: number;
  connectors: string[];
}

export interface SnapshotConnector {
  id: string;
  kind: string;
  endpoints: [string, string];
  portal: Vec3[];
  attach_a: Vec3;
  attach_b: Vec3;
  width_a: number;
  width_b: number;
}

export interface SnapshotElement {
  id: string;
  category: string;
  dungeon: string;
  center: Vec3;
  radius: number;
}

export interface GridSummary {
  origin_x: number;
  origin_z: number;
  voxel: number;
  nx: number;
  nz: number;
  mid_layer: string[];
}

export interface Snapshot {
  dungeons: SnapshotDungeon[];
  connectors: SnapshotConnector[];
  elements: SnapshotElement[];
  lights: { id: string; pos: Vec3 }[];
  grid: GridSummary;
  tick_rate: number;
}

export interface FrameAgent {
  id: string;
  kind: string;
  pos: Vec3;
  heading: Vec3;
  mode: string;
}

export interface Frame {
  tick: number;
  player: { pos: Vec3; heading: Vec3; dungeon: string | null; flying: boolean };
  camera: {
    pos: Vec3 | null;
    look: Vec3 | null;
    phase: string;
    path: Vec3[];
  };
  agents: FrameAgent[];
  serpents: { id: string; segments: Vec3[] }[];
  visible_count: number;
  visible_dynamic: number;
  visible_ids: string[];
  portal_chains: { dungeon: string; depth: number; portal: Vec3[] }[];
  violations: Record<string, number>;
}

export interface ServerMessage {
  type: "snapshot" | "frame" | "error";
  seq: number;
  payload: Snapshot | Frame | string;
}

export interface Overlays {
  graph: boolean;
  voxels: boolean;
  portals: boolean;
  visible: boolean;
}

export interface CameraTweaks {
  altitude?: number;
  distance?: number;
  down_angle?: number;
}

export interface InputPayload {
  move?: [number, number];
  fly?: boolean;
  land?: boolean;
  camera?: CameraTweaks;
  overlays?: Overlays;
}

export interface InputMessage {
  type: "input";
  seq: number;
  payload: InputPayload;
}
