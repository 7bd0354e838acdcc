// Wire framing shared with the steering server: a u32 little-endian JSON
// header length, the JSON header, then an optional binary payload whose
// size the header carries in payload_bytes. One framed message per
// WebSocket binary message.

export interface SceneObjectData {
  id: string;
  shape: "circle" | "rect";
  center: [number, number];
  size: number | [number, number];
  kind: "obstacle" | "manikin";
}

export interface FluidParamsData {
  tau: number;
  body_force: [number, number];
  inflow_velocity: [number, number];
  ambient_temp: number;
  thermal_diffusivity: number;
}

export interface PlanData {
  base_resolution: [number, number];
  refinement_ratio: number;
  max_level: number;
  budget_ms: number;
  steps_per_check: number;
}

export interface SceneData {
  objects: SceneObjectData[];
  params: FluidParamsData;
  plan: PlanData;
  boundary: string;
}

export interface FrameMsg {
  type: "frame";
  seq: number;
  version: number;
  level: number;
  field: number;
  w: number;
  h: number;
  payload_bytes: number;
}

export interface SceneAck {
  type: "scene_ack";
  version: number;
  scene: SceneData;
  style?: { field: number; technique: string };
}

export interface ErrorMsg {
  type: "error";
  code: string;
  text: string;
  version: number;
}

export interface PolylineData {
  kind: string;
  tag: number;
  points: [number, number][];
}

export interface GlyphData {
  anchor: [number, number];
  dir: [number, number];
  mag: number;
}

export interface PrimitivesMsg {
  type: "primitives";
  version: number;
  level: number;
  polylines: PolylineData[];
  glyphs: GlyphData[];
}

export interface LevelDoneMsg {
  type: "level_done";
  version: number;
  level: number;
  residual: number;
  elapsed_ms: number;
  steps: number;
}

export interface JobMsg {
  type: "job";
  id: number;
  state: "Queued" | "Running" | "Done" | "Failed";
  error: string;
  version: number;
}

export interface SnapshotInfoMsg {
  type: "snapshot_info";
  version: number;
  level: number;
  field: number;
  dump_path: string;
}

export type ServerMessage =
  | FrameMsg
  | SceneAck
  | ErrorMsg
  | PrimitivesMsg
  | LevelDoneMsg
  | JobMsg
  | SnapshotInfoMsg;

export interface Decoded {
  header: ServerMessage;
  payload: Uint8Array | null;
}

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder();

export function encodeMessage(header: Record<string, unknown>, payload?: Uint8Array): ArrayBuffer {
  const withLen = payload ? { ...header, payload_bytes: payload.byteLength } : header;
  const head = textEncoder.encode(JSON.stringify(withLen));
  const out = new Uint8Array(4 + head.byteLength + (payload ? payload.byteLength : 0));
  new DataView(out.buffer).setUint32(0, head.byteLength, true);
  out.set(head, 4);
  if (payload) out.set(payload, 4 + head.byteLength);
  return out.buffer;
}

export function decodeMessage(data: ArrayBuffer | Uint8Array): Decoded {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  if (bytes.byteLength < 4) throw new Error("truncated message");
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const headerLen = view.getUint32(0, true);
  if (4 + headerLen > bytes.byteLength) throw new Error("truncated header");
  const header = JSON.parse(
    textDecoder.decode(bytes.subarray(4, 4 + headerLen)),
  ) as ServerMessage;
  const payloadBytes = (header as { payload_bytes?: number }).payload_bytes ?? 0;
  let payload: Uint8Array | null = null;
  if (payloadBytes > 0) {
    if (4 + headerLen + payloadBytes > bytes.byteLength) throw new Error("truncated payload");
    payload = bytes.slice(4 + headerLen, 4 + headerLen + payloadBytes);
  }
  return { header, payload };
}

export const FIELD_NAMES: Record<number, string> = {
  0: "pressure",
  1: "velocity-x",
  2: "velocity-y",
  3: "temperature",
};

export const FIELD_IDS: Record<string, number> = Object.fromEntries(
  Object.entries(FIELD_NAMES).map(([k, v]) => [v, Number(k)]),
);
