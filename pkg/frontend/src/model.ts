// Client-side mirror of the scene plus the display-version discipline.
//
// The server is authoritative: local state changes only when a scene_ack
// arrives. The viewer never shows a frame or primitives tagged with a scene
// version older than the last ack, never lets an older sequence number
// overdraw a newer frame, and never pairs primitives with a frame from a
// different version.

import type {
  FrameMsg,
  PrimitivesMsg,
  SceneAck,
  SceneData,
  SceneObjectData,
} from "./protocol.js";

export interface ViewState {
  field: number;
  technique: "none" | "iso" | "streamlines" | "streambands" | "glyphs";
  rangeMode: "auto" | "fixed";
  range: [number, number] | null;
  seedCount: number;
}

export function defaultViewState(): ViewState {
  return { field: 1, technique: "none", rangeMode: "auto", range: null, seedCount: 8 };
}

export class ClientSceneModel {
  scene: SceneData | null = null;
  version = 0;
  lastAckVersion = 0;
  pendingEdit = false;
  selection: string | null = null;

  displayedSeq = 0;
  displayedFrameVersion = 0;

  applyAck(msg: SceneAck): void {
    this.scene = msg.scene;
    this.version = msg.version;
    this.lastAckVersion = msg.version;
    this.pendingEdit = false;
    if (this.selection && !msg.scene.objects.some((o) => o.id === this.selection)) {
      this.selection = null;
    }
  }

  markPending(): void {
    this.pendingEdit = true;
  }

  /** True when the frame is fresh enough to display; records it if so. */
  acceptFrame(msg: FrameMsg): boolean {
    if (msg.version < this.lastAckVersion) return false;
    if (msg.seq <= this.displayedSeq) return false;
    this.displayedSeq = msg.seq;
    this.displayedFrameVersion = msg.version;
    return true;
  }

  /** Primitives may decorate only the currently displayed frame's version. */
  acceptPrimitives(msg: PrimitivesMsg): boolean {
    if (msg.version < this.lastAckVersion) return false;
    return msg.version === this.displayedFrameVersion;
  }

  find(id: string): SceneObjectData | undefined {
    return this.scene?.objects.find((o) => o.id === id);
  }

  /** Topmost object whose shape contains the domain point, if any. */
  hitTest(p: [number, number]): SceneObjectData | null {
    if (!this.scene) return null;
    for (let i = this.scene.objects.length - 1; i >= 0; i--) {
      const o = this.scene.objects[i];
      if (objectContains(o, p)) return o;
    }
    return null;
  }

  freshObjectId(prefix: string): string {
    let k = 1;
    while (this.scene?.objects.some((o) => o.id === `${prefix}${k}`)) k += 1;
    return `${prefix}${k}`;
  }
}

export function objectContains(o: SceneObjectData, p: [number, number]): boolean {
  const [x, y] = p;
  const [cx, cy] = o.center;
  if (o.shape === "circle") {
    const r = o.size as number;
    return (x - cx) ** 2 + (y - cy) ** 2 <= r * r;
  }
  const [w, h] = o.size as [number, number];
  return Math.abs(x - cx) <= w / 2 && Math.abs(y - cy) <= h / 2;
}
