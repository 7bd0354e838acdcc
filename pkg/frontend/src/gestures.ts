// Geometry editing gestures -> steering messages.
//
// Live drag previews are throttled to at most one move per throttleMs
// (10 per second at the default); releasing the pointer always sends
// exactly one final move with the end position. Scale gestures send only
// the final factor on release: the server applies factors multiplicatively,
// so previews would compound.

import type { ClientSceneModel } from "./model.js";
import type { SceneObjectData } from "./protocol.js";

export type SendFn = (msg: Record<string, unknown>) => void;
export type Clock = () => number;

export class GestureController {
  private dragId: string | null = null;
  private dragStart: [number, number] = [0, 0];
  private objectStart: [number, number] = [0, 0];
  private lastPreviewAt = -Infinity;
  private scaleId: string | null = null;
  private scaleCenter: [number, number] = [0, 0];
  private grabRadius = 0;

  constructor(
    private send: SendFn,
    private model: ClientSceneModel,
    private throttleMs = 100,
    private now: Clock = () => Date.now(),
  ) {}

  beginDrag(objectId: string, at: [number, number]): void {
    const obj = this.model.find(objectId);
    if (!obj) return;
    this.dragId = objectId;
    this.dragStart = at;
    this.objectStart = [...obj.center] as [number, number];
    this.lastPreviewAt = -Infinity;
    this.model.selection = objectId;
  }

  private dragTarget(at: [number, number]): [number, number] {
    return [
      this.objectStart[0] + (at[0] - this.dragStart[0]),
      this.objectStart[1] + (at[1] - this.dragStart[1]),
    ];
  }

  dragTo(at: [number, number]): void {
    if (!this.dragId) return;
    const t = this.now();
    if (t - this.lastPreviewAt < this.throttleMs) return;
    this.lastPreviewAt = t;
    this.model.markPending();
    this.send({
      type: "move_geometry",
      id: this.dragId,
      center: this.dragTarget(at),
    });
  }

  endDrag(at: [number, number]): void {
    if (!this.dragId) return;
    this.model.markPending();
    this.send({
      type: "move_geometry",
      id: this.dragId,
      center: this.dragTarget(at),
    });
    this.dragId = null;
  }

  beginScale(objectId: string, at: [number, number]): void {
    const obj = this.model.find(objectId);
    if (!obj) return;
    this.scaleId = objectId;
    this.scaleCenter = [...obj.center] as [number, number];
    this.grabRadius = Math.max(distance(at, this.scaleCenter), 1e-6);
    this.model.selection = objectId;
  }

  endScale(at: [number, number]): void {
    if (!this.scaleId) return;
    const factor = Math.max(distance(at, this.scaleCenter) / this.grabRadius, 1e-3);
    this.model.markPending();
    this.send({ type: "scale_geometry", id: this.scaleId, factor });
    this.scaleId = null;
  }

  dropFromCatalogue(
    shape: "circle" | "rect",
    at: [number, number],
    kind: "obstacle" | "manikin" = "obstacle",
  ): SceneObjectData {
    const object: SceneObjectData = {
      id: this.model.freshObjectId(kind === "manikin" ? "manikin" : "obj"),
      shape,
      center: at,
      size: shape === "circle" ? 0.08 : [0.12, 0.12],
      kind,
    };
    this.model.markPending();
    this.send({ type: "add_geometry", object });
    return object;
  }

  deleteObject(objectId: string): void {
    this.model.markPending();
    this.send({ type: "delete_geometry", id: objectId });
  }
}

function distance(a: [number, number], b: [number, number]): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}
