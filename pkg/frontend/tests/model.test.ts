import { describe, expect, it } from "vitest";

import { ClientSceneModel } from "../src/model.js";
import type { FrameMsg, PrimitivesMsg, SceneAck, SceneData } from "../src/protocol.js";

function sceneData(ids: string[] = ["a"]): SceneData {
  return {
    objects: ids.map((id) => ({
      id,
      shape: "circle",
      center: [0.5, 0.5],
      size: 0.1,
      kind: "obstacle",
    })),
    params: {
      tau: 0.8,
      body_force: [0, 0],
      inflow_velocity: [0.05, 0],
      ambient_temp: 25,
      thermal_diffusivity: 0.05,
    },
    plan: {
      base_resolution: [48, 48],
      refinement_ratio: 2,
      max_level: 2,
      budget_ms: 2000,
      steps_per_check: 16,
    },
    boundary: "channel",
  };
}

function ack(version: number): SceneAck {
  return { type: "scene_ack", version, scene: sceneData() };
}

function frame(seq: number, version: number): FrameMsg {
  return { type: "frame", seq, version, level: 0, field: 1, w: 4, h: 4, payload_bytes: 64 };
}

function prims(version: number): PrimitivesMsg {
  return { type: "primitives", version, level: 0, polylines: [], glyphs: [] };
}

describe("version hygiene", () => {
  it("discards frames older than the last ack", () => {
    const m = new ClientSceneModel();
    m.applyAck(ack(3));
    expect(m.acceptFrame(frame(10, 2))).toBe(false);
    expect(m.acceptFrame(frame(11, 3))).toBe(true);
  });

  it("never lets an older seq overdraw a newer frame", () => {
    const m = new ClientSceneModel();
    m.applyAck(ack(1));
    expect(m.acceptFrame(frame(5, 1))).toBe(true);
    expect(m.acceptFrame(frame(4, 1))).toBe(false);
    expect(m.acceptFrame(frame(6, 1))).toBe(true);
  });

  it("never mixes primitives and frame from different versions", () => {
    const m = new ClientSceneModel();
    m.applyAck(ack(1));
    expect(m.acceptFrame(frame(1, 1))).toBe(true);
    m.applyAck(ack(2));
    expect(m.acceptPrimitives(prims(1))).toBe(false); // stale
    expect(m.acceptFrame(frame(2, 2))).toBe(true);
    expect(m.acceptPrimitives(prims(2))).toBe(true);
  });

  it("clears the pending edit flag only on ack", () => {
    const m = new ClientSceneModel();
    m.markPending();
    expect(m.pendingEdit).toBe(true);
    m.applyAck(ack(2));
    expect(m.pendingEdit).toBe(false);
  });

  it("drops the selection when the object disappears", () => {
    const m = new ClientSceneModel();
    m.applyAck({ type: "scene_ack", version: 1, scene: sceneData(["a", "b"]) });
    m.selection = "b";
    m.applyAck({ type: "scene_ack", version: 2, scene: sceneData(["a"]) });
    expect(m.selection).toBeNull();
  });

  it("hit-tests the topmost object", () => {
    const m = new ClientSceneModel();
    m.applyAck({ type: "scene_ack", version: 1, scene: sceneData(["below", "above"]) });
    expect(m.hitTest([0.5, 0.5])?.id).toBe("above");
    expect(m.hitTest([0.9, 0.9])).toBeNull();
  });
});
