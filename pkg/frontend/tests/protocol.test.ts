import { describe, expect, it } from "vitest";

import { FIELD_IDS, decodeMessage, encodeMessage } from "../src/protocol.js";
import type { FrameMsg } from "../src/protocol.js";

describe("protocol codec", () => {
  it("round-trips a header-only message", () => {
    const buf = encodeMessage({ type: "subscribe" });
    const { header, payload } = decodeMessage(buf);
    expect(header).toEqual({ type: "subscribe" });
    expect(payload).toBeNull();
  });

  it("round-trips a message with binary payload", () => {
    const body = new Uint8Array([1, 2, 3, 250, 251, 252]);
    const buf = encodeMessage({ type: "frame", w: 3, h: 2 }, body);
    const { header, payload } = decodeMessage(buf);
    expect((header as FrameMsg).payload_bytes).toBe(6);
    expect(Array.from(payload!)).toEqual([1, 2, 3, 250, 251, 252]);
  });

  it("uses little-endian header length", () => {
    const buf = new Uint8Array(encodeMessage({ type: "x" }));
    const expectedLen = JSON.stringify({ type: "x" }).length;
    expect(buf[0]).toBe(expectedLen);
    expect(buf[1]).toBe(0);
    expect(buf[2]).toBe(0);
    expect(buf[3]).toBe(0);
  });

  it("rejects truncated buffers", () => {
    const buf = new Uint8Array(encodeMessage({ type: "frame" }, new Uint8Array(4)));
    expect(() => decodeMessage(buf.subarray(0, buf.byteLength - 2))).toThrow();
  });

  it("maps the pressure field to the density field id", () => {
    expect(FIELD_IDS["pressure"]).toBe(0);
    expect(FIELD_IDS["temperature"]).toBe(3);
  });
});
