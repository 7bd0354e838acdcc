// Flow viewer: blits the raster, strokes polylines and glyph arrows in
// screen space, and draws the legend. All actual pixel work goes through
// the DrawSurface interface so the rendering logic tests without a DOM.

import type { FrameMsg, PrimitivesMsg } from "./protocol.js";
import { FIELD_NAMES } from "./protocol.js";

export interface DrawSurface {
  readonly width: number;
  readonly height: number;
  blitFrame(pixels: Uint8ClampedArray, w: number, h: number): void;
  strokePolyline(points: [number, number][], color: string, dashed: boolean): void;
  drawArrow(x: number, y: number, dx: number, dy: number, len: number, color: string): void;
  drawLegend(lines: string[]): void;
}

export function domainToScreen(
  p: [number, number], width: number, height: number,
): [number, number] {
  return [p[0] * width, (1 - p[1]) * height];
}

export function screenToDomain(
  p: [number, number], width: number, height: number,
): [number, number] {
  return [p[0] / width, 1 - p[1] / height];
}

const KIND_COLORS: Record<string, string> = {
  iso: "#204060",
  streamline: "#103050",
  "streamband-edge": "#105030",
};

export class Viewer {
  private lastFrameAt = 0;

  constructor(private surface: DrawSurface) {}

  renderFrame(msg: FrameMsg, pixels: Uint8Array, now: number = Date.now()): void {
    this.surface.blitFrame(new Uint8ClampedArray(pixels.buffer.slice(0)), msg.w, msg.h);
    const age = this.lastFrameAt ? now - this.lastFrameAt : 0;
    this.lastFrameAt = now;
    this.surface.drawLegend([
      `field: ${FIELD_NAMES[msg.field] ?? msg.field}`,
      `level: ${msg.level}`,
      `seq: ${msg.seq} (v${msg.version})`,
      `frame gap: ${age.toFixed(0)} ms`,
    ]);
  }

  renderPrimitives(msg: PrimitivesMsg): void {
    const { width, height } = this.surface;
    for (const line of msg.polylines) {
      const pts = line.points.map((p) =>
        domainToScreen(p as [number, number], width, height),
      );
      const dashed = line.kind === "streamband-edge";
      this.surface.strokePolyline(pts, KIND_COLORS[line.kind] ?? "#000000", dashed);
    }
    const arrowLen = Math.max(6, width / 48);
    for (const g of msg.glyphs) {
      const [x, y] = domainToScreen(g.anchor, width, height);
      // screen y grows downward, so the y component flips
      this.surface.drawArrow(x, y, g.dir[0], -g.dir[1], arrowLen, "#202020");
    }
  }
}
