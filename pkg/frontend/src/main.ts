// Browser wiring: canvas viewer, geometry catalogue and browser panels,
// control panel, all talking to the steering server over one WebSocket.

import { JobCard, batchMessage, budgetMessage, fieldMessage, paramsMessage, styleMessage, validateParams } from "./controls.js";
import { GestureController } from "./gestures.js";
import { ClientSceneModel, defaultViewState } from "./model.js";
import { Connection, steerUrl } from "./net.js";
import type { DrawSurface } from "./viewer.js";
import { Viewer, domainToScreen, screenToDomain } from "./viewer.js";
import type { FluidParamsData, FrameMsg, PrimitivesMsg } from "./protocol.js";

class CanvasSurface implements DrawSurface {
  private ctx: CanvasRenderingContext2D;
  private frameCanvas = document.createElement("canvas");

  constructor(private canvas: HTMLCanvasElement) {
    this.ctx = canvas.getContext("2d")!;
  }

  get width(): number {
    return this.canvas.width;
  }

  get height(): number {
    return this.canvas.height;
  }

  blitFrame(pixels: Uint8ClampedArray, w: number, h: number): void {
    this.frameCanvas.width = w;
    this.frameCanvas.height = h;
    const img = new ImageData(w, h);
    img.data.set(pixels);
    this.frameCanvas.getContext("2d")!.putImageData(img, 0, 0);
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.drawImage(this.frameCanvas, 0, 0, this.width, this.height);
  }

  strokePolyline(points: [number, number][], color: string, dashed: boolean): void {
    if (points.length < 2) return;
    this.ctx.save();
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = 1.25;
    this.ctx.setLineDash(dashed ? [6, 4] : []);
    this.ctx.beginPath();
    this.ctx.moveTo(points[0][0], points[0][1]);
    for (const [x, y] of points.slice(1)) this.ctx.lineTo(x, y);
    this.ctx.stroke();
    this.ctx.restore();
  }

  drawArrow(x: number, y: number, dx: number, dy: number, len: number, color: string): void {
    const x1 = x + dx * len;
    const y1 = y + dy * len;
    this.ctx.save();
    this.ctx.strokeStyle = color;
    this.ctx.beginPath();
    this.ctx.moveTo(x, y);
    this.ctx.lineTo(x1, y1);
    const a = Math.atan2(dy, dx);
    for (const side of [-1, 1]) {
      this.ctx.moveTo(x1, y1);
      this.ctx.lineTo(
        x1 - 0.35 * len * Math.cos(a + side * 0.5),
        y1 - 0.35 * len * Math.sin(a + side * 0.5),
      );
    }
    this.ctx.stroke();
    this.ctx.restore();
  }

  drawLegend(lines: string[]): void {
    this.ctx.save();
    this.ctx.fillStyle = "rgba(255,255,255,0.75)";
    this.ctx.fillRect(8, 8, 170, 16 * lines.length + 10);
    this.ctx.fillStyle = "#111";
    this.ctx.font = "12px monospace";
    lines.forEach((line, i) => this.ctx.fillText(line, 14, 24 + 16 * i));
    this.ctx.restore();
  }
}

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function toast(text: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = text;
  box.style.opacity = "1";
  setTimeout(() => (box.style.opacity = "0"), 3000);
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("viewer");
  const surface = new CanvasSurface(canvas);
  const viewer = new Viewer(surface);
  const model = new ClientSceneModel();
  const view = defaultViewState();
  const jobCard = new JobCard();

  const params = new URLSearchParams(window.location.search);
  const url = steerUrl(
    window.location.hostname,
    params.get("port") ?? window.location.port,
    params.get("token") ?? undefined,
  );
  const conn = new Connection(url);
  const gestures = new GestureController((m) => conn.send(m), model);

  let lastFrame: { msg: FrameMsg; pixels: Uint8Array } | null = null;
  let lastPrimitives: PrimitivesMsg | null = null;

  const repaint = () => {
    if (!lastFrame) return;
    viewer.renderFrame(lastFrame.msg, lastFrame.pixels);
    if (lastPrimitives) viewer.renderPrimitives(lastPrimitives);
    drawSelection();
  };

  const drawSelection = () => {
    if (!model.selection) return;
    const obj = model.find(model.selection);
    if (!obj) return;
    const [sx, sy] = domainToScreen(obj.center, surface.width, surface.height);
    const r = obj.shape === "circle"
      ? (obj.size as number) * surface.width
      : Math.max(...(obj.size as [number, number])) * surface.width * 0.5;
    surface.strokePolyline(
      [
        [sx - r, sy - r], [sx + r, sy - r], [sx + r, sy + r],
        [sx - r, sy + r], [sx - r, sy - r],
      ],
      "#ff8800",
      true,
    );
  };

  conn.onopen = () => {
    conn.send({ type: "hello" });
    conn.send({ type: "subscribe" });
  };

  conn.onmessage = ({ header, payload }) => {
    switch (header.type) {
      case "scene_ack":
        model.applyAck(header);
        renderBrowserPanel();
        el<HTMLSpanElement>("version").textContent = `v${header.version}`;
        break;
      case "error":
        toast(`${header.code}: ${header.text}`);
        break;
      case "frame":
        if (payload && model.acceptFrame(header)) {
          lastFrame = { msg: header, pixels: payload };
          lastPrimitives = null;
          repaint();
        }
        break;
      case "primitives":
        if (model.acceptPrimitives(header)) {
          lastPrimitives = header;
          repaint();
        }
        break;
      case "level_done":
        el<HTMLSpanElement>("status").textContent =
          `level ${header.level} done, residual ${header.residual.toExponential(2)}`;
        break;
      case "job":
        jobCard.update(header);
        el<HTMLSpanElement>("jobcard").textContent = jobCard.label();
        break;
      case "snapshot_info":
        toast(`snapshot written: ${header.dump_path}`);
        break;
    }
  };

  // --- geometry browser / catalogue -------------------------------------

  const renderBrowserPanel = () => {
    const list = el<HTMLUListElement>("objects");
    list.innerHTML = "";
    for (const obj of model.scene?.objects ?? []) {
      const li = document.createElement("li");
      li.textContent = `${obj.id} (${obj.shape}, ${obj.kind})`;
      if (obj.id === model.selection) li.classList.add("selected");
      li.onclick = () => {
        model.selection = obj.id;
        renderBrowserPanel();
        renderPropertyPanel();
        repaint();
      };
      const del = document.createElement("button");
      del.textContent = "x";
      del.onclick = (ev) => {
        ev.stopPropagation();
        gestures.deleteObject(obj.id);
      };
      li.appendChild(del);
      list.appendChild(li);
    }
    renderPropertyPanel();
  };

  const renderPropertyPanel = () => {
    const panel = el<HTMLPreElement>("properties");
    const obj = model.selection ? model.find(model.selection) : null;
    panel.textContent = obj ? JSON.stringify(obj, null, 2) : "nothing selected";
  };

  el<HTMLButtonElement>("add-circle").onclick = () =>
    gestures.dropFromCatalogue("circle", [0.5, 0.5]);
  el<HTMLButtonElement>("add-rect").onclick = () =>
    gestures.dropFromCatalogue("rect", [0.5, 0.5]);
  el<HTMLButtonElement>("add-manikin").onclick = () =>
    gestures.dropFromCatalogue("circle", [0.5, 0.5], "manikin");

  // --- pointer gestures ---------------------------------------------------

  const toDomain = (ev: PointerEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    return screenToDomain(
      [
        ((ev.clientX - rect.left) / rect.width) * surface.width,
        ((ev.clientY - rect.top) / rect.height) * surface.height,
      ],
      surface.width,
      surface.height,
    );
  };

  canvas.onpointerdown = (ev) => {
    const p = toDomain(ev);
    const hit = model.hitTest(p);
    if (!hit) {
      model.selection = null;
      renderBrowserPanel();
      return;
    }
    canvas.setPointerCapture(ev.pointerId);
    if (ev.shiftKey) gestures.beginScale(hit.id, p);
    else gestures.beginDrag(hit.id, p);
    renderBrowserPanel();
  };
  canvas.onpointermove = (ev) => {
    if (ev.buttons & 1 && !ev.shiftKey) gestures.dragTo(toDomain(ev));
  };
  canvas.onpointerup = (ev) => {
    const p = toDomain(ev);
    if (ev.shiftKey) gestures.endScale(p);
    else gestures.endDrag(p);
  };

  // --- control panel --------------------------------------------------------

  const readParams = (): FluidParamsData => ({
    tau: Number(el<HTMLInputElement>("tau").value),
    body_force: [Number(el<HTMLInputElement>("force-x").value), 0],
    inflow_velocity: [
      Number(el<HTMLInputElement>("inflow-x").value),
      Number(el<HTMLInputElement>("inflow-y").value),
    ],
    ambient_temp: Number(el<HTMLInputElement>("ambient").value),
    thermal_diffusivity: Number(el<HTMLInputElement>("diffusivity").value),
  });

  el<HTMLButtonElement>("apply-params").onclick = () => {
    const p = readParams();
    const problem = validateParams(p);
    if (problem) {
      toast(problem);
      return;
    }
    model.markPending();
    conn.send(paramsMessage(p));
  };

  const budget = el<HTMLInputElement>("budget");
  budget.onchange = () => conn.send(budgetMessage(Number(budget.value)));

  el<HTMLSelectElement>("field").onchange = (ev) => {
    const name = (ev.target as HTMLSelectElement).value;
    view.field = Number(fieldMessage(name).field);
    conn.send(fieldMessage(name));
  };

  el<HTMLSelectElement>("technique").onchange = (ev) => {
    view.technique = (ev.target as HTMLSelectElement).value as typeof view.technique;
    conn.send(styleMessage(view.technique, { seed_count: view.seedCount }));
  };

  el<HTMLButtonElement>("run-batch").onclick = () => {
    const level = Number(el<HTMLInputElement>("batch-level").value);
    const steps = Number(el<HTMLInputElement>("batch-steps").value);
    try {
      conn.send(batchMessage(level, steps));
    } catch (err) {
      toast(String(err));
    }
  };

  el<HTMLButtonElement>("snapshot").onclick = () => conn.send({ type: "snapshot" });
}

window.addEventListener("DOMContentLoaded", main);
