// Control panel logic: form values -> steering messages, with the client
// mirroring the solver's parameter bounds so invalid values never go out.

import { FIELD_IDS } from "./protocol.js";
import type { FluidParamsData, JobMsg } from "./protocol.js";

export function validateParams(p: FluidParamsData): string | null {
  if (!(p.tau > 0.5)) return "tau must be greater than 0.5";
  const speed = Math.hypot(p.inflow_velocity[0], p.inflow_velocity[1]);
  if (!(speed < 0.3)) return "inflow speed must stay below 0.3";
  if (!(p.thermal_diffusivity > 0)) return "thermal diffusivity must be positive";
  return null;
}

export function paramsMessage(p: FluidParamsData): Record<string, unknown> {
  const problem = validateParams(p);
  if (problem) throw new Error(problem);
  return { type: "set_params", params: p };
}

export function budgetMessage(ms: number): Record<string, unknown> {
  if (!(ms >= 0)) throw new Error("budget must be non-negative");
  return { type: "set_budget", ms };
}

export function fieldMessage(name: string): Record<string, unknown> {
  const field = FIELD_IDS[name];
  if (field === undefined) throw new Error(`unknown field ${name}`);
  return { type: "set_field", field };
}

export function styleMessage(
  technique: string,
  options: Record<string, unknown> = {},
): Record<string, unknown> {
  return { type: "set_style", technique, options };
}

export function batchMessage(
  level: number,
  steps: number,
  outPath?: string,
): Record<string, unknown> {
  if (!Number.isInteger(level) || level < 0) throw new Error("bad batch level");
  if (!Number.isInteger(steps) || steps < 0) throw new Error("bad batch steps");
  const msg: Record<string, unknown> = { type: "trigger_batch", level, steps };
  if (outPath) msg.out_path = outPath;
  return msg;
}

/** Tracks the latest batch job state for the job card in the panel. */
export class JobCard {
  state: "idle" | "Queued" | "Running" | "Done" | "Failed" = "idle";
  jobId: number | null = null;
  error = "";

  update(msg: JobMsg): void {
    this.jobId = msg.id;
    this.state = msg.state;
    this.error = msg.error ?? "";
  }

  label(): string {
    if (this.state === "idle") return "no batch job";
    const base = `job #${this.jobId}: ${this.state}`;
    return this.state === "Failed" ? `${base} (${this.error})` : base;
  }
}
