// WebSocket connection speaking the framed steering protocol.

import { decodeMessage, encodeMessage } from "./protocol.js";
import type { Decoded } from "./protocol.js";

export class Connection {
  private ws: WebSocket;
  onmessage: (msg: Decoded) => void = () => {};
  onopen: () => void = () => {};
  onclose: () => void = () => {};
  sentCount = 0;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onopen = () => this.onopen();
    this.ws.onclose = () => this.onclose();
    this.ws.onmessage = (ev: MessageEvent) => {
      this.onmessage(decodeMessage(ev.data as ArrayBuffer));
    };
  }

  send(header: Record<string, unknown>): void {
    this.sentCount += 1;
    this.ws.send(encodeMessage(header));
  }

  close(): void {
    this.ws.close();
  }
}

export function steerUrl(
  host: string, port: number | string, token?: string,
): string {
  const suffix = token ? `?token=${encodeURIComponent(token)}` : "";
  return `ws://${host}:${port}/steer${suffix}`;
}
