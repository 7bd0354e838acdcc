// Minimal RFC 6455 client for the scripted end-to-end session: enough to
// handshake, send masked binary frames and receive unmasked server frames.

import crypto from "node:crypto";
import net from "node:net";

const WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

export class WsClient {
  private buffer = Buffer.alloc(0);
  private waiters: ((data: Uint8Array | null) => void)[] = [];
  private messages: Uint8Array[] = [];
  private closed = false;

  private constructor(private sock: net.Socket) {}

  static connect(host: string, port: number, path = "/steer"): Promise<WsClient> {
    return new Promise((resolve, reject) => {
      const key = crypto.randomBytes(16).toString("base64");
      const expected = crypto
        .createHash("sha1")
        .update(key + WS_GUID)
        .digest("base64");
      const sock = net.createConnection({ host, port }, () => {
        sock.write(
          `GET ${path} HTTP/1.1\r\nHost: ${host}:${port}\r\n` +
            "Upgrade: websocket\r\nConnection: Upgrade\r\n" +
            `Sec-WebSocket-Key: ${key}\r\nSec-WebSocket-Version: 13\r\n\r\n`,
        );
      });
      sock.on("error", reject);
      let head = Buffer.alloc(0);
      const onHandshake = (chunk: Buffer) => {
        head = Buffer.concat([head, chunk]);
        const end = head.indexOf("\r\n\r\n");
        if (end < 0) return;
        const response = head.subarray(0, end).toString("latin1");
        if (!response.includes("101") || !response.includes(expected)) {
          reject(new Error(`handshake failed: ${response.split("\r\n")[0]}`));
          sock.destroy();
          return;
        }
        sock.off("data", onHandshake);
        const client = new WsClient(sock);
        client.attach(head.subarray(end + 4));
        resolve(client);
      };
      sock.on("data", onHandshake);
    });
  }

  private attach(initial: Buffer): void {
    if (initial.byteLength) this.feed(initial);
    this.sock.on("data", (chunk) => this.feed(chunk));
    this.sock.on("close", () => {
      this.closed = true;
      for (const w of this.waiters.splice(0)) w(null);
    });
  }

  private feed(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    for (;;) {
      const frame = this.tryParse();
      if (!frame) return;
      const [opcode, payload] = frame;
      if (opcode === 9) this.sendFrame(10, payload); // ping -> pong
      else if (opcode === 2 || opcode === 1) {
        const waiter = this.waiters.shift();
        if (waiter) waiter(payload);
        else this.messages.push(payload);
      } else if (opcode === 8) {
        this.sock.end();
      }
    }
  }

  private tryParse(): [number, Uint8Array] | null {
    const buf = this.buffer;
    if (buf.byteLength < 2) return null;
    const opcode = buf[0] & 0x0f;
    let len = buf[1] & 0x7f;
    let offset = 2;
    if (len === 126) {
      if (buf.byteLength < 4) return null;
      len = buf.readUInt16BE(2);
      offset = 4;
    } else if (len === 127) {
      if (buf.byteLength < 10) return null;
      len = Number(buf.readBigUInt64BE(2));
      offset = 10;
    }
    if (buf.byteLength < offset + len) return null;
    const payload = new Uint8Array(buf.subarray(offset, offset + len));
    this.buffer = buf.subarray(offset + len);
    return [opcode, payload];
  }

  private sendFrame(opcode: number, data: Uint8Array): void {
    const mask = crypto.randomBytes(4);
    const masked = Buffer.from(data);
    for (let i = 0; i < masked.byteLength; i++) masked[i] ^= mask[i % 4];
    let header: Buffer;
    if (data.byteLength < 126) {
      header = Buffer.from([0x80 | opcode, 0x80 | data.byteLength]);
    } else if (data.byteLength < 1 << 16) {
      header = Buffer.alloc(4);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 126;
      header.writeUInt16BE(data.byteLength, 2);
    } else {
      header = Buffer.alloc(10);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 127;
      header.writeBigUInt64BE(BigInt(data.byteLength), 2);
    }
    this.sock.write(Buffer.concat([header, mask, masked]));
  }

  sendBinary(data: ArrayBuffer): void {
    this.sendFrame(2, new Uint8Array(data));
  }

  recv(timeoutMs = 30_000): Promise<Uint8Array> {
    const queued = this.messages.shift();
    if (queued) return Promise.resolve(queued);
    if (this.closed) return Promise.reject(new Error("socket closed"));
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("recv timeout")), timeoutMs);
      this.waiters.push((data) => {
        clearTimeout(timer);
        if (data === null) reject(new Error("socket closed"));
        else resolve(data);
      });
    });
  }

  close(): void {
    this.sock.destroy();
  }
}
