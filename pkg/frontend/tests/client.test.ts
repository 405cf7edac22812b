import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { CockpitClient, STEER_MIN_INTERVAL_MS, type WireSocket } from "../src/client.js";
import { decodeMessage, PROTOCOL_VERSION } from "../src/protocol.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

class FakeSocket implements WireSocket {
  binaryType = "blob";
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  sent: (string | ArrayBuffer | Uint8Array)[] = [];
  closed = false;

  send(data: string | ArrayBuffer | Uint8Array): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  text(obj: unknown): void {
    this.onmessage?.({ data: JSON.stringify(obj) });
  }

  binary(buf: Uint8Array): void {
    this.onmessage?.({
      data: buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength),
    });
  }
}

/** Manual clock + task queue so coalescing can be tested deterministically. */
class FakeTime {
  nowMs = 0;
  private tasks: { at: number; fn: () => void }[] = [];

  now = (): number => this.nowMs;

  setTimeout = (fn: () => void, ms: number): unknown => {
    this.tasks.push({ at: this.nowMs + ms, fn });
    return this.tasks.length;
  };

  advance(ms: number): void {
    this.nowMs += ms;
    const due = this.tasks.filter((t) => t.at <= this.nowMs);
    this.tasks = this.tasks.filter((t) => t.at > this.nowMs);
    due.forEach((t) => t.fn());
  }
}

function connected(options: Record<string, unknown> = {}) {
  const time = new FakeTime();
  const sockets: FakeSocket[] = [];
  const client = new CockpitClient("ws://test/ws", {
    socketFactory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    now: time.now,
    setTimeoutFn: time.setTimeout,
    ...options,
  });
  client.connect();
  sockets[0].open();
  sockets[0].text({ type: "welcome", protocol: PROTOCOL_VERSION, tick_hz: 15 });
  return { client, sockets, time };
}

describe("CockpitClient", () => {
  it("sends the JSON handshake on open and reaches connected", () => {
    const { client, sockets } = connected();
    expect(client.status).toBe("connected");
    expect(JSON.parse(sockets[0].sent[0] as string)).toEqual({
      protocol: PROTOCOL_VERSION,
    });
  });

  it("shows a version-mismatch state and does not reconnect", () => {
    const time = new FakeTime();
    const sockets: FakeSocket[] = [];
    const client = new CockpitClient("ws://test/ws", {
      socketFactory: () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      },
      now: time.now,
      setTimeoutFn: time.setTimeout,
    });
    client.connect();
    sockets[0].open();
    sockets[0].text({ type: "error", reason: "version-mismatch", expected: 1 });
    sockets[0].close();
    time.advance(10_000);
    expect(client.status).toBe("version-mismatch");
    expect(sockets).toHaveLength(1);
  });

  it("reconnects automatically after an unexpected close", () => {
    const { client, sockets, time } = connected();
    sockets[0].close();
    expect(client.status).toBe("disconnected");
    time.advance(1000);
    expect(sockets).toHaveLength(2);
    sockets[1].open();
    sockets[1].text({ type: "welcome", protocol: PROTOCOL_VERSION });
    expect(client.status).toBe("connected");
  });

  it("publishes decoded snapshots", async () => {
    const received: number[] = [];
    const { sockets, client } = connected({
      onSnapshot: (snap: { nowMs: number }) => received.push(snap.nowMs),
    });
    sockets[0].binary(new Uint8Array(readFileSync(join(FIXTURES, "snapshot.bin"))));
    // decodeMessage inflates the raster asynchronously; wait for delivery.
    for (let i = 0; i < 100 && received.length === 0; i++) {
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
    expect(received).toEqual([2466]);
    expect(client.latestSnapshot?.sites).toHaveLength(2);
  });

  it("records acknowledged poses", () => {
    const { client, sockets } = connected();
    sockets[0].text({ type: "ack", site: 0, x: 0.1, y: 0.2, d: 0.3 });
    expect(client.lastAck).toEqual({ siteId: 0, x: 0.1, y: 0.2, distance: 0.3 });
  });

  it("coalesces rapid steering to at most 60 Hz, keeping the latest pose", async () => {
    const { client, sockets, time } = connected();
    const base = sockets[0].sent.length;
    // A burst of drag updates well above 60 Hz.
    for (let i = 0; i <= 10; i++) {
      client.steer(0, 0, 0, 0.5 - i * 0.01);
      time.advance(1);
    }
    expect(sockets[0].sent.length - base).toBe(1); // first send goes out immediately
    time.advance(STEER_MIN_INTERVAL_MS);
    expect(sockets[0].sent.length - base).toBe(2); // trailing coalesced send
    const last = sockets[0].sent[sockets[0].sent.length - 1] as Uint8Array;
    const msg = await decodeMessage(last);
    expect(msg.kind).toBe(6);
  });

  it("steering is buffered until connected", () => {
    const time = new FakeTime();
    const sockets: FakeSocket[] = [];
    const client = new CockpitClient("ws://test/ws", {
      socketFactory: () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      },
      now: time.now,
      setTimeoutFn: time.setTimeout,
    });
    client.connect();
    client.steer(1, 0.1, 0.1, 0.3);
    expect(sockets[0].sent).toHaveLength(0);
    sockets[0].open();
    sockets[0].text({ type: "welcome" });
    expect(sockets[0].sent.length).toBe(2); // handshake + flushed steer
  });
});
