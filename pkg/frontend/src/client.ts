/**
 * WebSocket client for the live session endpoint: JSON handshake, binary
 * snapshot stream, coalesced steering sender, automatic reconnect.
 */
import {
  decodeMessage,
  encodeSteering,
  KIND_SNAPSHOT,
  PROTOCOL_VERSION,
  type StateSnapshot,
} from "./protocol.js";
import type { ConnectionStatus } from "./dashboard.js";

/** Minimum interval between steering sends (coalesces drags to <= 60 Hz). */
export const STEER_MIN_INTERVAL_MS = 1000 / 60;
export const RECONNECT_DELAY_MS = 1000;

/** The subset of the WebSocket API the client uses (injectable for tests). */
export interface WireSocket {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string | ArrayBuffer | Uint8Array): void;
  close(): void;
}

export interface AckedPose {
  siteId: number;
  x: number;
  y: number;
  distance: number;
}

export interface CockpitClientOptions {
  socketFactory?: (url: string) => WireSocket;
  /** Millisecond clock; injectable for tests. */
  now?: () => number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
  onSnapshot?: (snapshot: StateSnapshot, receivedAtMs: number) => void;
  onStatus?: (status: ConnectionStatus) => void;
  onAck?: (pose: AckedPose) => void;
}

interface PendingSteer {
  siteId: number;
  x: number;
  y: number;
  distance: number;
}

export class CockpitClient {
  status: ConnectionStatus = "connecting";
  latestSnapshot: StateSnapshot | null = null;
  latestSnapshotAtMs: number | null = null;
  lastAck: AckedPose | null = null;

  private socket: WireSocket | null = null;
  private seq = 0;
  private pending = new Map<number, PendingSteer>();
  private lastSendMs = -Infinity;
  private flushScheduled = false;
  private closed = false;

  private readonly socketFactory: (url: string) => WireSocket;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(
    private url: string,
    private options: CockpitClientOptions = {},
  ) {
    this.socketFactory =
      options.socketFactory ?? ((u) => new WebSocket(u) as unknown as WireSocket);
    this.now = options.now ?? (() => Date.now());
    this.schedule = options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.closed = false;
    this.setStatus("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      socket.send(JSON.stringify({ protocol: PROTOCOL_VERSION }));
    };
    socket.onmessage = (ev) => {
      void this.handleMessage(ev.data);
    };
    socket.onclose = () => {
      if (this.closed || this.status === "version-mismatch") return;
      this.setStatus("disconnected");
      this.schedule(() => {
        if (!this.closed) this.connect();
      }, RECONNECT_DELAY_MS);
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.setStatus("disconnected");
  }

  /** Queue a steering target; sends are coalesced to the 60 Hz budget. */
  steer(siteId: number, x: number, y: number, distance: number): void {
    this.pending.set(siteId, { siteId, x, y, distance });
    this.flushSteering();
  }

  private flushSteering(): void {
    if (this.status !== "connected" || this.pending.size === 0) return;
    const wait = this.lastSendMs + STEER_MIN_INTERVAL_MS - this.now();
    if (wait > 0) {
      if (!this.flushScheduled) {
        this.flushScheduled = true;
        this.schedule(() => {
          this.flushScheduled = false;
          this.flushSteering();
        }, wait);
      }
      return;
    }
    for (const steer of this.pending.values()) {
      this.seq += 1;
      this.socket?.send(
        encodeSteering(steer.siteId, steer.x, steer.y, steer.distance, this.now(), this.seq),
      );
    }
    this.pending.clear();
    this.lastSendMs = this.now();
  }

  private async handleMessage(data: unknown): Promise<void> {
    if (typeof data === "string") {
      this.handleText(data);
      return;
    }
    const msg = await decodeMessage(data as ArrayBuffer);
    if (msg.kind === KIND_SNAPSHOT && msg.snapshot !== null) {
      this.latestSnapshot = msg.snapshot;
      this.latestSnapshotAtMs = this.now();
      this.options.onSnapshot?.(msg.snapshot, this.latestSnapshotAtMs);
    }
  }

  private handleText(data: string): void {
    let parsed: Record<string, unknown>;
    try {
      parsed = JSON.parse(data) as Record<string, unknown>;
    } catch {
      return;
    }
    if (parsed.type === "welcome") {
      this.setStatus("connected");
      this.flushSteering();
    } else if (parsed.type === "error" && parsed.reason === "version-mismatch") {
      this.setStatus("version-mismatch");
    } else if (parsed.type === "ack") {
      this.lastAck = {
        siteId: parsed.site as number,
        x: parsed.x as number,
        y: parsed.y as number,
        distance: parsed.d as number,
      };
      this.options.onAck?.(this.lastAck);
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.options.onStatus?.(status);
  }
}
