/**
 * Binary wire protocol codec (client side).
 *
 * Every frame is `u32 LE payload length` followed by the payload:
 *
 *     u8 kind | u8 site_id | i64 timestamp_ms | u32 seq | kind-specific body
 *
 * The cockpit only needs to decode state snapshots (kind 5) and encode
 * steering messages (kind 6). Rasters arrive zlib-compressed with color
 * quantized to u8. All integers are little-endian.
 */

export const PROTOCOL_VERSION = 1;

export const KIND_PORTRAIT = 1;
export const KIND_SKELETON = 2;
export const KIND_VIEWPOINT = 3;
export const KIND_TOUCH = 4;
export const KIND_SNAPSHOT = 5;
export const KIND_STEERING = 6;

export class WireError extends Error {}

export interface TouchEventInfo {
  timestampMs: number;
  overlapAreaCm2: number;
  localBbox: [number, number, number, number];
  remoteBbox: [number, number, number, number];
  hapticDelayMs: number;
}

export interface SiteSnapshot {
  siteId: number;
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel, already u8-quantized by the server. */
  rgb: Uint8Array;
  d: number;
  alphaG: number;
  nearJointCount: number;
  touchEvent: TouchEventInfo | null;
  hapticActive: boolean;
}

export interface StateSnapshot {
  nowMs: number;
  seq: number;
  sites: SiteSnapshot[];
}

export interface DecodedMessage {
  kind: number;
  siteId: number;
  timestampMs: number;
  seq: number;
  snapshot: StateSnapshot | null;
}

/** zlib-inflate via the standard DecompressionStream (browser and Node 18+). */
async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

class Reader {
  private view: DataView;
  private pos = 0;

  constructor(private buf: Uint8Array) {
    this.view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  }

  private need(n: number): number {
    if (this.pos + n > this.buf.byteLength) {
      throw new WireError("truncated message");
    }
    const at = this.pos;
    this.pos += n;
    return at;
  }

  u8(): number {
    return this.view.getUint8(this.need(1));
  }

  u16(): number {
    return this.view.getUint16(this.need(2), true);
  }

  u32(): number {
    return this.view.getUint32(this.need(4), true);
  }

  i64(): number {
    return Number(this.view.getBigInt64(this.need(8), true));
  }

  f32(): number {
    return this.view.getFloat32(this.need(4), true);
  }

  f64(): number {
    return this.view.getFloat64(this.need(8), true);
  }

  bytes(n: number): Uint8Array {
    const at = this.need(n);
    return this.buf.subarray(at, at + n);
  }

  async blob(): Promise<Uint8Array> {
    const n = this.u32();
    return inflate(this.bytes(n));
  }
}

function readTouch(r: Reader): TouchEventInfo {
  const timestampMs = r.i64();
  const overlapAreaCm2 = r.f32();
  const localBbox: [number, number, number, number] = [r.f64(), r.f64(), r.f64(), r.f64()];
  const remoteBbox: [number, number, number, number] = [r.f64(), r.f64(), r.f64(), r.f64()];
  const hapticDelayMs = r.u32();
  return { timestampMs, overlapAreaCm2, localBbox, remoteBbox, hapticDelayMs };
}

async function readSnapshot(r: Reader, seq: number): Promise<StateSnapshot> {
  const nowMs = r.i64();
  const nSites = r.u8();
  const sites: SiteSnapshot[] = [];
  for (let i = 0; i < nSites; i++) {
    const siteId = r.u8();
    const width = r.u16();
    const height = r.u16();
    const rgb = await r.blob();
    if (rgb.byteLength !== width * height * 3) {
      throw new WireError(
        `raster payload is ${rgb.byteLength} bytes, expected ${width * height * 3}`,
      );
    }
    const d = r.f32();
    const alphaG = r.f32();
    const nearJointCount = r.u16();
    const hasEvent = r.u8();
    const touchEvent = hasEvent ? readTouch(r) : null;
    const hapticActive = r.u8() !== 0;
    sites.push({ siteId, width, height, rgb, d, alphaG, nearJointCount, touchEvent, hapticActive });
  }
  return { nowMs, seq, sites };
}

/** Decode one framed message; only snapshot bodies are materialized. */
export async function decodeMessage(data: ArrayBuffer | Uint8Array): Promise<DecodedMessage> {
  const buf = data instanceof Uint8Array ? data : new Uint8Array(data);
  if (buf.byteLength < 4) {
    throw new WireError("frame too short");
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const payloadLength = view.getUint32(0, true);
  if (payloadLength !== buf.byteLength - 4) {
    throw new WireError("frame length mismatch");
  }
  const r = new Reader(buf.subarray(4));
  const kind = r.u8();
  const siteId = r.u8();
  const timestampMs = r.i64();
  const seq = r.u32();
  const snapshot = kind === KIND_SNAPSHOT ? await readSnapshot(r, seq) : null;
  return { kind, siteId, timestampMs, seq, snapshot };
}

/** Encode a steering message: body is u8 site_id + 3 x f64 (x, y, distance). */
export function encodeSteering(
  siteId: number,
  x: number,
  y: number,
  distance: number,
  timestampMs = 0,
  seq = 1,
): Uint8Array {
  const payloadLength = 1 + 1 + 8 + 4 + 1 + 24;
  const out = new Uint8Array(4 + payloadLength);
  const view = new DataView(out.buffer);
  let pos = 0;
  view.setUint32(pos, payloadLength, true);
  pos += 4;
  view.setUint8(pos, KIND_STEERING);
  pos += 1;
  view.setUint8(pos, siteId);
  pos += 1;
  view.setBigInt64(pos, BigInt(Math.round(timestampMs)), true);
  pos += 8;
  view.setUint32(pos, seq, true);
  pos += 4;
  view.setUint8(pos, siteId);
  pos += 1;
  view.setFloat64(pos, x, true);
  pos += 8;
  view.setFloat64(pos, y, true);
  pos += 8;
  view.setFloat64(pos, distance, true);
  return out;
}
