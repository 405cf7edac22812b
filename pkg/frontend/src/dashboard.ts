/**
 * Pure snapshot -> view-state derivation. Everything displayed comes from
 * server-reported values; the cockpit never recomputes fusion or touch math.
 */
import type { StateSnapshot, TouchEventInfo } from "./protocol.js";

/** Screen geometry mirrored from the server, used only to warn on clamping. */
export const SCREEN_WIDTH_M = 1.439;
export const SCREEN_HEIGHT_M = 0.809;
export const STEER_PADDING_M = 0.2;

/** How long a touch flash stays visible after its event (display only). */
export const TOUCH_FLASH_MS = 600;
/** Snapshots older than this mark the stream as stale. */
export const STALE_AFTER_MS = 1000;

export type ConnectionStatus =
  | "connecting"
  | "connected"
  | "disconnected"
  | "version-mismatch";

export interface EventLogRow {
  siteId: number;
  timestampMs: number;
  overlapAreaCm2: number;
}

export interface PanelState {
  siteId: number;
  hasFrame: boolean;
  d: number | null;
  alphaG: number;
  nearJointCount: number;
  touchFlash: boolean;
  hapticPulse: boolean;
}

export interface ViewState {
  placeholder: boolean;
  stale: boolean;
  panels: PanelState[];
}

/** Clamp a steering target into padded screen bounds (mirrors the server). */
export function clampSteering(
  x: number,
  y: number,
  distance: number,
): { x: number; y: number; distance: number; clamped: boolean } {
  const xMax = SCREEN_WIDTH_M / 2 + STEER_PADDING_M;
  const yMax = SCREEN_HEIGHT_M / 2 + STEER_PADDING_M;
  const cx = Math.min(Math.max(x, -xMax), xMax);
  const cy = Math.min(Math.max(y, -yMax), yMax);
  const cd = Math.max(distance, 0);
  return { x: cx, y: cy, distance: cd, clamped: cx !== x || cy !== y || cd !== distance };
}

function sameEvent(a: EventLogRow, b: TouchEventInfo, siteId: number): boolean {
  return a.siteId === siteId && a.timestampMs === b.timestampMs;
}

/**
 * Append any touch event from the snapshot that the log hasn't seen yet.
 * Returns the input array unchanged when there is nothing new.
 */
export function updateEventLog(log: EventLogRow[], snapshot: StateSnapshot): EventLogRow[] {
  let out = log;
  for (const site of snapshot.sites) {
    const ev = site.touchEvent;
    if (ev === null) continue;
    if (out.some((row) => sameEvent(row, ev, site.siteId))) continue;
    out = [
      ...out,
      { siteId: site.siteId, timestampMs: ev.timestampMs, overlapAreaCm2: ev.overlapAreaCm2 },
    ];
  }
  return out;
}

export function formatEventRow(row: EventLogRow): string {
  const site = row.siteId === 0 ? "A" : "B";
  return `t=${row.timestampMs} ms  site ${site}  touch  ${row.overlapAreaCm2.toFixed(1)} cm²`;
}

/**
 * Derive what the dashboard shows from the latest snapshot.
 *
 * `nowMs` and `receivedAtMs` are on the same (client) clock; the snapshot's
 * own timestamps are on the server clock and are only compared to each other.
 */
export function deriveViewState(
  snapshot: StateSnapshot | null,
  receivedAtMs: number | null,
  nowMs: number,
): ViewState {
  if (snapshot === null || receivedAtMs === null) {
    return { placeholder: true, stale: false, panels: [] };
  }
  const stale = nowMs - receivedAtMs > STALE_AFTER_MS;
  const panels = snapshot.sites.map((site) => ({
    siteId: site.siteId,
    hasFrame: site.rgb.byteLength > 0,
    d: site.d < 0 ? null : site.d,
    alphaG: site.alphaG,
    nearJointCount: site.nearJointCount,
    touchFlash:
      site.touchEvent !== null &&
      snapshot.nowMs - site.touchEvent.timestampMs <= TOUCH_FLASH_MS,
    hapticPulse: site.hapticActive,
  }));
  return { placeholder: false, stale, panels };
}
