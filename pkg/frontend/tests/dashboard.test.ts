import { describe, expect, it } from "vitest";

import {
  clampSteering,
  deriveViewState,
  formatEventRow,
  updateEventLog,
  SCREEN_WIDTH_M,
  STEER_PADDING_M,
  type EventLogRow,
} from "../src/dashboard.js";
import type { SiteSnapshot, StateSnapshot } from "../src/protocol.js";

function site(overrides: Partial<SiteSnapshot> = {}): SiteSnapshot {
  return {
    siteId: 0,
    width: 2,
    height: 2,
    rgb: new Uint8Array(12),
    d: 0.3,
    alphaG: 0.5,
    nearJointCount: 0,
    touchEvent: null,
    hapticActive: false,
    ...overrides,
  };
}

function snapshot(sites: SiteSnapshot[], nowMs = 1000): StateSnapshot {
  return { nowMs, seq: 1, sites };
}

describe("deriveViewState", () => {
  it("shows placeholders before the first snapshot", () => {
    const view = deriveViewState(null, null, 0);
    expect(view.placeholder).toBe(true);
    expect(view.panels).toHaveLength(0);
  });

  it("reports the server gauges verbatim (no local fusion math)", () => {
    const view = deriveViewState(snapshot([site({ d: 0.3, alphaG: 0.5 })]), 100, 150);
    expect(view.panels[0].d).toBeCloseTo(0.3);
    expect(view.panels[0].alphaG).toBeCloseTo(0.5);
  });

  it("maps the server's d = -1 sentinel to a blank gauge", () => {
    const view = deriveViewState(snapshot([site({ d: -1 })]), 100, 150);
    expect(view.panels[0].d).toBeNull();
  });

  it("marks the stream stale after 1 s without snapshots", () => {
    const snap = snapshot([site()]);
    expect(deriveViewState(snap, 100, 1100).stale).toBe(false);
    expect(deriveViewState(snap, 100, 1101).stale).toBe(true);
  });

  it("flashes touch only while the event is recent on the server clock", () => {
    const ev = {
      timestampMs: 900,
      overlapAreaCm2: 80,
      localBbox: [0, 0, 0.1, 0.1] as [number, number, number, number],
      remoteBbox: [0, 0, 0.1, 0.1] as [number, number, number, number],
      hapticDelayMs: 60,
    };
    const fresh = deriveViewState(snapshot([site({ touchEvent: ev })], 1000), 0, 0);
    expect(fresh.panels[0].touchFlash).toBe(true);
    const old = deriveViewState(snapshot([site({ touchEvent: ev })], 5000), 0, 0);
    expect(old.panels[0].touchFlash).toBe(false);
  });

  it("mirrors the haptic pulse indicator", () => {
    const view = deriveViewState(snapshot([site({ hapticActive: true })]), 0, 0);
    expect(view.panels[0].hapticPulse).toBe(true);
  });
});

describe("updateEventLog", () => {
  const ev = {
    timestampMs: 2200,
    overlapAreaCm2: 179.4,
    localBbox: [0, 0, 0.1, 0.1] as [number, number, number, number],
    remoteBbox: [0, 0, 0.1, 0.1] as [number, number, number, number],
    hapticDelayMs: 60,
  };

  it("appends a new touch event once", () => {
    const log: EventLogRow[] = [];
    const once = updateEventLog(log, snapshot([site({ touchEvent: ev })]));
    expect(once).toHaveLength(1);
    expect(once[0].timestampMs).toBe(2200);
    // Snapshots repeat the latest event; the log must not grow again.
    const twice = updateEventLog(once, snapshot([site({ touchEvent: ev })]));
    expect(twice).toBe(once);
  });

  it("logs events from both sites separately", () => {
    const snap = snapshot([
      site({ siteId: 0, touchEvent: ev }),
      site({ siteId: 1, touchEvent: ev }),
    ]);
    const log = updateEventLog([], snap);
    expect(log).toHaveLength(2);
    expect(log.map((r) => r.siteId)).toEqual([0, 1]);
  });

  it("formats rows with timestamp and overlap area", () => {
    const row = { siteId: 1, timestampMs: 2200, overlapAreaCm2: 179.41 };
    const text = formatEventRow(row);
    expect(text).toContain("2200");
    expect(text).toContain("site B");
    expect(text).toContain("179.4");
  });
});

describe("clampSteering", () => {
  it("passes in-bounds targets through unchanged", () => {
    const out = clampSteering(0.1, -0.2, 0.3);
    expect(out).toEqual({ x: 0.1, y: -0.2, distance: 0.3, clamped: false });
  });

  it("clamps to the padded screen bounds and flags it", () => {
    const out = clampSteering(10, -10, -1);
    expect(out.x).toBeCloseTo(SCREEN_WIDTH_M / 2 + STEER_PADDING_M);
    expect(out.distance).toBe(0);
    expect(out.clamped).toBe(true);
  });
});
