/**
 * Browser entry point: two portrait panels with drag-to-steer, distance
 * strips, fusion gauges, an event log, and haptic/touch indicators.
 */
import { CockpitClient } from "./client.js";
import {
  clampSteering,
  deriveViewState,
  formatEventRow,
  updateEventLog,
  SCREEN_HEIGHT_M,
  SCREEN_WIDTH_M,
  type EventLogRow,
} from "./dashboard.js";
import type { SiteSnapshot, StateSnapshot } from "./protocol.js";

const SITES = [
  { id: 0, name: "A" },
  { id: 1, name: "B" },
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawFrame(canvas: HTMLCanvasElement, site: SiteSnapshot): void {
  if (canvas.width !== site.width || canvas.height !== site.height) {
    canvas.width = site.width;
    canvas.height = site.height;
  }
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  const image = ctx.createImageData(site.width, site.height);
  for (let i = 0, j = 0; i < site.rgb.length; i += 3, j += 4) {
    image.data[j] = site.rgb[i];
    image.data[j + 1] = site.rgb[i + 1];
    image.data[j + 2] = site.rgb[i + 2];
    image.data[j + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
}

function canvasToScreenMeters(canvas: HTMLCanvasElement, ev: PointerEvent) {
  const rect = canvas.getBoundingClientRect();
  const u = (ev.clientX - rect.left) / rect.width;
  const v = (ev.clientY - rect.top) / rect.height;
  return {
    x: (u - 0.5) * SCREEN_WIDTH_M,
    y: (0.5 - v) * SCREEN_HEIGHT_M,
  };
}

function main(): void {
  const wsUrl = `ws://${location.host}/ws`;
  let eventLog: EventLogRow[] = [];
  const hands = SITES.map(() => ({ x: 0, y: 0, distance: 0.5 }));

  const client = new CockpitClient(wsUrl, {
    onStatus: (status) => {
      const badge = el<HTMLSpanElement>("status");
      badge.textContent = status;
      badge.className = `badge ${status}`;
    },
    onSnapshot: (snapshot: StateSnapshot) => {
      eventLog = updateEventLog(eventLog, snapshot);
      render(snapshot);
    },
    onAck: (pose) => {
      el<HTMLSpanElement>(`ghost-${pose.siteId}`).textContent =
        `ack: x=${pose.x.toFixed(2)} y=${pose.y.toFixed(2)} d=${pose.distance.toFixed(2)}`;
    },
  });

  function render(snapshot: StateSnapshot): void {
    const view = deriveViewState(snapshot, client.latestSnapshotAtMs, Date.now());
    el<HTMLSpanElement>("stale").hidden = !view.stale;
    for (const panel of view.panels) {
      const site = snapshot.sites.find((s) => s.siteId === panel.siteId);
      if (site !== undefined) {
        drawFrame(el<HTMLCanvasElement>(`frame-${panel.siteId}`), site);
      }
      el<HTMLSpanElement>(`gauge-d-${panel.siteId}`).textContent =
        panel.d === null ? "—" : `${panel.d.toFixed(3)} m`;
      el<HTMLSpanElement>(`gauge-a-${panel.siteId}`).textContent =
        panel.alphaG.toFixed(3);
      el<HTMLSpanElement>(`near-${panel.siteId}`).textContent =
        String(panel.nearJointCount);
      el<HTMLDivElement>(`flash-${panel.siteId}`).hidden = !panel.touchFlash;
      el<HTMLDivElement>(`haptic-${panel.siteId}`).classList.toggle(
        "pulsing",
        panel.hapticPulse,
      );
    }
    el<HTMLUListElement>("events").innerHTML = eventLog
      .slice(-12)
      .map((row) => `<li>${formatEventRow(row)}</li>`)
      .join("");
  }

  for (const site of SITES) {
    const canvas = el<HTMLCanvasElement>(`frame-${site.id}`);
    const strip = el<HTMLInputElement>(`strip-${site.id}`);
    const warn = el<HTMLSpanElement>(`warn-${site.id}`);

    const steer = (x: number, y: number, distance: number) => {
      const target = clampSteering(x, y, distance);
      warn.hidden = !target.clamped;
      hands[site.id] = { x: target.x, y: target.y, distance: target.distance };
      client.steer(site.id, target.x, target.y, target.distance);
    };

    let dragging = false;
    canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      canvas.setPointerCapture(ev.pointerId);
      const p = canvasToScreenMeters(canvas, ev);
      steer(p.x, p.y, hands[site.id].distance);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      const p = canvasToScreenMeters(canvas, ev);
      steer(p.x, p.y, hands[site.id].distance);
    });
    canvas.addEventListener("pointerup", () => {
      dragging = false;
    });
    strip.addEventListener("input", () => {
      const hand = hands[site.id];
      steer(hand.x, hand.y, Number(strip.value));
    });
  }

  client.connect();
}

main();
