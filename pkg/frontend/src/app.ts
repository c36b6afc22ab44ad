/** Browser entry: wires the reducer, gateway client and canvas map. */

import { GatewayClient, browserDeps } from "./client.js";
import { decodeGrid, renderRaster, ScaleName } from "./colormap.js";
import {
  Action, ViewModel, actionable, countdown, initialViewModel, isTerminal,
  reduce,
} from "./reducer.js";

const params = new URLSearchParams(location.search);
const BASE = params.get("gateway") ?? "http://127.0.0.1:8700";

let vm: ViewModel = initialViewModel();
let layerChoice: "analysis" | "probability" | "depth" | "elevation" = "analysis";
const renderedHashes: Record<string, string> = {};

const dispatch = (action: Action): void => {
  vm = reduce(vm, action);
  render();
};

const client = new GatewayClient(BASE, dispatch, browserDeps());
void client.subscribe();

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function render(): void {
  el("status").textContent =
    `${vm.connection}${vm.degraded ? " · DEGRADED" : ""}` +
    (vm.clock !== null ? ` · t=${vm.clock} min` : "") +
    (vm.finished ? " · run complete" : "");
  el("status").className = `banner ${vm.connection}`;

  renderAlerts();
  renderQueue();
  void renderMap();
}

function renderAlerts(): void {
  const list = el<HTMLUListElement>("alerts");
  list.replaceChildren(...[...vm.alerts].reverse().slice(0, 12).map((a) => {
    const li = document.createElement("li");
    li.className = `alert ${a.tier}`;
    const p = a.probability ?? a.p ?? 0;
    li.textContent = `${a.tier.toUpperCase()} ${a.district} ` +
      `p=${Number(p).toFixed(2)} at t=${a.issued_at}`;
    return li;
  }));
}

function renderQueue(): void {
  const queue = el<HTMLDivElement>("queue");
  const items = actionable(vm);
  el("queue-count").textContent = String(items.length);
  queue.replaceChildren(...items.map((item) => {
    const row = document.createElement("div");
    row.className = "hitl-item";
    const label = document.createElement("span");
    const remain = countdown(item, vm.clock);
    label.textContent = `${item.district} ${item.tier} p=${item.p.toFixed(2)} ` +
      `· ${remain.toFixed(0)} min left`;
    row.appendChild(label);
    for (const decision of ["approve", "override"] as const) {
      const btn = document.createElement("button");
      btn.textContent = decision;
      btn.disabled = item.submitting;
      btn.onclick = () => void client.submitDecision(item.id, decision);
      row.appendChild(btn);
    }
    return row;
  }));
  const resolved = Object.values(vm.hitl).filter((i) => isTerminal(i.status));
  el("resolved").textContent = resolved.length
    ? resolved.map((i) => `${i.id}:${i.status}`).join("  ")
    : "none";
  el("error").textContent = vm.lastError ?? "";
}

async function renderMap(): Promise<void> {
  const ref = vm.snapshot?.grids?.[layerChoice];
  if (!ref) return;
  if (renderedHashes[layerChoice] === ref.hash) return;
  try {
    const blob = await client.fetchGrid(ref.hash);
    const values = decodeGrid(blob);
    const scale: ScaleName = layerChoice === "analysis" ? "rain"
      : layerChoice === "probability" ? "probability"
      : layerChoice === "depth" ? "depth" : "elevation";
    const rgba = renderRaster(values, scale);
    const canvas = el<HTMLCanvasElement>("map");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const img = new ImageData(new Uint8ClampedArray(rgba), blob.nx, blob.ny);
    const off = new OffscreenCanvas(blob.nx, blob.ny);
    const octx = off.getContext("2d");
    if (!octx) return;
    octx.putImageData(img, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
    renderedHashes[layerChoice] = ref.hash;
    el("map-meta").textContent =
      `${layerChoice} · t=${ref.t} · ${blob.variable} (${blob.units})`;
  } catch {
    // keep last rendered frame; banner already reflects connection state
  }
}

for (const name of ["analysis", "probability", "depth", "elevation"] as const) {
  el<HTMLButtonElement>(`layer-${name}`).onclick = () => {
    layerChoice = name;
    delete renderedHashes[name];
    void renderMap();
  };
}

// countdowns advance between frames too
setInterval(render, 500);
