/** Client-side raster rendering: decode f32 grid blobs and map them
 * through fixed colormaps (no tile services, works offline). */

import { GridBlob } from "./types.js";

export function decodeGrid(blob: GridBlob): Float32Array {
  const binary = typeof atob === "function"
    ? atob(blob.data_b64)
    // node fallback for tests
    : bufferDecode(blob.data_b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}

function bufferDecode(b64: string): string {
  const buf = (globalThis as Record<string, any>).Buffer.from(b64, "base64");
  let out = "";
  for (const byte of buf) out += String.fromCharCode(byte);
  return out;
}

type Stop = [number, [number, number, number, number]];

const RAIN_STOPS: Stop[] = [
  [0, [20, 24, 35, 0]],
  [1, [60, 110, 180, 140]],
  [10, [40, 160, 220, 190]],
  [20, [250, 215, 70, 220]],
  [40, [240, 120, 40, 240]],
  [80, [220, 40, 40, 255]],
  [160, [150, 0, 90, 255]],
];

const PROB_STOPS: Stop[] = [
  [0, [20, 24, 35, 0]],
  [0.1, [70, 120, 190, 120]],
  [0.3, [120, 180, 90, 180]],
  [0.5, [250, 215, 70, 220]],
  [0.8, [240, 110, 40, 245]],
  [1.0, [220, 40, 40, 255]],
];

const DEPTH_STOPS: Stop[] = [
  [0, [20, 24, 35, 0]],
  [0.05, [70, 130, 200, 110]],
  [0.3, [40, 90, 200, 200]],
  [0.8, [90, 40, 190, 240]],
  [1.5, [160, 20, 140, 255]],
];

const ELEV_STOPS: Stop[] = [
  [0, [40, 70, 45, 255]],
  [0.4, [90, 110, 60, 255]],
  [0.7, [150, 130, 90, 255]],
  [1.0, [235, 235, 225, 255]],
];

export const SCALES = {
  rain: RAIN_STOPS,
  probability: PROB_STOPS,
  depth: DEPTH_STOPS,
  elevation: ELEV_STOPS,
} as const;

export type ScaleName = keyof typeof SCALES;

export function colorAt(stops: Stop[], value: number): [number, number, number, number] {
  if (value <= stops[0][0]) return stops[0][1];
  for (let i = 1; i < stops.length; i++) {
    const [x1, c1] = stops[i];
    if (value <= x1) {
      const [x0, c0] = stops[i - 1];
      const f = x1 === x0 ? 0 : (value - x0) / (x1 - x0);
      return [0, 1, 2, 3].map(
        (k) => Math.round(c0[k] + f * (c1[k] - c0[k]))) as
        [number, number, number, number];
    }
  }
  return stops[stops.length - 1][1];
}

/** RGBA byte buffer for a row-major grid; elevation normalizes to [0,1]. */
export function renderRaster(values: Float32Array, scale: ScaleName):
    Uint8ClampedArray {
  const stops = SCALES[scale];
  let vals = values;
  if (scale === "elevation") {
    let lo = Infinity, hi = -Infinity;
    for (const v of values) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
    const span = hi - lo || 1;
    vals = Float32Array.from(values, (v) => (v - lo) / span);
  }
  const out = new Uint8ClampedArray(vals.length * 4);
  for (let i = 0; i < vals.length; i++) {
    const [r, g, b, a] = colorAt(stops as unknown as Stop[], vals[i]);
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = a;
  }
  return out;
}
