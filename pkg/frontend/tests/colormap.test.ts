import { describe, expect, it } from "vitest";

import { colorAt, decodeGrid, renderRaster, SCALES } from "../src/colormap.js";
import { GridBlob } from "../src/types.js";

function blobOf(values: number[], nx: number, ny: number): GridBlob {
  const f32 = new Float32Array(values);
  const b64 = Buffer.from(new Uint8Array(f32.buffer)).toString("base64");
  return { nx, ny, cell_km: 1, t: 0, variable: "rain", units: "mm/h",
           data_b64: b64 };
}

describe("grid decoding", () => {
  it("roundtrips little-endian float32", () => {
    const blob = blobOf([0, 1.5, 40.25, 160], 2, 2);
    const vals = decodeGrid(blob);
    expect(Array.from(vals)).toEqual([0, 1.5, 40.25, 160]);
  });
});

describe("colormap", () => {
  it("is deterministic and interpolates between stops", () => {
    const a = colorAt(SCALES.rain as never, 30);
    const b = colorAt(SCALES.rain as never, 30);
    expect(a).toEqual(b);
    const lo = colorAt(SCALES.rain as never, 20);
    const hi = colorAt(SCALES.rain as never, 40);
    expect(a[0]).toBeGreaterThanOrEqual(Math.min(lo[0], hi[0]));
    expect(a[0]).toBeLessThanOrEqual(Math.max(lo[0], hi[0]));
  });

  it("clamps outside the stop range", () => {
    expect(colorAt(SCALES.probability as never, -1)).toEqual(
      (SCALES.probability as never as [number, number[]][])[0][1]);
    expect(colorAt(SCALES.probability as never, 99)).toEqual(
      (SCALES.probability as never as
        [number, number[]][]).at(-1)![1]);
  });

  it("renders dry cells transparent and wet cells opaque", () => {
    const blob = blobOf([0, 80], 2, 1);
    const rgba = renderRaster(decodeGrid(blob), "rain");
    expect(rgba[3]).toBe(0);       // alpha of dry cell
    expect(rgba[7]).toBe(255);     // alpha of 80 mm/h cell
  });

  it("normalizes elevation before mapping", () => {
    const blob = blobOf([100, 400, 700, 1000], 2, 2);
    const rgba = renderRaster(decodeGrid(blob), "elevation");
    // lowest cell gets the valley color, highest the summit color
    expect(rgba.slice(0, 3)).toEqual(
      Uint8ClampedArray.from([40, 70, 45]));
    expect(rgba.slice(12, 15)).toEqual(
      Uint8ClampedArray.from([235, 235, 225]));
  });
});
