import { describe, expect, it } from "vitest";

import { SketchRaster } from "../src/sketchEditor.js";

describe("SketchRaster", () => {
  it("draws a horizontal one-pixel line inclusively", () => {
    const raster = new SketchRaster(16, 16);
    raster.line(2, 5, 9, 5);
    expect(raster.count()).toBe(8);
    for (let x = 2; x <= 9; x++) expect(raster.at(x, 5)).toBe(1);
  });

  it("draws diagonals with one pixel per step", () => {
    const raster = new SketchRaster(16, 16);
    raster.line(0, 0, 7, 7);
    expect(raster.count()).toBe(8);
    for (let i = 0; i <= 7; i++) expect(raster.at(i, i)).toBe(1);
  });

  it("is direction independent", () => {
    const forward = new SketchRaster(16, 16);
    const backward = new SketchRaster(16, 16);
    forward.line(1, 2, 12, 9);
    backward.line(12, 9, 1, 2);
    expect(Array.from(backward.data)).toEqual(Array.from(forward.data));
  });

  it("clips strokes to the raster", () => {
    const raster = new SketchRaster(8, 8);
    raster.line(-3, 4, 12, 4);
    expect(raster.count()).toBe(8);
  });

  it("maps normalized coordinates to pixel cells", () => {
    const raster = new SketchRaster(10, 10);
    raster.lineNormalized(0, 0.55, 1, 0.55);
    expect(raster.count()).toBe(10);
    for (let x = 0; x < 10; x++) expect(raster.at(x, 5)).toBe(1);
  });

  it("clears", () => {
    const raster = new SketchRaster(4, 4);
    raster.line(0, 0, 3, 3);
    raster.clear();
    expect(raster.count()).toBe(0);
  });
});
