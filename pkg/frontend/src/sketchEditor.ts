/** Binary stroke raster for hand-drawn conditions. The raster is the source
 * of truth; the browser layer blits it to a canvas and encodes the PNG. */

export class SketchRaster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array; // row-major, 0 or 1

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) throw new Error(`raster ${width}x${height} is empty`);
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height);
  }

  at(x: number, y: number): number {
    return this.data[y * this.width + x] ?? 0;
  }

  set(x: number, y: number, on: boolean): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    this.data[y * this.width + x] = on ? 1 : 0;
  }

  clear(): void {
    this.data.fill(0);
  }

  count(): number {
    let n = 0;
    for (const v of this.data) n += v;
    return n;
  }

  /** One-pixel Bresenham stroke from (x0, y0) to (x1, y1), inclusive. */
  line(x0: number, y0: number, x1: number, y1: number): void {
    let x = Math.round(x0);
    let y = Math.round(y0);
    const ex = Math.round(x1);
    const ey = Math.round(y1);
    const dx = Math.abs(ex - x);
    const dy = -Math.abs(ey - y);
    const sx = x < ex ? 1 : -1;
    const sy = y < ey ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(x, y, true);
      if (x === ex && y === ey) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
    }
  }

  /** Stroke through normalized [0, 1] coordinates, mapped to pixel centers. */
  lineNormalized(u0: number, v0: number, u1: number, v1: number): void {
    const px = (u: number) => Math.min(Math.floor(u * this.width), this.width - 1);
    const py = (v: number) => Math.min(Math.floor(v * this.height), this.height - 1);
    this.line(px(u0), py(v0), px(u1), py(v1));
  }
}
