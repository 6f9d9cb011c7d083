/** Canvas drawing for the editor overlay. Geometry helpers are pure; the
 * draw functions take the 2D context interface so tests can record calls. */

import type { Box, KeypointSet, Layout } from "./types.js";

export interface PixelRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function boxToPixels(box: Box, width: number, height: number): PixelRect {
  const [x0, y0, x1, y1] = box;
  return {
    x: Math.round(x0 * width),
    y: Math.round(y0 * height),
    w: Math.max(1, Math.round((x1 - x0) * width)),
    h: Math.max(1, Math.round((y1 - y0) * height)),
  };
}

export interface Segment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Skeleton edges as drawable segments; edges touching an invisible or
 * unknown joint are skipped, matching how the server rasterizes them. */
export function skeletonSegments(set: KeypointSet): Segment[] {
  const byName = new Map(set.joints.map((j) => [j.name, j]));
  const segments: Segment[] = [];
  for (const [a, b] of set.skeleton) {
    const ja = byName.get(a);
    const jb = byName.get(b);
    if (!ja || !jb || !ja.visible || !jb.visible) continue;
    segments.push({ x0: ja.x, y0: ja.y, x1: jb.x, y1: jb.y });
  }
  return segments;
}

interface Ctx2d {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
}

const PALETTE = ["#e4572e", "#17bebb", "#ffc914", "#76b041", "#b37ba4", "#5386e4"];

export function bindingColor(index: number): string {
  return PALETTE[index % PALETTE.length] ?? "#e4572e";
}

export function drawLayout(
  ctx: Ctx2d,
  layout: Layout,
  width: number,
  height: number,
  selected: number | null = null,
): void {
  layout.bindings.forEach((binding, i) => {
    const rect = boxToPixels(binding.box, width, height);
    ctx.strokeStyle = bindingColor(i);
    ctx.lineWidth = i === selected ? 3 : 1.5;
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    ctx.fillStyle = bindingColor(i);
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(binding.local_prompt.slice(0, 28), rect.x + 4, rect.y + 14);
  });
}

export function drawKeypoints(ctx: Ctx2d, sets: KeypointSet[], width: number, height: number): void {
  sets.forEach((set, i) => {
    ctx.strokeStyle = bindingColor(i);
    ctx.fillStyle = bindingColor(i);
    ctx.lineWidth = 2;
    for (const seg of skeletonSegments(set)) {
      ctx.beginPath();
      ctx.moveTo(seg.x0 * width, seg.y0 * height);
      ctx.lineTo(seg.x1 * width, seg.y1 * height);
      ctx.stroke();
    }
    for (const joint of set.joints) {
      if (!joint.visible) continue;
      ctx.beginPath();
      ctx.arc(joint.x * width, joint.y * height, 4, 0, Math.PI * 2);
      ctx.fill();
    }
  });
}
