/** Box drag and resize as a pure state machine over normalized coordinates.
 * The browser layer translates pointer events to (x, y) in [0, 1] and renders
 * whatever layout falls out; nothing here touches the DOM. */

import type { Box, Layout } from "./types.js";

export type Handle = "move" | "n" | "s" | "e" | "w" | "nw" | "ne" | "sw" | "se";

export interface Hit {
  bindingIndex: number;
  handle: Handle;
}

export interface DragState {
  bindingIndex: number;
  handle: Handle;
  // pointer offset from the box origin at grab time, so moves do not jump
  grabDx: number;
  grabDy: number;
  box: Box;
}

export const MIN_SIDE = 0.01;

// canonical serialization cannot represent magnitudes in (0, 1e-4)
function snap01(v: number): number {
  if (v < 1e-4) return 0;
  if (v > 1) return 1;
  return v;
}

function cornerNear(x: number, y: number, cx: number, cy: number, tol: number): boolean {
  return Math.abs(x - cx) <= tol && Math.abs(y - cy) <= tol;
}

/** Topmost handle under the pointer: corners win over edges, edges over the
 * interior, and later bindings (drawn on top) win over earlier ones. */
export function hitTest(layout: Layout, x: number, y: number, tolerance = 0.02): Hit | null {
  for (let i = layout.bindings.length - 1; i >= 0; i--) {
    const binding = layout.bindings[i];
    if (!binding) continue;
    const [x0, y0, x1, y1] = binding.box;
    if (cornerNear(x, y, x0, y0, tolerance)) return { bindingIndex: i, handle: "nw" };
    if (cornerNear(x, y, x1, y0, tolerance)) return { bindingIndex: i, handle: "ne" };
    if (cornerNear(x, y, x0, y1, tolerance)) return { bindingIndex: i, handle: "sw" };
    if (cornerNear(x, y, x1, y1, tolerance)) return { bindingIndex: i, handle: "se" };
    const insideX = x >= x0 - tolerance && x <= x1 + tolerance;
    const insideY = y >= y0 - tolerance && y <= y1 + tolerance;
    if (insideX && Math.abs(y - y0) <= tolerance) return { bindingIndex: i, handle: "n" };
    if (insideX && Math.abs(y - y1) <= tolerance) return { bindingIndex: i, handle: "s" };
    if (insideY && Math.abs(x - x0) <= tolerance) return { bindingIndex: i, handle: "w" };
    if (insideY && Math.abs(x - x1) <= tolerance) return { bindingIndex: i, handle: "e" };
    if (x >= x0 && x <= x1 && y >= y0 && y <= y1) return { bindingIndex: i, handle: "move" };
  }
  return null;
}

export function beginDrag(layout: Layout, hit: Hit, x: number, y: number): DragState {
  const binding = layout.bindings[hit.bindingIndex];
  if (!binding) throw new Error(`no binding ${hit.bindingIndex}`);
  const box: Box = [...binding.box];
  return { bindingIndex: hit.bindingIndex, handle: hit.handle, grabDx: x - box[0], grabDy: y - box[1], box };
}

/** Apply the current pointer position. Resizes set the dragged edge to the
 * pointer itself (never below MIN_SIDE); moves preserve the box size. */
export function updateDrag(state: DragState, x: number, y: number): DragState {
  let [x0, y0, x1, y1] = state.box;
  const h = state.handle;
  if (h === "move") {
    const width = x1 - x0;
    const height = y1 - y0;
    x0 = Math.min(Math.max(x - state.grabDx, 0), 1 - width);
    y0 = Math.min(Math.max(y - state.grabDy, 0), 1 - height);
    x0 = snap01(x0);
    y0 = snap01(y0);
    x1 = snap01(x0 + width);
    y1 = snap01(y0 + height);
  } else {
    const px = snap01(x);
    const py = snap01(y);
    if (h === "w" || h === "nw" || h === "sw") x0 = Math.min(px, x1 - MIN_SIDE);
    if (h === "e" || h === "ne" || h === "se") x1 = Math.max(px, x0 + MIN_SIDE);
    if (h === "n" || h === "nw" || h === "ne") y0 = Math.min(py, y1 - MIN_SIDE);
    if (h === "s" || h === "sw" || h === "se") y1 = Math.max(py, y0 + MIN_SIDE);
    x0 = snap01(Math.max(x0, 0));
    y0 = snap01(Math.max(y0, 0));
    x1 = snap01(Math.min(x1, 1));
    y1 = snap01(Math.min(y1, 1));
  }
  return { ...state, box: [x0, y0, x1, y1] };
}

/** Fold the drag back into the layout without mutating the original. */
export function endDrag(layout: Layout, state: DragState): Layout {
  const bindings = layout.bindings.map((binding, i) =>
    i === state.bindingIndex ? { ...binding, box: [...state.box] as Box } : binding,
  );
  return { ...layout, bindings };
}
