import { describe, expect, it } from "vitest";

import { beginDrag, endDrag, hitTest, MIN_SIDE, updateDrag } from "../src/boxEditor.js";
import type { Layout } from "../src/types.js";

function layoutWith(...boxes: [number, number, number, number][]): Layout {
  return {
    global_prompt: "a scene",
    panel_index: 1,
    bindings: boxes.map((box, i) => ({ local_prompt: `subject ${i}`, box, subject_ref: null })),
  };
}

describe("hitTest", () => {
  const layout = layoutWith([0.2, 0.2, 0.6, 0.6], [0.5, 0.5, 0.9, 0.9]);

  it("prefers corners, then edges, then the interior", () => {
    expect(hitTest(layout, 0.2, 0.2)).toEqual({ bindingIndex: 0, handle: "nw" });
    expect(hitTest(layout, 0.6, 0.6)).toEqual({ bindingIndex: 1, handle: "move" });
    expect(hitTest(layout, 0.4, 0.2)).toEqual({ bindingIndex: 0, handle: "n" });
    expect(hitTest(layout, 0.2, 0.4)).toEqual({ bindingIndex: 0, handle: "w" });
    expect(hitTest(layout, 0.3, 0.3)).toEqual({ bindingIndex: 0, handle: "move" });
  });

  it("gives overlapping hits to the later binding", () => {
    expect(hitTest(layout, 0.55, 0.55)).toEqual({ bindingIndex: 1, handle: "move" });
    expect(hitTest(layout, 0.9, 0.9)).toEqual({ bindingIndex: 1, handle: "se" });
  });

  it("misses empty space", () => {
    expect(hitTest(layout, 0.05, 0.05)).toBeNull();
  });
});

describe("updateDrag", () => {
  const layout = layoutWith([0.2, 0.2, 0.6, 0.6]);

  it("moves the box preserving its size", () => {
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "move" }, 0.3, 0.3);
    const moved = updateDrag(drag, 0.5, 0.4);
    const [x0, y0, x1, y1] = moved.box;
    expect(x1 - x0).toBeCloseTo(0.4, 12);
    expect(y1 - y0).toBeCloseTo(0.4, 12);
    expect(x0).toBeCloseTo(0.4, 12);
    expect(y0).toBeCloseTo(0.3, 12);
  });

  it("clamps moves to the frame", () => {
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "move" }, 0.3, 0.3);
    const moved = updateDrag(drag, 2.0, -1.0);
    expect(moved.box[0]).toBeCloseTo(0.6, 12);
    expect(moved.box[2]).toBe(1);
    expect(moved.box[1]).toBe(0);
    expect(moved.box[3]).toBeCloseTo(0.4, 12);
  });

  it("resizes by setting the dragged edge to the pointer", () => {
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "se" }, 0.6, 0.6);
    const resized = updateDrag(drag, 0.85, 0.75);
    expect(resized.box).toEqual([0.2, 0.2, 0.85, 0.75]);
  });

  it("keeps at least the minimum side when resizing through the box", () => {
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "e" }, 0.6, 0.4);
    const collapsed = updateDrag(drag, 0.05, 0.4);
    expect(collapsed.box[2] - collapsed.box[0]).toBeCloseTo(MIN_SIDE, 12);
  });

  it("snaps coordinates below the canonical float range to zero", () => {
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "w" }, 0.2, 0.4);
    const nudged = updateDrag(drag, 3e-5, 0.4);
    expect(nudged.box[0]).toBe(0);
  });
});

describe("endDrag", () => {
  it("replaces only the dragged binding and keeps the original layout intact", () => {
    const layout = layoutWith([0.2, 0.2, 0.6, 0.6], [0.7, 0.7, 0.9, 0.9]);
    const drag = beginDrag(layout, { bindingIndex: 0, handle: "se" }, 0.6, 0.6);
    const updated = endDrag(layout, updateDrag(drag, 0.5, 0.5));
    expect(updated.bindings[0]?.box).toEqual([0.2, 0.2, 0.5, 0.5]);
    expect(updated.bindings[1]).toBe(layout.bindings[1]);
    expect(layout.bindings[0]?.box).toEqual([0.2, 0.2, 0.6, 0.6]);
  });
});
