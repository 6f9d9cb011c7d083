import { describe, expect, it } from "vitest";

import {
  currentPanel,
  discardDrafts,
  initialState,
  isDirty,
  visibleLayout,
  withDraftLayout,
  withPanel,
  withProject,
  withUpdatedPanel,
} from "../src/editorState.js";
import type { Layout, PanelState, ProjectState } from "../src/types.js";

function panel(index: number, overrides: Partial<PanelState> = {}): PanelState {
  return {
    index,
    plot_text: `beat ${index}`,
    layout: {
      global_prompt: "a scene",
      panel_index: index,
      bindings: [{ local_prompt: "a dog", box: [0.1, 0.1, 0.5, 0.5], subject_ref: null }],
    },
    condition_kind: "sketch",
    condition_digest: "d".repeat(64),
    keypoints: [],
    image_ref: "img",
    condition_source: "auto",
    condition_stale: false,
    image_stale: false,
    render_seed: 7,
    rendered_layout_digest: null,
    rendered_condition_digest: null,
    ...overrides,
  };
}

function project(...panels: PanelState[]): ProjectState {
  return {
    id: "proj",
    request_text: "a story",
    story_text: "Once.",
    seed: 11,
    digest: "x".repeat(64),
    panels,
    characters: [],
  };
}

describe("editor state transitions", () => {
  it("selects the first panel when a project loads", () => {
    const state = withProject(initialState, project(panel(1), panel(2)));
    expect(state.panelIndex).toBe(1);
    expect(currentPanel(state)?.index).toBe(1);
  });

  it("keeps the selected panel across a refresh when it still exists", () => {
    let state = withProject(initialState, project(panel(1), panel(2)));
    state = withPanel(state, 2);
    state = withProject(state, project(panel(1), panel(2)));
    expect(state.panelIndex).toBe(2);
  });

  it("shows the draft layout over the server layout and tracks dirtiness", () => {
    let state = withProject(initialState, project(panel(1)));
    expect(isDirty(state)).toBe(false);
    const draft: Layout = {
      global_prompt: "a scene",
      panel_index: 1,
      bindings: [{ local_prompt: "a dog", box: [0.2, 0.2, 0.9, 0.9], subject_ref: null }],
    };
    state = withDraftLayout(state, draft);
    expect(isDirty(state)).toBe(true);
    expect(visibleLayout(state)).toBe(draft);
    state = discardDrafts(state);
    expect(visibleLayout(state)?.bindings[0]?.box).toEqual([0.1, 0.1, 0.5, 0.5]);
  });

  it("drops drafts when switching panels", () => {
    let state = withProject(initialState, project(panel(1), panel(2)));
    state = withDraftLayout(state, panel(1).layout as Layout);
    state = withPanel(state, 2);
    expect(isDirty(state)).toBe(false);
  });

  it("merges a refreshed panel into the snapshot", () => {
    let state = withProject(initialState, project(panel(1), panel(2)));
    state = withUpdatedPanel(state, panel(2, { image_stale: true, condition_source: "user" }));
    expect(state.project?.panels[1]?.image_stale).toBe(true);
    expect(state.project?.panels[0]?.image_stale).toBe(false);
  });
});
