/** Editor state as a reducer over immutable snapshots. The browser layer
 * subscribes and redraws; tests drive transitions directly. */

import type { KeypointSet, Layout, PanelState, ProjectState } from "./types.js";

export type Mode = "boxes" | "pose" | "sketch";

export interface EditorState {
  project: ProjectState | null;
  panelIndex: number | null;
  mode: Mode;
  // uncommitted edits; null means "as on the server"
  draftLayout: Layout | null;
  draftKeypoints: KeypointSet[] | null;
  activeJob: string | null;
  status: string;
}

export const initialState: EditorState = {
  project: null,
  panelIndex: null,
  mode: "boxes",
  draftLayout: null,
  draftKeypoints: null,
  activeJob: null,
  status: "no project loaded",
};

export function currentPanel(state: EditorState): PanelState | null {
  if (!state.project || state.panelIndex === null) return null;
  return state.project.panels.find((p) => p.index === state.panelIndex) ?? null;
}

/** Layout the editor should display: the draft if one exists. */
export function visibleLayout(state: EditorState): Layout | null {
  return state.draftLayout ?? currentPanel(state)?.layout ?? null;
}

export function visibleKeypoints(state: EditorState): KeypointSet[] {
  return state.draftKeypoints ?? currentPanel(state)?.keypoints ?? [];
}

export function isDirty(state: EditorState): boolean {
  return state.draftLayout !== null || state.draftKeypoints !== null;
}

export function withProject(state: EditorState, project: ProjectState): EditorState {
  const first = project.panels[0]?.index ?? null;
  const keep = state.panelIndex !== null && project.panels.some((p) => p.index === state.panelIndex);
  return {
    ...state,
    project,
    panelIndex: keep ? state.panelIndex : first,
    draftLayout: null,
    draftKeypoints: null,
    status: `project ${project.id}`,
  };
}

export function withPanel(state: EditorState, panelIndex: number): EditorState {
  if (!state.project?.panels.some((p) => p.index === panelIndex)) return state;
  return { ...state, panelIndex, draftLayout: null, draftKeypoints: null };
}

export function withDraftLayout(state: EditorState, layout: Layout): EditorState {
  return { ...state, draftLayout: layout };
}

export function withDraftKeypoints(state: EditorState, sets: KeypointSet[]): EditorState {
  return { ...state, draftKeypoints: sets };
}

export function discardDrafts(state: EditorState): EditorState {
  return { ...state, draftLayout: null, draftKeypoints: null };
}

/** Merge one refreshed panel back into the project snapshot. */
export function withUpdatedPanel(state: EditorState, panel: PanelState): EditorState {
  if (!state.project) return state;
  const panels = state.project.panels.map((p) => (p.index === panel.index ? panel : p));
  return { ...state, project: { ...state.project, panels } };
}

export function withJob(state: EditorState, jobId: string | null, status?: string): EditorState {
  return { ...state, activeJob: jobId, status: status ?? state.status };
}

export function withStatus(state: EditorState, status: string): EditorState {
  return { ...state, status };
}
