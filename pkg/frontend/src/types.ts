/** Wire types for the autostory HTTP API. Field names match the server. */

export type Box = [number, number, number, number]; // x0, y0, x1, y1 in [0, 1]

export interface Binding {
  local_prompt: string;
  box: Box;
  subject_ref: string | null;
}

export interface Layout {
  global_prompt: string;
  panel_index: number;
  bindings: Binding[];
}

export interface Joint {
  name: string;
  x: number;
  y: number;
  visible: boolean;
}

export interface KeypointSet {
  joints: Joint[];
  skeleton: [string, string][];
}

export interface PanelState {
  index: number;
  plot_text: string;
  layout: Layout | null;
  condition_kind: string | null;
  condition_digest: string | null;
  keypoints: KeypointSet[];
  image_ref: string | null;
  condition_source: string;
  condition_stale: boolean;
  image_stale: boolean;
  render_seed: number | null;
  rendered_layout_digest: string | null;
  rendered_condition_digest: string | null;
}

export interface CharacterState {
  name: string;
  description: string;
  n_images: number;
  is_human: boolean;
  source: string;
  custom_weights_ref: string | null;
}

export interface ProjectState {
  id: string;
  request_text: string;
  story_text: string;
  seed: number;
  digest: string;
  panels: PanelState[];
  characters: CharacterState[];
}

export interface JobState {
  id: string;
  project_id: string;
  stage: string;
  status: "running" | "done" | "failed";
  error: { code: string; message: string; path: string | null } | null;
  panel_index: number | null;
}

export interface Violation {
  code: string;
  path: string;
}

export interface ValidationResult {
  ok: boolean;
  violations: Violation[];
}
