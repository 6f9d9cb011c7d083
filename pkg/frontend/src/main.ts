/** Browser entry point: wires the pure editor modules to the DOM. */

import { ApiClient, ApiError } from "./api.js";
import { beginDrag, endDrag, hitTest, updateDrag, type DragState } from "./boxEditor.js";
import {
  currentPanel,
  discardDrafts,
  initialState,
  isDirty,
  visibleKeypoints,
  visibleLayout,
  withDraftKeypoints,
  withDraftLayout,
  withJob,
  withPanel,
  withProject,
  withStatus,
  withUpdatedPanel,
  type EditorState,
  type Mode,
} from "./editorState.js";
import { pollJob } from "./polling.js";
import { hitJoint, keypointProblems, moveJoint, type JointHit } from "./poseEditor.js";
import { drawKeypoints, drawLayout } from "./render.js";
import { SketchRaster } from "./sketchEditor.js";
import { validateLayout } from "./validation.js";

const CANVAS_SIZE = 512;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let state: EditorState = initialState;
let client = new ApiClient(guessBaseUrl());
let drag: DragState | null = null;
let jointDrag: JointHit | null = null;
let sketch: SketchRaster | null = null;
let sketchLast: { u: number; v: number } | null = null;
let panelImage: HTMLImageElement | null = null;
let imageResolution = 512;

function guessBaseUrl(): string {
  if (location.protocol.startsWith("http") && location.port !== "") return location.origin;
  return "http://127.0.0.1:8000";
}

function setState(next: EditorState): void {
  state = next;
  redraw();
}

function fail(err: unknown): void {
  const message =
    err instanceof ApiError
      ? `[${err.code}] ${err.message}${err.path ? ` (${err.path})` : ""}`
      : err instanceof Error
        ? err.message
        : String(err);
  setState(withStatus(state, `error: ${message}`));
}

function canvasPoint(event: PointerEvent): { x: number; y: number } {
  const canvas = el<HTMLCanvasElement>("editor");
  const rect = canvas.getBoundingClientRect();
  return {
    x: Math.min(Math.max((event.clientX - rect.left) / rect.width, 0), 1),
    y: Math.min(Math.max((event.clientY - rect.top) / rect.height, 0), 1),
  };
}

function redraw(): void {
  el<HTMLSpanElement>("status").textContent = state.status;
  renderPanelStrip();
  renderStory();
  const canvas = el<HTMLCanvasElement>("editor");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (panelImage && panelImage.complete && panelImage.naturalWidth > 0) {
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(panelImage, 0, 0, canvas.width, canvas.height);
  } else {
    ctx.fillStyle = "#222";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
  if (sketch && state.mode === "sketch") {
    ctx.fillStyle = "rgba(255, 80, 80, 0.9)";
    const sx = canvas.width / sketch.width;
    const sy = canvas.height / sketch.height;
    for (let y = 0; y < sketch.height; y++) {
      for (let x = 0; x < sketch.width; x++) {
        if (sketch.at(x, y)) ctx.fillRect(x * sx, y * sy, Math.ceil(sx), Math.ceil(sy));
      }
    }
  }
  const layout = visibleLayout(state);
  if (layout && state.mode !== "sketch") {
    drawLayout(ctx, layout, canvas.width, canvas.height, drag?.bindingIndex ?? null);
  }
  if (state.mode === "pose") {
    drawKeypoints(ctx, visibleKeypoints(state), canvas.width, canvas.height);
  }
  renderPanelMeta();
  el<HTMLButtonElement>("commit").disabled = !isDirty(state) && state.mode !== "sketch";
  el<HTMLButtonElement>("regenerate").disabled = !currentPanel(state) || state.activeJob !== null;
}

function renderStory(): void {
  el<HTMLParagraphElement>("story").textContent = state.project?.story_text ?? "";
}

function renderPanelStrip(): void {
  const strip = el<HTMLDivElement>("panels");
  strip.textContent = "";
  for (const panel of state.project?.panels ?? []) {
    const button = document.createElement("button");
    button.textContent = `panel ${panel.index}${panel.image_stale ? " *" : ""}`;
    button.className = panel.index === state.panelIndex ? "selected" : "";
    button.addEventListener("click", () => {
      setState(withPanel(state, panel.index));
      void refreshPanelImage();
    });
    strip.appendChild(button);
  }
}

function renderPanelMeta(): void {
  const panel = currentPanel(state);
  const meta = el<HTMLDivElement>("meta");
  if (!panel) {
    meta.textContent = "";
    return;
  }
  const bits = [
    `condition: ${panel.condition_kind ?? "none"} (${panel.condition_source})`,
    panel.condition_stale ? "condition stale" : "condition current",
    panel.image_stale ? "image stale" : "image current",
    panel.render_seed !== null ? `render seed ${panel.render_seed}` : "",
  ];
  meta.textContent = bits.filter(Boolean).join(" | ");
  el<HTMLParagraphElement>("plot").textContent = panel.plot_text;
}

async function refreshProject(projectId: string): Promise<void> {
  const project = await client.getProject(projectId);
  setState(withProject(state, project));
  await refreshPanelImage();
}

async function refreshPanelImage(): Promise<void> {
  const panel = currentPanel(state);
  if (!panel || !panel.image_ref || state.panelIndex === null || !state.project) {
    panelImage = null;
    redraw();
    return;
  }
  const url = `${client.imageUrl(state.project.id, state.panelIndex)}?v=${panel.rendered_condition_digest ?? ""}`;
  await new Promise<void>((resolve) => {
    const image = new Image();
    image.onload = () => {
      panelImage = image;
      imageResolution = image.naturalWidth;
      resolve();
    };
    image.onerror = () => {
      panelImage = null;
      resolve();
    };
    image.src = url;
  });
  redraw();
}

function currentMode(): Mode {
  const checked = document.querySelector<HTMLInputElement>("input[name=mode]:checked");
  return (checked?.value as Mode) ?? "boxes";
}

function onPointerDown(event: PointerEvent): void {
  const point = canvasPoint(event);
  el<HTMLCanvasElement>("editor").setPointerCapture(event.pointerId);
  if (state.mode === "boxes") {
    const layout = visibleLayout(state);
    if (!layout) return;
    const hit = hitTest(layout, point.x, point.y);
    if (hit) drag = beginDrag(layout, hit, point.x, point.y);
  } else if (state.mode === "pose") {
    jointDrag = hitJoint(visibleKeypoints(state), point.x, point.y);
  } else {
    if (!sketch) sketch = new SketchRaster(imageResolution, imageResolution);
    sketch.lineNormalized(point.x, point.y, point.x, point.y);
    sketchLast = { u: point.x, v: point.y };
    redraw();
  }
}

function onPointerMove(event: PointerEvent): void {
  const point = canvasPoint(event);
  if (state.mode === "boxes" && drag) {
    drag = updateDrag(drag, point.x, point.y);
    const layout = visibleLayout(state);
    if (layout) setState(withDraftLayout(state, endDrag(layout, drag)));
  } else if (state.mode === "pose" && jointDrag) {
    setState(withDraftKeypoints(state, moveJoint(visibleKeypoints(state), jointDrag, point.x, point.y)));
  } else if (state.mode === "sketch" && sketchLast && sketch) {
    sketch.lineNormalized(sketchLast.u, sketchLast.v, point.x, point.y);
    sketchLast = { u: point.x, v: point.y };
    redraw();
  }
}

function onPointerUp(): void {
  drag = null;
  jointDrag = null;
  sketchLast = null;
  redraw();
}

async function commit(): Promise<void> {
  const panel = currentPanel(state);
  if (!panel || !state.project || state.panelIndex === null) return;
  try {
    if (state.mode === "boxes" && state.draftLayout) {
      const report = validateLayout(state.draftLayout);
      if (!report.ok) {
        const first = report.violations[0];
        setState(withStatus(state, `invalid layout: ${first?.code} at ${first?.path}`));
        return;
      }
      const updated = await client.putLayout(state.project.id, state.panelIndex, state.draftLayout);
      setState(withStatus(discardDrafts(withUpdatedPanel(state, updated)), "layout committed"));
    } else if (state.mode === "pose" && state.draftKeypoints) {
      const problems = keypointProblems(state.draftKeypoints);
      if (problems.length > 0) {
        setState(withStatus(state, `invalid keypoints: ${problems[0]}`));
        return;
      }
      const updated = await client.putKeypoints(state.project.id, state.panelIndex, state.draftKeypoints);
      setState(withStatus(discardDrafts(withUpdatedPanel(state, updated)), "keypoints committed"));
    } else if (state.mode === "sketch" && sketch) {
      const png = await rasterToPng(sketch);
      const updated = await client.putConditionPng(state.project.id, state.panelIndex, png);
      sketch = null;
      setState(withStatus(withUpdatedPanel(state, updated), "sketch committed"));
    }
  } catch (err) {
    fail(err);
  }
}

async function rasterToPng(raster: SketchRaster): Promise<Uint8Array> {
  const canvas = document.createElement("canvas");
  canvas.width = raster.width;
  canvas.height = raster.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context for PNG encoding");
  const pixels = ctx.createImageData(raster.width, raster.height);
  for (let i = 0; i < raster.data.length; i++) {
    const v = raster.data[i] ? 255 : 0;
    pixels.data[i * 4] = v;
    pixels.data[i * 4 + 1] = v;
    pixels.data[i * 4 + 2] = v;
    pixels.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(pixels, 0, 0);
  const blob = await new Promise<Blob | null>((resolve) => canvas.toBlob(resolve, "image/png"));
  if (!blob) throw new Error("PNG encoding failed");
  return new Uint8Array(await blob.arrayBuffer());
}

async function regenerate(): Promise<void> {
  if (!state.project || state.panelIndex === null) return;
  const seedText = el<HTMLInputElement>("seed").value.trim();
  const seed = seedText === "" ? undefined : Number(seedText);
  try {
    const { job_id } = await client.regenerate(state.project.id, state.panelIndex, seed);
    setState(withJob(state, job_id, `regenerating (job ${job_id})`));
    await pollJob(client, job_id, {
      timeoutMs: 300_000,
      onTick: (job) => setState(withStatus(state, `job ${job.id}: ${job.status}`)),
    });
    setState(withJob(state, null, "regenerated"));
    await refreshProject(state.project.id);
  } catch (err) {
    setState(withJob(state, null));
    fail(err);
  }
}

async function createProject(): Promise<void> {
  const request = el<HTMLInputElement>("request").value.trim();
  if (!request) {
    setState(withStatus(state, "enter a one-line request first"));
    return;
  }
  try {
    setState(withStatus(state, "creating project..."));
    const created = await client.createProject(request);
    setState(withStatus(state, `running (job ${created.job_id})`));
    await pollJob(client, created.job_id, { timeoutMs: 600_000 });
    await refreshProject(created.project_id);
    el<HTMLInputElement>("project-id").value = created.project_id;
  } catch (err) {
    fail(err);
  }
}

async function loadProject(): Promise<void> {
  const projectId = el<HTMLInputElement>("project-id").value.trim();
  if (!projectId) return;
  try {
    await refreshProject(projectId);
  } catch (err) {
    fail(err);
  }
}

export function start(): void {
  const canvas = el<HTMLCanvasElement>("editor");
  canvas.width = CANVAS_SIZE;
  canvas.height = CANVAS_SIZE;
  canvas.addEventListener("pointerdown", onPointerDown);
  canvas.addEventListener("pointermove", onPointerMove);
  canvas.addEventListener("pointerup", onPointerUp);
  el<HTMLButtonElement>("create").addEventListener("click", () => void createProject());
  el<HTMLButtonElement>("load").addEventListener("click", () => void loadProject());
  el<HTMLButtonElement>("commit").addEventListener("click", () => void commit());
  el<HTMLButtonElement>("regenerate").addEventListener("click", () => void regenerate());
  el<HTMLInputElement>("server").value = client.baseUrl;
  el<HTMLInputElement>("server").addEventListener("change", (event) => {
    client = new ApiClient((event.target as HTMLInputElement).value);
  });
  for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=mode]")) {
    radio.addEventListener("change", () => {
      state = { ...state, mode: currentMode() };
      if (state.mode !== "sketch") sketch = null;
      redraw();
    });
  }
  redraw();
}

start();
