/** Typed fetch client for the autostory HTTP API. */

import type { JobState, KeypointSet, Layout, PanelState, ProjectState } from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly path: string | null;

  constructor(status: number, code: string, message: string, path: string | null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.path = path;
  }
}

export interface CreateProjectResult {
  project_id: string;
  job_id: string;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseFor(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "HTTP_ERROR";
  let message = `${response.status} ${response.statusText}`;
  let path: string | null = null;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = typeof body.message === "string" ? body.message : message;
      path = typeof body.path === "string" ? body.path : null;
    }
  } catch {
    // non-JSON error body; keep the HTTP status as the message
  }
  throw new ApiError(response.status, code, message, path);
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    await raiseFor(response);
    return (await response.json()) as T;
  }

  createProject(request: string, seed?: number, config?: Record<string, unknown>): Promise<CreateProjectResult> {
    const body: Record<string, unknown> = { request };
    if (seed !== undefined) body.seed = seed;
    if (config !== undefined) body.config = config;
    return this.json("/projects", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getProject(projectId: string): Promise<ProjectState> {
    return this.json(`/projects/${projectId}`);
  }

  getLayout(projectId: string, panel: number): Promise<Layout> {
    return this.json(`/projects/${projectId}/panels/${panel}/layout`);
  }

  putLayout(projectId: string, panel: number, layout: Layout): Promise<PanelState> {
    return this.json(`/projects/${projectId}/panels/${panel}/layout`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(layout),
    });
  }

  putConditionPng(projectId: string, panel: number, png: Uint8Array): Promise<PanelState> {
    return this.json(`/projects/${projectId}/panels/${panel}/condition`, {
      method: "PUT",
      headers: { "content-type": "image/png" },
      body: png as unknown as BodyInit,
    });
  }

  putKeypoints(projectId: string, panel: number, sets: KeypointSet[]): Promise<PanelState> {
    return this.json(`/projects/${projectId}/panels/${panel}/condition`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ keypoint_sets: sets }),
    });
  }

  regenerate(projectId: string, panel: number, seed?: number): Promise<{ job_id: string }> {
    return this.json(`/projects/${projectId}/panels/${panel}/regenerate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(seed === undefined ? {} : { seed }),
    });
  }

  getJob(jobId: string): Promise<JobState> {
    return this.json(`/jobs/${jobId}`);
  }

  async getBytes(path: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.baseUrl + path);
    await raiseFor(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  getConditionPng(projectId: string, panel: number): Promise<Uint8Array> {
    return this.getBytes(`/projects/${projectId}/panels/${panel}/condition`);
  }

  getImagePng(projectId: string, panel: number): Promise<Uint8Array> {
    return this.getBytes(`/projects/${projectId}/panels/${panel}/image`);
  }

  imageUrl(projectId: string, panel: number): string {
    return `${this.baseUrl}/projects/${projectId}/panels/${panel}/image`;
  }

  conditionUrl(projectId: string, panel: number): string {
    return `${this.baseUrl}/projects/${projectId}/panels/${panel}/condition`;
  }
}
