/** Scripted editing session against a real server. Spawns the Python service,
 * builds a project, drags a box with the editor state machine, commits it,
 * regenerates the panel, and checks the provenance digest of the new image
 * matches the layout the client committed. */

import { spawn, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { beginDrag, endDrag, hitTest, updateDrag } from "../src/boxEditor.js";
import { layoutDigest } from "../src/canonical.js";
import { pollJob } from "../src/polling.js";
import type { Layout } from "../src/types.js";
import { validateLayout } from "../src/validation.js";

const PORT = 8200 + Math.floor(Math.random() * 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const sha256hex = (bytes: Uint8Array) => createHash("sha256").update(bytes).digest("hex");

let server: ChildProcess;
let workdir: string;
const client = new ApiClient(BASE);

async function serverReady(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/jobs/nope`);
      if (response.status === 404) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error("server did not come up");
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "editor-session-"));
  server = spawn(
    "python3",
    ["-m", "autostory", "serve", "--projects-root", join(workdir, "projects"), "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await serverReady(30_000);
}, 60_000);

afterAll(() => {
  server?.kill("SIGKILL");
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("scripted editing session", () => {
  let projectId: string;

  it("creates and runs a project", async () => {
    const created = await client.createProject("a story about a dog and a cat", 11, {
      k_panels: 2,
      resolution: 64,
    });
    projectId = created.project_id;
    const job = await pollJob(client, created.job_id, { timeoutMs: 120_000 });
    expect(job.status).toBe("done");
    const project = await client.getProject(projectId);
    expect(project.panels).toHaveLength(2);
    expect(project.panels.every((p) => p.image_ref !== null)).toBe(true);
  }, 150_000);

  it("drags a box, commits, regenerates, and the digest provenance matches", async () => {
    const layout = await client.getLayout(projectId, 1);
    expect(layout.bindings.length).toBeGreaterThan(0);

    const before = (await client.getProject(projectId)).panels.find((p) => p.index === 1);
    expect(before).toBeDefined();
    expect(before?.image_stale).toBe(false);

    // grab the first box's se corner and drag it
    const [x0, y0, x1, y1] = layout.bindings[0]!.box;
    const hit = hitTest(layout, x1, y1);
    expect(hit).toEqual({ bindingIndex: 0, handle: "se" });
    let drag = beginDrag(layout, hit!, x1, y1);
    drag = updateDrag(drag, 0.62, 0.57);
    drag = updateDrag(drag, Math.min(x0 + 0.5, 0.98), Math.min(y0 + 0.4, 0.98));
    const edited = endDrag(layout, drag);
    expect(edited.bindings[0]!.box).not.toEqual(layout.bindings[0]!.box);

    const report = validateLayout(edited);
    expect(report.ok).toBe(true);

    const committed = await client.putLayout(projectId, 1, edited);
    expect(committed.condition_stale).toBe(true);
    expect(committed.image_stale).toBe(true);
    expect(committed.image_ref).toBe(before!.image_ref);

    const oldImage = await client.getImagePng(projectId, 1);
    const { job_id } = await client.regenerate(projectId, 1);
    await pollJob(client, job_id, { timeoutMs: 120_000 });

    const refreshed = (await client.getProject(projectId)).panels.find((p) => p.index === 1)!;
    expect(refreshed.condition_stale).toBe(false);
    expect(refreshed.image_stale).toBe(false);
    expect(refreshed.image_ref).not.toBe(before!.image_ref);

    // the image now on the panel was rendered from exactly the layout we sent
    expect(refreshed.rendered_layout_digest).toBe(layoutDigest(edited, sha256hex));
    expect(refreshed.rendered_condition_digest).toBe(refreshed.condition_digest);

    const newImage = await client.getImagePng(projectId, 1);
    expect(Buffer.from(newImage).equals(Buffer.from(oldImage))).toBe(false);
    expect(newImage.slice(0, 4)).toEqual(new Uint8Array([0x89, 0x50, 0x4e, 0x47]));
  }, 150_000);

  it("client-side validation matches a server rejection", async () => {
    const layout = await client.getLayout(projectId, 1);
    const broken: Layout = {
      ...layout,
      bindings: [{ ...layout.bindings[0]!, box: [0.5, 0.5, 0.5, 0.9] }],
    };
    const report = validateLayout(broken);
    expect(report.ok).toBe(false);
    expect(report.violations[0]?.code).toBe("BOX_DEGENERATE");

    await expect(client.putLayout(projectId, 1, broken)).rejects.toMatchObject({
      status: 422,
      code: "VALIDATION_FAILED",
    });
  }, 30_000);

  it("a hand-edited pose condition survives regeneration", async () => {
    const sets = [
      {
        joints: [
          { name: "head", x: 0.5, y: 0.2, visible: true },
          { name: "hip", x: 0.5, y: 0.6, visible: true },
          { name: "knee", x: 0.45, y: 0.8, visible: true },
        ],
        skeleton: [
          ["head", "hip"],
          ["hip", "knee"],
        ] as [string, string][],
      },
    ];
    const committed = await client.putKeypoints(projectId, 2, sets);
    expect(committed.condition_source).toBe("user");
    expect(committed.condition_kind).toBe("keypoint-raster");
    expect(committed.image_stale).toBe(true);
    const digest = committed.condition_digest;
    expect(digest).toMatch(/^[0-9a-f]{64}$/);

    const conditionBytes = await client.getConditionPng(projectId, 2);
    expect(conditionBytes.slice(0, 4)).toEqual(new Uint8Array([0x89, 0x50, 0x4e, 0x47]));

    const { job_id } = await client.regenerate(projectId, 2);
    await pollJob(client, job_id, { timeoutMs: 120_000 });

    const refreshed = (await client.getProject(projectId)).panels.find((p) => p.index === 2)!;
    expect(refreshed.condition_source).toBe("user");
    expect(refreshed.condition_digest).toBe(digest);
    expect(refreshed.rendered_condition_digest).toBe(digest);
    expect(refreshed.keypoints).toHaveLength(1);
    expect(refreshed.keypoints[0]?.joints.map((j) => j.name)).toEqual(["head", "hip", "knee"]);
  }, 150_000);
});
