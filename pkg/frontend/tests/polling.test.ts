import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { JobFailedError, pollJob } from "../src/polling.js";
import type { JobState } from "../src/types.js";

function scripted(statuses: JobState["status"][], error: JobState["error"] = null): ApiClient {
  let call = 0;
  return {
    getJob: async (id: string): Promise<JobState> => {
      const status = statuses[Math.min(call++, statuses.length - 1)] ?? "done";
      return { id, project_id: "p", stage: "render", status, error: status === "failed" ? error : null, panel_index: 1 };
    },
  } as unknown as ApiClient;
}

const noSleep = () => Promise.resolve();

describe("pollJob", () => {
  it("polls until the job is done", async () => {
    const job = await pollJob(scripted(["running", "running", "done"]), "j1", { sleep: noSleep });
    expect(job.status).toBe("done");
  });

  it("throws JobFailedError with the error payload", async () => {
    const error = { code: "BACKEND_FAILED", message: "renderer crashed", path: null };
    await expect(
      pollJob(scripted(["running", "failed"], error), "j2", { sleep: noSleep }),
    ).rejects.toThrowError(JobFailedError);
    await expect(
      pollJob(scripted(["failed"], error), "j2", { sleep: noSleep }),
    ).rejects.toThrow(/BACKEND_FAILED/);
  });

  it("gives up after the deadline", async () => {
    await expect(
      pollJob(scripted(["running"]), "j3", { sleep: noSleep, timeoutMs: 0 }),
    ).rejects.toThrow(/still running/);
  });

  it("reports each observation through onTick", async () => {
    const seen: string[] = [];
    await pollJob(scripted(["running", "done"]), "j4", {
      sleep: noSleep,
      onTick: (job) => seen.push(job.status),
    });
    expect(seen).toEqual(["running", "done"]);
  });
});
