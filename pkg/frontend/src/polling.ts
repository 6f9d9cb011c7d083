/** Background-job polling with a hard deadline. */

import type { ApiClient } from "./api.js";
import type { JobState } from "./types.js";

export class JobFailedError extends Error {
  readonly job: JobState;

  constructor(job: JobState) {
    const error = job.error;
    super(error ? `job ${job.id} failed: [${error.code}] ${error.message}` : `job ${job.id} failed`);
    this.name = "JobFailedError";
    this.job = job;
  }
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onTick?: (job: JobState) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll until the job leaves `running`. Resolves with the final state on
 * `done`, throws JobFailedError on `failed`, throws on deadline. */
export async function pollJob(client: ApiClient, jobId: string, options: PollOptions = {}): Promise<JobState> {
  const interval = options.intervalMs ?? 150;
  const timeout = options.timeoutMs ?? 60_000;
  const sleep = options.sleep ?? defaultSleep;
  const deadline = Date.now() + timeout;
  for (;;) {
    const job = await client.getJob(jobId);
    options.onTick?.(job);
    if (job.status === "done") return job;
    if (job.status === "failed") throw new JobFailedError(job);
    if (Date.now() >= deadline) {
      throw new Error(`job ${jobId} still running after ${timeout}ms`);
    }
    await sleep(interval);
  }
}
