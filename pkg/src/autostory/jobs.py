"""In-memory background job tracking.

Jobs run on daemon threads. The manager enforces one job in flight per
(project, panel): a whole-project job conflicts with everything for that
project, a panel job only with the same panel. Job records are process-local
and never persisted; project state on disk is the durable record.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable

from .errors import AutoStoryError


@dataclass
class JobRecord:
    id: str
    project_id: str
    stage: str
    status: str = "queued"
    error: dict | None = None
    panel_index: int | None = None
    created_at: float = field(default_factory=time.time)
    started_at: float | None = None
    finished_at: float | None = None

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "project_id": self.project_id,
            "stage": self.stage,
            "status": self.status,
            "error": self.error,
            "panel_index": self.panel_index,
        }


class JobManager:
    def __init__(self) -> None:
        self._jobs: dict[str, JobRecord] = {}
        self._threads: dict[str, threading.Thread] = {}
        # (project_id, panel_index or None) -> job id, for jobs not yet finished
        self._active: dict[tuple[str, int | None], str] = {}
        self._lock = threading.Lock()

    def _conflict(self, project_id: str, panel_index: int | None) -> str | None:
        for (pid, pix), jid in self._active.items():
            if pid != project_id:
                continue
            if panel_index is None or pix is None or pix == panel_index:
                return jid
        return None

    def active_job(self, project_id: str, panel_index: int | None = None) -> JobRecord | None:
        with self._lock:
            jid = self._conflict(project_id, panel_index)
            return self._jobs[jid] if jid is not None else None

    def submit(
        self,
        project_id: str,
        stage: str,
        fn: Callable[[], None],
        *,
        panel_index: int | None = None,
    ) -> JobRecord:
        with self._lock:
            jid = self._conflict(project_id, panel_index)
            if jid is not None:
                raise AutoStoryError(
                    "BUSY",
                    f"project {project_id} already has job {jid} in flight",
                    path=f"jobs/{jid}",
                )
            job = JobRecord(
                id=uuid.uuid4().hex[:12],
                project_id=project_id,
                stage=stage,
                panel_index=panel_index,
            )
            self._jobs[job.id] = job
            self._active[(project_id, panel_index)] = job.id
            thread = threading.Thread(target=self._run, args=(job, fn), daemon=True)
            self._threads[job.id] = thread
        thread.start()
        return job

    def _run(self, job: JobRecord, fn: Callable[[], None]) -> None:
        job.status = "running"
        job.started_at = time.time()
        try:
            fn()
            job.status = "done"
        except AutoStoryError as exc:
            job.status = "failed"
            job.error = exc.to_payload()
        except Exception as exc:
            job.status = "failed"
            job.error = {"code": "INTERNAL", "path": None, "message": str(exc)}
        finally:
            job.finished_at = time.time()
            with self._lock:
                self._active.pop((job.project_id, job.panel_index), None)

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise AutoStoryError("NOT_FOUND", f"no job {job_id!r}", path=f"jobs/{job_id}")
        return job

    def wait(self, job_id: str, timeout: float | None = None) -> JobRecord:
        """Block until the job's thread exits; mainly for tests and the CLI."""
        with self._lock:
            thread = self._threads.get(job_id)
        if thread is not None:
            thread.join(timeout)
        return self.get(job_id)
