"""HTTP service wrapping the pipeline.

One directory tree of projects, one in-memory job manager. Handlers load the
project from disk, apply the operation through a PipelineRunner built from the
project's own config, and save. A per-project lock serializes writers inside
this process; the job manager keeps concurrent jobs off the same panel.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .. import __version__
from ..config import PipelineConfig
from ..errors import AutoStoryError
from ..imaging import condition_from_png, condition_to_png
from ..jobs import JobManager
from ..model import Project
from ..pipeline import PipelineRunner, project_id_for
from ..store import load_project, project_digest
from .schemas import (
    ConditionEditModel,
    CreateProjectRequest,
    CreateProjectResponse,
    JobModel,
    JobRef,
    LayoutModel,
    PanelModel,
    ProjectModel,
    RegenerateRequest,
)

_STATUS_BY_CODE = {
    "NOT_FOUND": 404,
    "PANEL_NOT_FOUND": 404,
    "VALIDATION_FAILED": 422,
    "RESOLUTION_MISMATCH": 422,
    "PARSE_FAILED": 422,
    "KEYPOINTS_INVALID": 422,
    "EMPTY_REQUEST": 422,
    "INVALID_CONFIG": 422,
    "SCHEMA_MISMATCH": 422,
    "NO_LAYOUT": 422,
    "NO_CONDITION": 422,
    "BUSY": 409,
    "CONFLICT": 409,
}


def create_app(
    projects_root: Path | str,
    config: PipelineConfig | None = None,
    *,
    backends=None,
) -> FastAPI:
    """Build the service. `config` seeds new projects; `backends` overrides
    backend resolution for every project (used by tests)."""
    root = Path(projects_root)
    root.mkdir(parents=True, exist_ok=True)
    base_config = config if config is not None else PipelineConfig()
    jobs = JobManager()
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(project_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(project_id, threading.Lock())

    def load(project_id: str) -> Project:
        return load_project(root / project_id)

    def runner_for(project: Project) -> PipelineRunner:
        return PipelineRunner.for_project(project, root=root, backends=backends, jobs=jobs)

    app = FastAPI(title="autostory", version=__version__)

    @app.exception_handler(AutoStoryError)
    async def on_autostory_error(request: Request, exc: AutoStoryError):
        return JSONResponse(status_code=_STATUS_BY_CODE.get(exc.code, 500), content=exc.to_payload())

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(part) for part in first.get("loc", ()))
        return JSONResponse(
            status_code=422,
            content={"code": "VALIDATION_FAILED", "path": path or None, "message": first.get("msg", "invalid request")},
        )

    @app.post("/projects", response_model=CreateProjectResponse)
    def create_project(body: CreateProjectRequest):
        if body.config:
            merged = dict(base_config.to_dict())
            merged.update(body.config)
            project_config = PipelineConfig.from_dict(merged)
        else:
            project_config = base_config
        # refuse before new_project clobbers the manifest of a project in flight
        seed = body.seed if body.seed is not None else project_config.seed
        active = jobs.active_job(project_id_for(body.request, seed))
        if active is not None:
            raise AutoStoryError(
                "BUSY",
                f"project already has job {active.id} in flight",
                path=f"jobs/{active.id}",
            )
        runner = PipelineRunner(project_config, root=root, backends=backends, jobs=jobs)
        project = runner.new_project(body.request, seed=body.seed)

        def work() -> None:
            with lock_for(project.id):
                runner.run(runner.load(project.id))

        job = jobs.submit(project.id, "run", work)
        return CreateProjectResponse(project_id=project.id, job_id=job.id)

    @app.get("/projects/{project_id}", response_model=ProjectModel)
    def get_project(project_id: str):
        project = load(project_id)
        return ProjectModel.from_project(project, digest=project_digest(project))

    @app.get("/projects/{project_id}/panels/{panel_index}/layout", response_model=LayoutModel)
    def get_layout(project_id: str, panel_index: int):
        panel = load(project_id).panel(panel_index)
        if panel.layout is None:
            raise AutoStoryError(
                "NOT_FOUND", f"panel {panel_index} has no layout yet", path=f"panels/{panel_index}/layout"
            )
        return LayoutModel.from_layout(panel.layout)

    @app.put("/projects/{project_id}/panels/{panel_index}/layout", response_model=PanelModel)
    def put_layout(project_id: str, panel_index: int, body: LayoutModel):
        with lock_for(project_id):
            project = load(project_id)
            panel = runner_for(project).apply_layout_edit(project, panel_index, body.to_layout())
        return PanelModel.from_panel(panel)

    @app.put("/projects/{project_id}/panels/{panel_index}/condition", response_model=PanelModel)
    async def put_condition(project_id: str, panel_index: int, request: Request):
        content_type = request.headers.get("content-type", "").split(";")[0].strip().lower()
        with lock_for(project_id):
            project = load(project_id)
            panel = project.panel(panel_index)
            runner = runner_for(project)
            if content_type == "image/png":
                data = await request.body()
                kind = panel.condition.kind if panel.condition is not None else "sketch"
                try:
                    condition = condition_from_png(data, kind=kind)
                except Exception as exc:
                    raise AutoStoryError(
                        "PARSE_FAILED", f"body is not a decodable grayscale PNG: {exc}"
                    ) from exc
                panel = runner.apply_condition_edit(project, panel_index, condition=condition)
            elif content_type == "application/json":
                try:
                    edit = ConditionEditModel.model_validate_json(await request.body())
                except ValidationError as exc:
                    first = exc.errors()[0] if exc.errors() else {}
                    loc = ".".join(str(part) for part in first.get("loc", ()))
                    raise AutoStoryError(
                        "VALIDATION_FAILED", first.get("msg", "invalid condition edit"), path=loc or None
                    ) from exc
                sets = tuple(model.to_set() for model in edit.keypoint_sets)
                panel = runner.apply_condition_edit(project, panel_index, keypoint_sets=sets)
            else:
                raise AutoStoryError(
                    "VALIDATION_FAILED",
                    f"unsupported content type {content_type!r}; send image/png or application/json",
                )
        return PanelModel.from_panel(panel)

    @app.get("/projects/{project_id}/panels/{panel_index}/condition")
    def get_condition(project_id: str, panel_index: int):
        panel = load(project_id).panel(panel_index)
        if panel.condition is None:
            raise AutoStoryError(
                "NOT_FOUND", f"panel {panel_index} has no condition yet", path=f"panels/{panel_index}/condition"
            )
        return Response(content=condition_to_png(panel.condition), media_type="image/png")

    @app.post("/projects/{project_id}/panels/{panel_index}/regenerate", response_model=JobRef)
    def regenerate(project_id: str, panel_index: int, body: RegenerateRequest | None = None):
        project = load(project_id)
        panel = project.panel(panel_index)
        if panel.layout is None:
            raise AutoStoryError(
                "NO_LAYOUT", f"panel {panel_index} has no layout", path=f"panels/{panel_index}"
            )
        seed = body.seed if body is not None else None

        def work() -> None:
            with lock_for(project_id):
                fresh = load(project_id)
                PipelineRunner.for_project(fresh, root=root, backends=backends, jobs=jobs).rebuild_panel(
                    fresh, panel_index, seed=seed
                )

        job = jobs.submit(project_id, "regenerate", work, panel_index=panel_index)
        return JobRef(job_id=job.id)

    @app.get("/jobs/{job_id}", response_model=JobModel)
    def get_job(job_id: str):
        return JobModel.from_record(jobs.get(job_id))

    @app.get("/projects/{project_id}/panels/{panel_index}/image")
    def get_image(project_id: str, panel_index: int):
        project = load(project_id)
        panel = project.panel(panel_index)
        if panel.image_ref is None or panel.image_ref not in project.artifacts:
            raise AutoStoryError(
                "NOT_FOUND", f"panel {panel_index} has no rendered image yet", path=f"panels/{panel_index}/image"
            )
        return Response(content=project.artifacts[panel.image_ref], media_type="image/png")

    app.state.jobs = jobs
    app.state.projects_root = root
    return app
