"""Stage orchestration: plan -> characters -> conditions -> render.

The project is saved after every completed stage, so an interrupted run
resumes at the first incomplete stage and still produces the same bytes as an
uninterrupted one. All stage work is deterministic given (request, seed,
config): per-panel and per-character seeds are derived, never drawn.
"""

from __future__ import annotations

import contextlib
import dataclasses
import logging
from pathlib import Path

import numpy as np

from .attention import CustomWeightsRef, condition_digest, register_weights, render_panel
from .backends import resolve_backends
from .backends.contracts import BackendSet
from .conditions import build_panel_condition, rasterize_keypoints
from .config import CharacterSpec, PipelineConfig
from .errors import AutoStoryError, ValidationFailedError
from .forge import generate_character_set
from .imaging import condition_to_png, decode_png_rgb, derive_seed, encode_png_gray, encode_png_rgb
from .jobs import JobManager
from .model import (
    CharacterProfile,
    ConditionMap,
    KeypointSet,
    Panel,
    Project,
    SceneLayout,
    ValidationReport,
    Violation,
    sha256_hex,
    validate_scene_layout,
)
from .planner import generate_story, plan_layouts, segment_story
from .store import load_project, save_project
from .templates import TemplateSet

logger = logging.getLogger(__name__)

STAGES = ("plan", "characters", "conditions", "render")


def project_id_for(request_text: str, seed: int) -> str:
    """Deterministic id, so rerunning the same request lands on the same project."""
    return sha256_hex(f"{request_text}|{seed}".encode("utf-8"))[:12]


def _backend_name(backend) -> str:
    return getattr(backend, "name", type(backend).__name__)


class PipelineRunner:
    """Drives one project through the stages against a fixed config.

    Construct with the project's own config when operating on a loaded
    project; `for_project` does exactly that.
    """

    def __init__(
        self,
        config: PipelineConfig,
        *,
        root: Path | str | None = None,
        backends: BackendSet | None = None,
        templates: TemplateSet | None = None,
        jobs: JobManager | None = None,
    ):
        config.validate()
        self.config = config
        self.backends = backends if backends is not None else resolve_backends(config)
        if templates is not None:
            self.templates = templates
        elif config.template_dir:
            self.templates = TemplateSet.load(config.template_dir)
        else:
            self.templates = TemplateSet.default()
        self.root = Path(root) if root is not None else None
        self.jobs = jobs

    @classmethod
    def for_project(
        cls,
        project: Project,
        *,
        root: Path | str | None = None,
        backends: BackendSet | None = None,
        jobs: JobManager | None = None,
    ) -> "PipelineRunner":
        return cls(project.config, root=root, backends=backends, jobs=jobs)

    # -- persistence ------------------------------------------------------

    def project_dir(self, project_id: str) -> Path:
        if self.root is None:
            raise AutoStoryError("NOT_FOUND", "runner has no projects root configured")
        return self.root / project_id

    def save(self, project: Project) -> str | None:
        if self.root is None:
            return None
        return save_project(project, self.project_dir(project.id))

    def load(self, project_id: str) -> Project:
        return load_project(self.project_dir(project_id))

    def new_project(self, request_text: str, *, seed: int | None = None) -> Project:
        if not request_text.strip():
            raise AutoStoryError("EMPTY_REQUEST", "request text is empty")
        seed = self.config.seed if seed is None else seed
        project = Project(
            id=project_id_for(request_text, seed),
            request_text=request_text,
            config=self.config,
            seed=seed,
        )
        self.save(project)
        return project

    # -- stage predicates ---------------------------------------------------

    def _subject_order(self, project: Project) -> list[str]:
        """Distinct subject refs across all layouts, in first appearance order."""
        order: list[str] = []
        for panel in project.panels:
            if panel.layout is None:
                continue
            for binding in panel.layout.bindings:
                if binding.subject_ref and binding.subject_ref not in order:
                    order.append(binding.subject_ref)
        return order

    def _render_current(self, panel: Panel) -> bool:
        return (
            panel.image_ref is not None
            and not panel.image_stale
            and panel.layout is not None
            and panel.condition is not None
            and panel.rendered_layout_digest == panel.layout.digest()
            and panel.rendered_condition_digest == condition_digest(panel.condition)
        )

    def stage_complete(self, project: Project, stage: str) -> bool:
        if stage == "plan":
            return (
                bool(project.story_text)
                and len(project.panels) == project.config.k_panels
                and all(p.layout is not None for p in project.panels)
            )
        if stage == "characters":
            return all(project.character(name) is not None for name in self._subject_order(project))
        if stage == "conditions":
            return bool(project.panels) and all(
                p.condition is not None and not p.condition_stale for p in project.panels
            )
        if stage == "render":
            return bool(project.panels) and all(self._render_current(p) for p in project.panels)
        raise AutoStoryError("UNKNOWN_STAGE", f"no stage named {stage!r}", path=stage)

    # -- stages ---------------------------------------------------------------

    def _drop_stage_records(self, project: Project, stage: str) -> None:
        # redoing a partially planned stage must not leave duplicate records
        kept = [e for e in project.provenance if e.stage.split(".")[0] != stage]
        project.provenance = [dataclasses.replace(e, seq=i) for i, e in enumerate(kept)]

    def _run_plan(self, project: Project) -> None:
        cfg = project.config
        llm = self.backends.llm
        self._drop_stage_records(project, "plan")
        project.panels.clear()
        project.story_text = ""
        story = generate_story(
            project.request_text,
            self.templates,
            llm,
            derive_seed(project.seed, "story"),
            user_story=cfg.user_story,
            max_retries=cfg.max_retries,
        )
        project.story_text = story
        project.record("plan.story", _backend_name(llm), project.seed, detail=f"length={len(story)}")
        texts = segment_story(
            story,
            cfg.k_panels,
            self.templates,
            llm,
            derive_seed(project.seed, "panels"),
            pronouns=cfg.pronouns,
            max_retries=cfg.max_retries,
        )
        project.panels.extend(Panel(index=i, plot_text=text) for i, text in enumerate(texts, start=1))
        project.record("plan.panels", _backend_name(llm), project.seed, detail=f"k={len(texts)}")
        layouts = plan_layouts(
            texts,
            self.templates,
            llm,
            project.seed,
            pronouns=cfg.pronouns,
            max_subjects=cfg.max_subjects,
            max_retries=cfg.max_retries,
        )
        for panel, layout in zip(project.panels, layouts):
            panel.layout = layout
        project.record("plan.layouts", _backend_name(llm), project.seed, detail=f"k={len(layouts)}")

    def _subject_description(self, project: Project, name: str, spec: CharacterSpec | None) -> str:
        if spec is not None and spec.description.strip():
            return spec.description
        for panel in project.panels:
            if panel.layout is None:
                continue
            for binding in panel.layout.bindings:
                if binding.subject_ref == name:
                    return binding.local_prompt
        return name

    def _import_character(
        self, project: Project, name: str, spec: CharacterSpec, description: str
    ) -> CharacterProfile:
        ids = []
        for path in spec.image_paths:
            try:
                data = Path(path).read_bytes()
                decode_png_rgb(data)
            except Exception as exc:
                raise AutoStoryError(
                    "IO_FAILED",
                    f"character image {path!r} is not a readable RGB PNG: {exc}",
                    path=f"characters[{name}]",
                ) from exc
            ids.append(project.add_artifact(data))
        if len(ids) < project.config.min_char_images:
            raise AutoStoryError(
                "INSUFFICIENT_DATA",
                f"character {name!r} has {len(ids)} images, needs at least {project.config.min_char_images}",
                path=f"characters[{name}]",
            )
        ref = "w-" + sha256_hex("|".join([name, *ids]).encode("utf-8"))[:16]
        return CharacterProfile(
            name=name,
            description=description,
            training_images=tuple(ids),
            is_human=spec.is_human,
            source="user",
            custom_weights_ref=ref,
        )

    def _run_characters(self, project: Project) -> None:
        """Forge or import a profile for every subject that has none yet.

        Incremental on purpose: resumes and panel edits only add the missing
        profiles, existing ones are kept untouched.
        """
        cfg = project.config
        specs = {s.name: s for s in cfg.characters}
        for name in self._subject_order(project):
            if project.character(name) is not None:
                continue
            spec = specs.get(name)
            description = self._subject_description(project, name, spec)
            seed = derive_seed(project.seed, "forge", name)
            if spec is not None and spec.image_paths:
                profile = self._import_character(project, name, spec, description)
            else:
                profile, images = generate_character_set(
                    name,
                    description,
                    self.backends,
                    cfg.forge,
                    seed,
                    resolution=cfg.resolution,
                    is_human=spec.is_human if spec is not None else False,
                    detection_fallback=cfg.detection_fallback,
                )
                for data in images:
                    project.add_artifact(data)
            register_weights(CustomWeightsRef(id=profile.custom_weights_ref, characters=(name,)))
            project.characters.append(profile)
            project.record(
                "characters.forge",
                _backend_name(self.backends.generator),
                seed,
                detail=f"name={name} images={len(profile.training_images)} weights={profile.custom_weights_ref}",
            )

    def _ensure_weights(self, project: Project) -> None:
        # weight refs live in a process-local registry; re-register after a load
        for profile in project.characters:
            if profile.custom_weights_ref:
                register_weights(CustomWeightsRef(id=profile.custom_weights_ref, characters=(profile.name,)))

    def _write_intermediates(self, project: Project, panel: Panel, build) -> None:
        if self.root is None:
            return
        directory = self.project_dir(project.id)
        directory.mkdir(parents=True, exist_ok=True)
        for j, (image, assets) in enumerate(zip(build.subject_images, build.subjects)):
            stem = f"panel_{panel.index}_subj_{j}"
            (directory / f"{stem}.png").write_bytes(encode_png_rgb(image))
            (directory / f"{stem}_mask.png").write_bytes(
                encode_png_gray(assets.mask.astype(np.uint8) * 255)
            )
            if assets.condition.sketch is not None:
                (directory / f"{stem}_sketch.png").write_bytes(condition_to_png(assets.condition.sketch))

    def _build_condition(self, project: Project, panel: Panel, characters: dict) -> None:
        cfg = project.config
        seed = derive_seed(project.seed, "cond", panel.index)
        mark = len(project.provenance)
        try:
            build = build_panel_condition(
                panel.layout,
                self.backends.perception,
                self.backends.generator,
                seed,
                resolution=cfg.resolution,
                characters=characters,
                detection_fallback=cfg.detection_fallback,
                record=project.record,
            )
        except BaseException:
            del project.provenance[mark:]
            raise
        panel.condition = build.condition
        panel.keypoints = build.keypoints
        panel.condition_source = "auto"
        panel.condition_stale = False
        if panel.image_ref is not None:
            panel.image_stale = True
        self._write_intermediates(project, panel, build)
        project.record(
            "conditions.compose",
            _backend_name(self.backends.generator),
            seed,
            detail=f"panel={panel.index} kind={build.condition.kind} digest={condition_digest(build.condition)[:16]}",
        )

    def _run_conditions(self, project: Project) -> None:
        characters = {c.name: c for c in project.characters}
        for panel in project.panels:
            if panel.condition is not None and not panel.condition_stale:
                continue
            if panel.condition is not None and panel.condition_source == "user":
                continue  # stale user conditions are only ever replaced by the user
            if panel.layout is None:
                raise AutoStoryError(
                    "NO_LAYOUT",
                    f"panel {panel.index} has no layout to build a condition from",
                    path=f"panels[{panel.index}]",
                )
            self._build_condition(project, panel, characters)

    def _panel_weights(self, project: Project, panel: Panel) -> str | None:
        refs: list[str] = []
        names: list[str] = []
        for binding in panel.layout.bindings:
            if not binding.subject_ref:
                continue
            profile = project.character(binding.subject_ref)
            if profile is None or not profile.custom_weights_ref:
                continue
            if profile.custom_weights_ref not in refs:
                refs.append(profile.custom_weights_ref)
                names.append(profile.name)
        if not refs:
            return None
        if len(refs) == 1:
            return refs[0]
        order = sorted(range(len(refs)), key=lambda i: refs[i])
        fused = "w-" + sha256_hex("|".join(refs[i] for i in order).encode("utf-8"))[:16]
        register_weights(CustomWeightsRef(id=fused, characters=tuple(names[i] for i in order)))
        return fused

    def _render_one(self, project: Project, panel: Panel, *, seed: int | None = None) -> None:
        cfg = project.config
        if panel.layout is None:
            raise AutoStoryError("NO_LAYOUT", f"panel {panel.index} has no layout", path=f"panels[{panel.index}]")
        if panel.condition is None:
            raise AutoStoryError(
                "NO_CONDITION", f"panel {panel.index} has no condition", path=f"panels[{panel.index}]"
            )
        if seed is None:
            seed = panel.render_seed if panel.render_seed is not None else derive_seed(
                project.seed, "render", panel.index
            )
        image = render_panel(
            panel.layout.global_prompt,
            panel.layout,
            panel.condition,
            self._panel_weights(project, panel),
            self.backends.generator,
            seed,
            resolution=cfg.resolution,
            record=project.record,
        )
        panel.image_ref = project.add_artifact(encode_png_rgb(image))
        panel.render_seed = seed
        panel.image_stale = False
        panel.condition_stale = False
        panel.rendered_layout_digest = panel.layout.digest()
        panel.rendered_condition_digest = condition_digest(panel.condition)

    def _run_render(self, project: Project) -> None:
        self._ensure_weights(project)
        for panel in project.panels:
            if self._render_current(panel):
                continue
            self._render_one(project, panel)

    _STAGE_RUNNERS = {
        "plan": _run_plan,
        "characters": _run_characters,
        "conditions": _run_conditions,
        "render": _run_render,
    }

    def run(self, project: Project, *, through: str = "render") -> Project:
        """Run every incomplete stage up to and including `through`."""
        if through not in STAGES:
            raise AutoStoryError("UNKNOWN_STAGE", f"no stage named {through!r}", path=through)
        for stage in STAGES[: STAGES.index(through) + 1]:
            if self.stage_complete(project, stage):
                if stage == "characters":
                    self._ensure_weights(project)
                continue
            logger.info("project %s: running stage %s", project.id, stage)
            try:
                self._STAGE_RUNNERS[stage](self, project)
            except BaseException as exc:
                if isinstance(exc, AutoStoryError) and not exc.path:
                    exc.path = f"stages/{stage}"
                with contextlib.suppress(Exception):
                    self.save(project)  # keep partial progress for resume
                raise
            self.save(project)
        return project

    # -- edit loop ---------------------------------------------------------

    def _check_no_active_job(self, project_id: str, panel_index: int | None) -> None:
        if self.jobs is None:
            return
        job = self.jobs.active_job(project_id, panel_index)
        if job is not None:
            raise AutoStoryError(
                "CONFLICT",
                f"panel {panel_index} is being processed by job {job.id}",
                path=f"jobs/{job.id}",
            )

    def apply_layout_edit(self, project: Project, panel_index: int, layout: SceneLayout) -> Panel:
        """Replace a panel's layout; marks condition and image stale, deletes nothing."""
        panel = project.panel(panel_index)
        self._check_no_active_job(project.id, panel_index)
        layout = dataclasses.replace(layout, panel_index=panel_index)
        report = validate_scene_layout(
            layout, pronouns=project.config.pronouns, max_subjects=project.config.max_subjects
        )
        if not report.ok:
            raise ValidationFailedError(report)
        panel.layout = layout
        panel.condition_stale = True
        panel.image_stale = True
        project.record("edit.layout", "user", None, detail=f"panel={panel_index} digest={layout.digest()[:16]}")
        self.save(project)
        return panel

    def apply_condition_edit(
        self,
        project: Project,
        panel_index: int,
        *,
        condition: ConditionMap | None = None,
        keypoint_sets: tuple[KeypointSet, ...] | None = None,
    ) -> Panel:
        """Install a user-authored condition; it will survive regeneration."""
        panel = project.panel(panel_index)
        self._check_no_active_job(project.id, panel_index)
        cfg = project.config
        if (condition is None) == (keypoint_sets is None):
            raise AutoStoryError(
                "VALIDATION_FAILED", "provide exactly one of: raster condition, keypoint sets"
            )
        if condition is not None:
            if condition.width != cfg.resolution or condition.height != cfg.resolution:
                raise AutoStoryError(
                    "RESOLUTION_MISMATCH",
                    f"condition is {condition.width}x{condition.height}, canonical resolution is {cfg.resolution}",
                    path=f"panels[{panel_index}].condition",
                )
            panel.condition = condition
            panel.keypoints = ()
        else:
            sets = tuple(keypoint_sets)
            problems = [
                Violation("KEYPOINTS_INVALID", f"keypoints[{i}]", message)
                for i, kp in enumerate(sets)
                for message in kp.violations()
            ]
            if problems:
                raise ValidationFailedError(ValidationReport(violations=tuple(problems)))
            panel.condition = rasterize_keypoints(sets, cfg.resolution)
            panel.keypoints = sets
        panel.condition_source = "user"
        panel.condition_stale = False
        panel.image_stale = True
        project.record(
            "edit.condition", "user", None,
            detail=f"panel={panel_index} digest={condition_digest(panel.condition)[:16]}",
        )
        self.save(project)
        return panel

    def rebuild_panel(self, project: Project, panel_index: int, *, seed: int | None = None) -> Panel:
        """Regenerate one panel: rebuild the condition only when it is stale
        and automatic, then always re-render. Clears both staleness flags."""
        panel = project.panel(panel_index)
        if panel.layout is None:
            raise AutoStoryError("NO_LAYOUT", f"panel {panel_index} has no layout", path=f"panels[{panel_index}]")
        self._run_characters(project)  # an edit may have introduced new subjects
        characters = {c.name: c for c in project.characters}
        if panel.condition is None or (panel.condition_stale and panel.condition_source == "auto"):
            self._build_condition(project, panel, characters)
        self._render_one(project, panel, seed=seed)
        self.save(project)
        return panel
