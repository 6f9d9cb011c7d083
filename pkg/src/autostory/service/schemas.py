"""Wire models for the HTTP API.

Pydantic lives only here, at the boundary; handlers convert to and from the
core dataclasses immediately.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..attention import condition_digest
from ..jobs import JobRecord
from ..model import (
    BoundingBox,
    CharacterProfile,
    Joint,
    KeypointSet,
    LocalBinding,
    Panel,
    Project,
    SceneLayout,
)


class BindingModel(BaseModel):
    local_prompt: str
    box: list[float] = Field(min_length=4, max_length=4)
    subject_ref: str | None = None

    @classmethod
    def from_binding(cls, binding: LocalBinding) -> "BindingModel":
        return cls(local_prompt=binding.local_prompt, box=binding.box.to_list(), subject_ref=binding.subject_ref)

    def to_binding(self) -> LocalBinding:
        return LocalBinding(
            local_prompt=self.local_prompt,
            box=BoundingBox.from_list(self.box),
            subject_ref=self.subject_ref,
        )


class LayoutModel(BaseModel):
    global_prompt: str
    panel_index: int = 1
    bindings: list[BindingModel]

    @classmethod
    def from_layout(cls, layout: SceneLayout) -> "LayoutModel":
        return cls(
            global_prompt=layout.global_prompt,
            panel_index=layout.panel_index,
            bindings=[BindingModel.from_binding(b) for b in layout.bindings],
        )

    def to_layout(self) -> SceneLayout:
        return SceneLayout(
            global_prompt=self.global_prompt,
            bindings=tuple(b.to_binding() for b in self.bindings),
            panel_index=self.panel_index,
        )


class JointModel(BaseModel):
    name: str
    x: float
    y: float
    visible: bool = True


class KeypointSetModel(BaseModel):
    joints: list[JointModel]
    skeleton: list[tuple[str, str]] = []

    @classmethod
    def from_set(cls, kp: KeypointSet) -> "KeypointSetModel":
        return cls(
            joints=[JointModel(name=j.name, x=j.x, y=j.y, visible=j.visible) for j in kp.joints],
            skeleton=[tuple(edge) for edge in kp.skeleton],
        )

    def to_set(self) -> KeypointSet:
        return KeypointSet(
            joints=tuple(Joint(name=j.name, x=j.x, y=j.y, visible=j.visible) for j in self.joints),
            skeleton=tuple(self.skeleton),
        )


class ConditionEditModel(BaseModel):
    keypoint_sets: list[KeypointSetModel] = Field(min_length=1)


class PanelModel(BaseModel):
    index: int
    plot_text: str
    layout: LayoutModel | None
    condition_kind: str | None
    condition_digest: str | None
    keypoints: list[KeypointSetModel]
    image_ref: str | None
    condition_source: str
    condition_stale: bool
    image_stale: bool
    render_seed: int | None
    rendered_layout_digest: str | None
    rendered_condition_digest: str | None

    @classmethod
    def from_panel(cls, panel: Panel) -> "PanelModel":
        return cls(
            index=panel.index,
            plot_text=panel.plot_text,
            layout=LayoutModel.from_layout(panel.layout) if panel.layout is not None else None,
            condition_kind=panel.condition.kind if panel.condition is not None else None,
            condition_digest=condition_digest(panel.condition) if panel.condition is not None else None,
            keypoints=[KeypointSetModel.from_set(k) for k in panel.keypoints],
            image_ref=panel.image_ref,
            condition_source=panel.condition_source,
            condition_stale=panel.condition_stale,
            image_stale=panel.image_stale,
            render_seed=panel.render_seed,
            rendered_layout_digest=panel.rendered_layout_digest,
            rendered_condition_digest=panel.rendered_condition_digest,
        )


class CharacterModel(BaseModel):
    name: str
    description: str
    n_images: int
    is_human: bool
    source: str
    custom_weights_ref: str | None

    @classmethod
    def from_profile(cls, profile: CharacterProfile) -> "CharacterModel":
        return cls(
            name=profile.name,
            description=profile.description,
            n_images=len(profile.training_images),
            is_human=profile.is_human,
            source=profile.source,
            custom_weights_ref=profile.custom_weights_ref,
        )


class ProjectModel(BaseModel):
    id: str
    request_text: str
    story_text: str
    seed: int
    digest: str
    panels: list[PanelModel]
    characters: list[CharacterModel]

    @classmethod
    def from_project(cls, project: Project, digest: str) -> "ProjectModel":
        return cls(
            id=project.id,
            request_text=project.request_text,
            story_text=project.story_text,
            seed=project.seed,
            digest=digest,
            panels=[PanelModel.from_panel(p) for p in project.panels],
            characters=[CharacterModel.from_profile(c) for c in project.characters],
        )


class JobModel(BaseModel):
    id: str
    project_id: str
    stage: str
    status: str
    error: dict | None
    panel_index: int | None

    @classmethod
    def from_record(cls, job: JobRecord) -> "JobModel":
        return cls(**job.to_payload())


class CreateProjectRequest(BaseModel):
    request: str
    seed: int | None = None
    config: dict | None = None


class CreateProjectResponse(BaseModel):
    project_id: str
    job_id: str


class RegenerateRequest(BaseModel):
    seed: int | None = None


class JobRef(BaseModel):
    job_id: str


class ErrorModel(BaseModel):
    code: str
    path: str | None
    message: str
