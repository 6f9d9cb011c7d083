import numpy as np
import pytest

from autostory.backends import resolve_backends
from autostory.config import CharacterForgeConfig, PipelineConfig
from autostory.model import BoundingBox, ConditionMap, LocalBinding, SceneLayout


def small_config(**overrides) -> PipelineConfig:
    """Fast defaults: tiny canvas, two panels, six forge candidates."""
    base = dict(
        k_panels=2,
        resolution=64,
        seed=11,
        min_char_images=3,
        forge=CharacterForgeConfig(n_candidates=6, n_keep_min=3, n_keep_max=6),
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture
def config():
    return small_config()


@pytest.fixture
def backends(config):
    return resolve_backends(config)


def make_layout(*boxes, panel_index=1, subjects=None, prompts=None) -> SceneLayout:
    bindings = []
    for i, box in enumerate(boxes):
        bindings.append(
            LocalBinding(
                local_prompt=prompts[i] if prompts else f"subject number {i}",
                box=BoundingBox(*box),
                subject_ref=subjects[i] if subjects else None,
            )
        )
    return SceneLayout(global_prompt="a test scene", bindings=tuple(bindings), panel_index=panel_index)


def solid_condition(resolution: int, value: float = 1.0, kind: str = "sketch") -> ConditionMap:
    return ConditionMap(np.full((resolution, resolution), value), kind=kind)


class ScriptedLlm:
    """LLM double that replays canned replies and records every prompt."""

    name = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls: list[str] = []

    def complete(self, prompt: str, seed: int) -> str:
        self.calls.append(prompt)
        if not self.replies:
            raise AssertionError("scripted llm ran out of replies")
        reply = self.replies.pop(0)
        return reply(prompt) if callable(reply) else reply
