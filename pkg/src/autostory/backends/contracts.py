"""Backend contracts. Heavyweight models plug in behind these interfaces.

Images cross every contract as HxWx3 uint8 arrays at the project's canonical
resolution. Implementations must be deterministic for a fixed seed or state
clearly that they are not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..model import BoundingBox, ConditionMap, KeypointSet, SceneLayout


@runtime_checkable
class LlmClient(Protocol):
    name: str

    def complete(self, prompt: str, seed: int) -> str: ...


@runtime_checkable
class GenerationBackend(Protocol):
    """Image synthesis: single subjects, conditioned panels, and frame batches."""

    name: str

    def generate(self, prompt: str, seed: int) -> np.ndarray: ...

    def render(
        self,
        global_prompt: str,
        layout: SceneLayout,
        condition: ConditionMap,
        weights_ref: str | None,
        adapter_ref: str | None,
        seed: int,
    ) -> np.ndarray: ...

    def render_frames(
        self, prompt: str, conditions: Sequence[ConditionMap], seed: int
    ) -> list[np.ndarray]: ...


@runtime_checkable
class Detector(Protocol):
    name: str

    def detect(self, image: np.ndarray, query: str) -> list[tuple[BoundingBox, float]]: ...


@runtime_checkable
class Segmenter(Protocol):
    name: str

    def segment(self, image: np.ndarray, box: BoundingBox) -> np.ndarray: ...


@runtime_checkable
class PoseEstimator(Protocol):
    name: str

    def estimate_pose(self, image: np.ndarray, box: BoundingBox) -> KeypointSet: ...


@runtime_checkable
class ViewTranslator(Protocol):
    name: str

    def translate(self, image: np.ndarray, rotation: np.ndarray, translation: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Embedder(Protocol):
    """Maps images and texts into one unit-norm embedding space."""

    name: str

    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class PerceptionBundle:
    """Detection, segmentation, and pose behind one handle."""

    detector: Detector
    segmenter: Segmenter
    pose: PoseEstimator


@dataclass(frozen=True)
class BackendSet:
    """Every backend a pipeline run needs, already resolved."""

    llm: LlmClient
    generator: GenerationBackend
    detector: Detector
    segmenter: Segmenter
    pose: PoseEstimator
    view: ViewTranslator
    embedder: Embedder

    @property
    def perception(self) -> PerceptionBundle:
        return PerceptionBundle(self.detector, self.segmenter, self.pose)
