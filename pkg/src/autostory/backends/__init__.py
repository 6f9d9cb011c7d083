"""Backend registry: string ids resolve to backend factories.

Factories receive the PipelineConfig so backends can pick up the canonical
resolution or API keys. Real model integrations register here exactly like
the bundled stubs do.
"""

from __future__ import annotations

from typing import Callable

from ..config import PipelineConfig
from ..errors import AutoStoryError
from .contracts import (
    BackendSet,
    Detector,
    Embedder,
    GenerationBackend,
    LlmClient,
    PerceptionBundle,
    PoseEstimator,
    Segmenter,
    ViewTranslator,
)

KINDS = ("llm", "generator", "detector", "segmenter", "pose", "view", "embedder")

_REGISTRY: dict[str, dict[str, Callable[[PipelineConfig], object]]] = {kind: {} for kind in KINDS}


def register_backend(kind: str, name: str, factory: Callable[[PipelineConfig], object]) -> None:
    if kind not in _REGISTRY:
        raise AutoStoryError("UNKNOWN_BACKEND", f"unknown backend kind {kind!r}; expected one of {KINDS}")
    _REGISTRY[kind][name] = factory


def create_backend(kind: str, name: str, config: PipelineConfig):
    if kind not in _REGISTRY:
        raise AutoStoryError("UNKNOWN_BACKEND", f"unknown backend kind {kind!r}; expected one of {KINDS}")
    try:
        factory = _REGISTRY[kind][name]
    except KeyError:
        available = ", ".join(sorted(_REGISTRY[kind])) or "none"
        raise AutoStoryError(
            "UNKNOWN_BACKEND",
            f"no {kind} backend named {name!r} is registered (available: {available})",
            path=f"{kind}_backend",
        ) from None
    return factory(config)


def available_backends(kind: str) -> list[str]:
    return sorted(_REGISTRY.get(kind, {}))


def resolve_backends(config: PipelineConfig) -> BackendSet:
    """Resolve every backend id in the config, failing fast on unknown ids."""
    return BackendSet(
        llm=create_backend("llm", config.llm_backend, config),
        generator=create_backend("generator", config.generation_backend, config),
        detector=create_backend("detector", config.detector_backend, config),
        segmenter=create_backend("segmenter", config.segmenter_backend, config),
        pose=create_backend("pose", config.pose_backend, config),
        view=create_backend("view", config.view_backend, config),
        embedder=create_backend("embedder", config.embedder_backend, config),
    )


from . import stubs as _stubs  # noqa: E402  (registers the stub backends)

__all__ = [
    "BackendSet",
    "Detector",
    "Embedder",
    "GenerationBackend",
    "KINDS",
    "LlmClient",
    "PerceptionBundle",
    "PoseEstimator",
    "Segmenter",
    "ViewTranslator",
    "available_backends",
    "create_backend",
    "register_backend",
    "resolve_backends",
]
