"""Similarity metrics and the per-story evaluation report.

Scores depend entirely on the chosen embedding backend: stub scores say
nothing about real-model quality, and only within-backend comparisons are
meaningful. Cosines are computed on renormalized vectors, so the metrics are
invariant to positive rescaling of the raw embeddings.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backends.contracts import Embedder
from .errors import AutoStoryError
from .imaging import decode_png_rgb
from .model import Project

logger = logging.getLogger(__name__)


def _embed_image(embedder: Embedder, image) -> np.ndarray:
    try:
        return np.asarray(embedder.embed_image(image), dtype=np.float64)
    except Exception as exc:
        raise AutoStoryError("EMBEDDER_FAILED", f"image embedding failed: {exc}") from exc


def _embed_text(embedder: Embedder, text: str) -> np.ndarray:
    try:
        return np.asarray(embedder.embed_text(text), dtype=np.float64)
    except Exception as exc:
        raise AutoStoryError("EMBEDDER_FAILED", f"text embedding failed: {exc}") from exc


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def text_image_similarity(pairs: Sequence[tuple[np.ndarray, str]], embedder: Embedder) -> float:
    """Mean cosine between each image embedding and its text embedding."""
    if not pairs:
        raise AutoStoryError("NO_PANELS", "no image/text pairs to score")
    scores = [_cosine(_embed_image(embedder, image), _embed_text(embedder, text)) for image, text in pairs]
    return float(np.mean(scores))


def image_image_similarity(
    train_images: Sequence[np.ndarray], generated_images: Sequence[np.ndarray], embedder: Embedder
) -> float:
    """Mean cosine between generated images and the renormalized centroid of
    the training image embeddings."""
    if not train_images or not generated_images:
        raise AutoStoryError("NO_PANELS", "need at least one training and one generated image")
    train = np.stack([_embed_image(embedder, img) for img in train_images])
    centroid = train.mean(axis=0)
    norm = np.linalg.norm(centroid)
    if norm < 1e-12:
        raise AutoStoryError("ZERO_CENTROID", "training embeddings cancel out; centroid cannot be normalized")
    centroid = centroid / norm
    scores = [_cosine(centroid, _embed_image(embedder, img)) for img in generated_images]
    return float(np.mean(scores))


@dataclass(frozen=True)
class EvalRow:
    story_id: str
    n_prompts: int
    text_image_sim: float
    image_image_sim: float | None
    image_image_sim_pooled: float | None

    def to_dict(self) -> dict:
        return {
            "story_id": self.story_id,
            "n_prompts": self.n_prompts,
            "text_image_sim": self.text_image_sim,
            "image_image_sim": self.image_image_sim,
            "image_image_sim_pooled": self.image_image_sim_pooled,
        }


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    text_image_mean: float
    image_image_mean: float | None
    embedder_id: str
    created_at: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat())

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "aggregate": {"text_image_mean": self.text_image_mean, "image_image_mean": self.image_image_mean},
            "embedder_id": self.embedder_id,
            "created_at": self.created_at,
        }

    def to_markdown(self) -> str:
        lines = [
            "| story | prompts | text-image | image-image | image-image (pooled) |",
            "| --- | ---: | ---: | ---: | ---: |",
        ]

        def _fmt(value: float | None) -> str:
            return f"{value:.4f}" if value is not None else "-"

        for row in self.rows:
            lines.append(
                f"| {row.story_id} | {row.n_prompts} | {_fmt(row.text_image_sim)} "
                f"| {_fmt(row.image_image_sim)} | {_fmt(row.image_image_sim_pooled)} |"
            )
        lines.append(
            f"| **mean** | {sum(r.n_prompts for r in self.rows)} | {_fmt(self.text_image_mean)} "
            f"| {_fmt(self.image_image_mean)} | - |"
        )
        return "\n".join(lines) + "\n"


def _story_row(project: Project, embedder: Embedder) -> EvalRow:
    pairs = []
    generated = []
    for panel in project.panels:
        if panel.image_ref is None:
            continue
        image = decode_png_rgb(project.artifacts[panel.image_ref])
        prompt = panel.layout.global_prompt if panel.layout is not None else panel.plot_text
        pairs.append((image, prompt))
        generated.append(image)
    if not pairs:
        raise AutoStoryError("NO_PANELS", f"story {project.id!r} has no rendered panels", path=project.id)

    per_character: list[float] = []
    pooled_train: list[np.ndarray] = []
    for character in project.characters:
        train = [decode_png_rgb(project.artifacts[ref]) for ref in character.training_images if ref in project.artifacts]
        if not train:
            continue
        pooled_train.extend(train)
        per_character.append(image_image_similarity(train, generated, embedder))
    image_image = float(np.mean(per_character)) if per_character else None
    pooled = image_image_similarity(pooled_train, generated, embedder) if pooled_train else None
    return EvalRow(
        story_id=project.id,
        n_prompts=len(pairs),
        text_image_sim=text_image_similarity(pairs, embedder),
        image_image_sim=image_image,
        image_image_sim_pooled=pooled,
    )


def build_report(projects: Project | Sequence[Project], embedder: Embedder, *, embedder_id: str = "") -> EvalReport:
    """One row per story; aggregates are arithmetic means over the rows."""
    if isinstance(projects, Project):
        projects = [projects]
    if not projects:
        raise AutoStoryError("NO_PANELS", "no stories to evaluate")
    rows = []
    for project in projects:
        try:
            rows.append(_story_row(project, embedder))
        except AutoStoryError as exc:
            raise AutoStoryError(exc.code, f"story {project.id!r}: {exc}", path=project.id) from exc
    text_mean = float(np.mean([r.text_image_sim for r in rows]))
    image_values = [r.image_image_sim for r in rows if r.image_image_sim is not None]
    image_mean = float(np.mean(image_values)) if image_values else None
    return EvalReport(
        rows=tuple(rows),
        text_image_mean=text_mean,
        image_image_mean=image_mean,
        embedder_id=embedder_id or getattr(embedder, "name", ""),
    )
