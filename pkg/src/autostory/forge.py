"""Character forging: one seed image becomes a filtered multi-view image set.

A seed image is generated from the character description, re-projected to
sampled viewpoints, turned into per-view dense conditions, re-generated as a
consistent frame batch, and finally filtered by image-text embedding score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backends.contracts import BackendSet
from .conditions import extract_keypoints, extract_sketch, keypoints_to_panel, localize_and_mask, rasterize_keypoints
from .config import CharacterForgeConfig, ClipFilterPolicy
from .errors import AutoStoryError
from .imaging import derive_seed, encode_png_rgb
from .model import CharacterProfile, ConditionMap, sha256_hex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Viewpoint:
    """A camera pose on the view sphere around the subject."""

    azimuth_deg: float
    elevation_deg: float
    radius: float

    @property
    def rotation(self) -> np.ndarray:
        """R = R_y(azimuth) @ R_x(elevation); orthonormal with determinant 1."""
        return rotation_y(self.azimuth_deg) @ rotation_x(self.elevation_deg)

    @property
    def translation(self) -> np.ndarray:
        """Camera position: the rotated optical axis scaled to the radius."""
        return self.rotation @ np.array([0.0, 0.0, self.radius])

    def to_dict(self) -> dict:
        return {"azimuth_deg": self.azimuth_deg, "elevation_deg": self.elevation_deg, "radius": self.radius}


def rotation_y(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), 0.0, math.sin(a)], [0.0, 1.0, 0.0], [-math.sin(a), 0.0, math.cos(a)]])


def rotation_x(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[1.0, 0.0, 0.0], [0.0, math.cos(a), -math.sin(a)], [0.0, math.sin(a), math.cos(a)]])


def sample_viewpoints(n: int, config: CharacterForgeConfig, seed: int) -> list[Viewpoint]:
    """n viewpoints drawn uniformly from the configured ranges, reproducibly."""
    if n < 1:
        raise AutoStoryError("INVALID_CONFIG", f"viewpoint count must be >= 1, got {n}")
    rng = np.random.default_rng(derive_seed(seed, "viewpoints"))
    views = []
    for _ in range(n):
        azimuth = rng.uniform(*config.azimuth_range_deg)
        elevation = rng.uniform(*config.elevation_range_deg)
        radius = config.base_radius * (1.0 + rng.uniform(-config.radius_jitter, config.radius_jitter))
        views.append(Viewpoint(azimuth_deg=float(azimuth), elevation_deg=float(elevation), radius=float(radius)))
    return views


def clip_scores(images: Sequence[np.ndarray], prompt: str, embedder) -> list[float]:
    """Cosine similarity of each image embedding against the prompt embedding."""
    try:
        text = np.asarray(embedder.embed_text(prompt), dtype=np.float64)
        scores = []
        for image in images:
            vec = np.asarray(embedder.embed_image(image), dtype=np.float64)
            scores.append(float(np.dot(vec, text) / (np.linalg.norm(vec) * np.linalg.norm(text))))
        return scores
    except AutoStoryError:
        raise
    except Exception as exc:
        raise AutoStoryError("EMBEDDER_FAILED", f"embedding failed: {exc}") from exc


def _kept_indices(scores: Sequence[float], policy: ClipFilterPolicy) -> list[int]:
    if policy.mode == "top_k":
        k = min(policy.k, len(scores))
        ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
        return sorted(ranked)
    return [i for i, s in enumerate(scores) if s >= policy.tau]


def clip_filter(
    images: Sequence[np.ndarray], prompt: str, embedder, policy: ClipFilterPolicy
) -> list[np.ndarray]:
    """Keep images by embedding score, preserving input order. Idempotent:
    filtering a filtered set again keeps everything. Empty results are legal;
    callers enforce minimum counts."""
    scores = clip_scores(images, prompt, embedder)
    return [images[i] for i in _kept_indices(scores, policy)]


def generate_character_set(
    name: str,
    description: str,
    backends: BackendSet,
    config: CharacterForgeConfig,
    seed: int,
    *,
    resolution: int,
    is_human: bool = False,
    detection_fallback: str = "full_image",
) -> tuple[CharacterProfile, list[bytes]]:
    """Forge a character's training set; returns the profile and PNG images.

    The kept count always lands in [n_keep_min, min(n_keep_max, n_candidates)]
    or the call fails with INSUFFICIENT_DATA. The per-frame conditions are
    sketches, or skeleton rasters for human characters.
    """
    if not description.strip():
        raise AutoStoryError("EMPTY_PROMPT", f"character {name!r} has an empty description")
    config.validate()
    seed_image = backends.generator.generate(description, derive_seed(seed, "seed-image", name))
    views = sample_viewpoints(config.n_candidates, config, derive_seed(seed, "views", name))

    panel_conditions: list[ConditionMap] = []
    for view in views:
        try:
            translated = backends.view.translate(seed_image, view.rotation, view.translation)
        except Exception as exc:
            raise AutoStoryError("BACKEND_FAILED", f"view translation failed: {exc}") from exc
        box, mask = localize_and_mask(translated, description, backends.perception, fallback=detection_fallback)
        if is_human:
            keypoints = extract_keypoints(translated, box, backends.perception)
            rect = box.pixel_rect(resolution, resolution)
            panel_conditions.append(rasterize_keypoints([keypoints_to_panel(keypoints, box)], resolution, rect))
        else:
            panel_conditions.append(extract_sketch(mask))

    frames = backends.generator.render_frames(description, panel_conditions, derive_seed(seed, "frames", name))
    scores = clip_scores(frames, description, backends.embedder)
    kept = _kept_indices(scores, config.clip_policy)
    keep_cap = min(config.n_keep_max, config.n_candidates)
    if len(kept) < config.n_keep_min:
        raise AutoStoryError(
            "INSUFFICIENT_DATA",
            f"character {name!r}: {len(kept)} of {len(frames)} candidates passed the filter, "
            f"need at least {config.n_keep_min}",
            path=name,
        )
    if len(kept) > keep_cap:
        best = sorted(kept, key=lambda i: (-scores[i], i))[:keep_cap]
        kept = sorted(best)

    pngs = [encode_png_rgb(frames[i]) for i in kept]
    ids = tuple(sha256_hex(p) for p in pngs)
    profile = CharacterProfile(
        name=name,
        description=description,
        training_images=ids,
        is_human=is_human,
        source="forged",
        custom_weights_ref=f"w-{sha256_hex(('|'.join((name,) + ids)).encode('utf-8'))[:16]}",
        forge_meta={
            "seed": seed,
            "viewpoints": [views[i].to_dict() for i in kept],
            "scores": [scores[i] for i in kept],
        },
    )
    return profile, pngs
