"""Deterministic stub backends.

Every stub is a pure function of its inputs and seed, so full pipeline runs
are reproducible byte for byte. The stubs cooperate through two conventions:

- Generated images are a light background with one dark elliptical blob, so
  the stub detector and segmenter can find a plausible subject region.
- Row 0 of a generated image carries an 8-byte marker derived from the prompt
  (red channel of the first 8 pixels). The stub embedder reads that marker, so
  an image embeds exactly like the text it was generated from. Perception
  stubs skip row 0 for the same reason.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from typing import Sequence

import numpy as np

from ..config import PipelineConfig
from ..imaging import derive_seed
from ..model import BoundingBox, ConditionMap, Joint, KeypointSet, SceneLayout
from ..templates import REJECTION_PREFIX
from . import register_backend

MARKER_LEN = 8

SUBJECT_PROMPTS = {
    "dog": "a brown dog running",
    "cat": "a grey cat leaping",
    "bird": "a small blue bird flying",
    "bear": "a big brown bear standing",
    "fox": "an orange fox sitting",
    "rabbit": "a white rabbit hopping",
    "robot": "a silver robot waving",
    "dragon": "a green dragon perched",
    "girl": "a young girl smiling",
    "boy": "a young boy waving",
    "man": "a tall man walking",
    "woman": "a woman holding a camera",
}

_BOX_SLOTS = {
    1: [[0.25, 0.30, 0.75, 0.95]],
    2: [[0.05, 0.45, 0.45, 0.95], [0.55, 0.40, 0.90, 0.90]],
    3: [[0.04, 0.45, 0.34, 0.95], [0.36, 0.40, 0.64, 0.92], [0.66, 0.45, 0.96, 0.95]],
}

_EVENTS = (
    "meet near the old oak",
    "find a bright kite by the pond",
    "follow a winding trail uphill",
    "share a picnic on the grass",
    "watch the clouds from a hilltop",
    "race across the meadow",
    "discover a hidden garden gate",
    "rest under a striped umbrella",
    "chase falling leaves at dusk",
    "wave goodbye at the park entrance",
)


def _marker(text: str) -> np.ndarray:
    digest = hashlib.sha256(text.encode("utf-8")).digest()[:MARKER_LEN]
    return np.frombuffer(digest, dtype=np.uint8)


def _stamp(image: np.ndarray, text: str) -> np.ndarray:
    image[0, :MARKER_LEN, 0] = _marker(text)
    return image


def _find_subjects(text: str, limit: int = 3) -> list[str]:
    tokens = re.findall(r"[a-z]+", text.lower())
    found: list[str] = []
    for token in tokens:
        if token in SUBJECT_PROMPTS and token not in found:
            found.append(token)
        if len(found) == limit:
            break
    return found


def _section(prompt: str, label: str) -> str:
    """Payload after `label`, cut at the next instruction or retry note."""
    if label not in prompt:
        return ""
    text = prompt.split(label, 1)[1]
    for stop in (REJECTION_PREFIX, "\nReply with"):
        if stop in text:
            text = text.split(stop, 1)[0]
    return text.strip()


class StubLlm:
    """Template-aware canned responses keyed off the TASK header."""

    name = "stub"

    def complete(self, prompt: str, seed: int) -> str:
        if "TASK: write-story" in prompt:
            return self._story(prompt, seed)
        if "TASK: split-panels" in prompt:
            return self._panels(prompt, seed)
        if "TASK: image-prompt" in prompt:
            return self._image_prompt(prompt)
        if "TASK: layout-json" in prompt:
            return self._layout(prompt)
        return ""

    def _story(self, prompt: str, seed: int) -> str:
        request = _section(prompt, "REQUEST:")
        subjects = _find_subjects(request) or ["dog", "cat"]
        cast = " and the ".join(subjects)
        offset = derive_seed("story", request, seed)
        sentences = [f"The {cast} {_EVENTS[(offset + i) % len(_EVENTS)]}." for i in range(4)]
        return " ".join(sentences)

    def _panels(self, prompt: str, seed: int) -> str:
        story = _section(prompt, "STORY:")
        match = re.search(r"exactly (\d+) panels", prompt)
        k = int(match.group(1)) if match else 1
        subjects = _find_subjects(story) or ["dog", "cat"]
        cast = " and the ".join(subjects)
        offset = derive_seed("panels", story, seed)
        lines = [f"{i}. The {cast} {_EVENTS[(offset + i) % len(_EVENTS)]}." for i in range(1, k + 1)]
        return "\n".join(lines)

    def _image_prompt(self, prompt: str) -> str:
        panel = _section(prompt, "PANEL:")
        return panel.rstrip(".") + ", photo"

    def _layout(self, prompt: str) -> str:
        text = _section(prompt, "PROMPT:")
        subjects = _find_subjects(text)
        if not subjects:
            objects = [{"prompt": "a single centered subject", "box": _BOX_SLOTS[1][0]}]
        else:
            slots = _BOX_SLOTS[len(subjects)]
            objects = [
                {"prompt": SUBJECT_PROMPTS[name], "box": slots[i], "subject": name}
                for i, name in enumerate(subjects)
            ]
        return json.dumps({"global_prompt": text, "objects": objects})


class StubGenerator:
    """Procedural images: light background, one dark blob, prompt marker."""

    name = "stub"

    def __init__(self, resolution: int = 512):
        self.resolution = resolution

    def _canvas(self, prompt: str, seed: int) -> np.ndarray:
        size = self.resolution
        rng = np.random.default_rng(derive_seed("gen", prompt, seed))
        background = rng.integers(185, 246, size=3, dtype=np.uint8)
        blob = rng.integers(20, 91, size=3, dtype=np.uint8)
        cx, cy = rng.uniform(0.30, 0.70), rng.uniform(0.35, 0.75)
        rx, ry = rng.uniform(0.10, 0.22), rng.uniform(0.10, 0.20)
        image = np.empty((size, size, 3), dtype=np.uint8)
        image[:, :] = background
        ys, xs = np.mgrid[0:size, 0:size]
        inside = ((xs / size - cx) / rx) ** 2 + ((ys / size - cy) / ry) ** 2 <= 1.0
        image[inside] = blob
        return image

    def generate(self, prompt: str, seed: int) -> np.ndarray:
        return _stamp(self._canvas(prompt, seed), prompt)

    def render(
        self,
        global_prompt: str,
        layout: SceneLayout,
        condition: ConditionMap,
        weights_ref: str | None,
        adapter_ref: str | None,
        seed: int,
    ) -> np.ndarray:
        height, width = condition.height, condition.width
        rng = np.random.default_rng(derive_seed("render", global_prompt, weights_ref or "", seed))
        image = np.empty((height, width, 3), dtype=np.uint8)
        image[:, :] = rng.integers(120, 201, size=3, dtype=np.uint8)
        for binding in layout.bindings:
            px0, py0, px1, py1 = binding.box.pixel_rect(width, height)
            fill = _marker(binding.local_prompt)[:3] // 2 + 110
            image[py0:py1, px0:px1] = fill
            image[py0:py1, px0:px1][[0, -1], :] = 10
            image[py0:py1, px0:px1][:, [0, -1]] = 10
        image[condition.values > 0.5] = 0
        return _stamp(image, global_prompt)

    def render_frames(self, prompt: str, conditions: Sequence[ConditionMap], seed: int) -> list[np.ndarray]:
        base = self._canvas(prompt, seed)
        frames = []
        for cond in conditions:
            frame = base.copy()
            frame[cond.values > 0.5] = 15
            frames.append(_stamp(frame, prompt))
        return frames


def _foreground(image: np.ndarray) -> np.ndarray:
    """Pixels that differ clearly from the corner background. Row 0 is skipped
    because it may carry the prompt marker."""
    background = image[-1, 0].astype(np.int16)
    diff = np.abs(image.astype(np.int16) - background).max(axis=2)
    mask = diff > 30
    mask[0, :] = False
    return mask


class StubDetector:
    name = "stub"

    def detect(self, image: np.ndarray, query: str) -> list[tuple[BoundingBox, float]]:
        mask = _foreground(image)
        if not mask.any():
            return []
        ys, xs = np.nonzero(mask)
        height, width = mask.shape
        box = BoundingBox(
            x0=float(xs.min()) / width,
            y0=float(ys.min()) / height,
            x1=float(xs.max() + 1) / width,
            y1=float(ys.max() + 1) / height,
        )
        return [(box, 0.9)]


class StubSegmenter:
    name = "stub"

    def segment(self, image: np.ndarray, box: BoundingBox) -> np.ndarray:
        mask = _foreground(image)
        height, width = mask.shape
        px0, py0, px1, py1 = box.pixel_rect(width, height)
        clipped = np.zeros_like(mask)
        clipped[py0:py1, px0:px1] = mask[py0:py1, px0:px1]
        return clipped


_POSE_JOINTS = (
    ("head", 0.50, 0.08),
    ("neck", 0.50, 0.22),
    ("l_shoulder", 0.35, 0.25),
    ("r_shoulder", 0.65, 0.25),
    ("l_hand", 0.22, 0.50),
    ("r_hand", 0.78, 0.50),
    ("hip", 0.50, 0.55),
    ("l_knee", 0.40, 0.75),
    ("r_knee", 0.60, 0.75),
    ("l_foot", 0.38, 0.95),
    ("r_foot", 0.62, 0.95),
)

POSE_SKELETON = (
    ("head", "neck"),
    ("neck", "l_shoulder"),
    ("neck", "r_shoulder"),
    ("l_shoulder", "l_hand"),
    ("r_shoulder", "r_hand"),
    ("neck", "hip"),
    ("hip", "l_knee"),
    ("hip", "r_knee"),
    ("l_knee", "l_foot"),
    ("r_knee", "r_foot"),
)


class StubPose:
    """A fixed humanoid skeleton scaled into the requested box."""

    name = "stub"

    def estimate_pose(self, image: np.ndarray, box: BoundingBox) -> KeypointSet:
        joints = tuple(
            Joint(name=name, x=box.x0 + u * box.width, y=box.y0 + v * box.height, visible=True)
            for name, u, v in _POSE_JOINTS
        )
        return KeypointSet(joints=joints, skeleton=POSE_SKELETON)


class StubViewTranslator:
    """Shifts the image by the camera yaw and pitch; keeps the marker row."""

    name = "stub"

    def translate(self, image: np.ndarray, rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
        rotation = np.asarray(rotation, dtype=np.float64)
        yaw = math.atan2(rotation[0, 2], rotation[2, 2])
        pitch = -math.asin(max(-1.0, min(1.0, rotation[1, 2])))
        height, width = image.shape[:2]
        shifted = np.roll(image, (int(pitch / math.tau * height), int(yaw / math.tau * width)), axis=(0, 1))
        shifted[0, :] = image[0, :]
        return shifted


class StubEmbedder:
    """Embeds the row-0 marker, so image and source text embed identically."""

    name = "stub"
    dim = 64

    def _vector(self, key: bytes) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.random(self.dim) + 0.05
        return vec / np.linalg.norm(vec)

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        return self._vector(bytes(image[0, :MARKER_LEN, 0].astype(np.uint8)))

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(bytes(_marker(text)))


register_backend("llm", "stub", lambda config: StubLlm())
register_backend("generator", "stub", lambda config: StubGenerator(config.resolution))
register_backend("detector", "stub", lambda config: StubDetector())
register_backend("segmenter", "stub", lambda config: StubSegmenter())
register_backend("pose", "stub", lambda config: StubPose())
register_backend("view", "stub", lambda config: StubViewTranslator())
register_backend("embedder", "stub", lambda config: StubEmbedder())
