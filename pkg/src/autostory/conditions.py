"""Dense condition construction for a panel.

Per subject: generate an image from the local prompt, localize it, extract a
sketch (mask boundary) or keypoints, then compose every subject's condition
onto one panel-sized canvas by rescaling each from its detected box to its
layout box. Binding order is compositing priority: later subjects win inside
overlaps, and the composed map is zero outside the union of layout boxes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .backends.contracts import GenerationBackend, PerceptionBundle
from .errors import AutoStoryError
from .imaging import derive_seed, encode_png_rgb
from .model import BoundingBox, CharacterProfile, ConditionMap, Joint, KeypointSet, SceneLayout, sha256_hex

logger = logging.getLogger(__name__)

Recorder = Callable[[str, str, int | None, str | None], None]


@dataclass(frozen=True)
class SubjectCondition:
    """Dense control for one subject: a sketch crop or box-relative keypoints."""

    kind: str  # "sketch" | "keypoints"
    sketch: ConditionMap | None = None
    keypoints: KeypointSet | None = None
    source_box: BoundingBox | None = None

    def __post_init__(self):
        if self.kind not in ("sketch", "keypoints"):
            raise ValueError(f"unknown subject condition kind {self.kind!r}")
        if (self.kind == "sketch") != (self.sketch is not None) or (self.kind == "keypoints") != (
            self.keypoints is not None
        ):
            raise ValueError("exactly the field matching `kind` must be populated")


@dataclass
class SubjectAssets:
    """Everything derived for one subject while building a panel condition."""

    image_id: str
    detected_box: BoundingBox
    mask: np.ndarray
    condition: SubjectCondition


@dataclass
class PanelConditionBuild:
    """Composed panel condition plus the per-subject intermediates."""

    condition: ConditionMap
    keypoints: tuple[KeypointSet, ...]
    subjects: list[SubjectAssets] = field(default_factory=list)
    subject_images: list[np.ndarray] = field(default_factory=list)


def generate_subject(
    local_prompt: str,
    generator: GenerationBackend,
    seed: int,
    *,
    resolution: int,
    record: Recorder | None = None,
) -> np.ndarray:
    """One subject image at the canonical resolution."""
    if not local_prompt.strip():
        raise AutoStoryError("EMPTY_PROMPT", "subject prompt is empty")
    try:
        image = generator.generate(local_prompt, seed)
    except Exception as exc:
        raise AutoStoryError("GENERATOR_FAILED", f"subject generation failed: {exc}") from exc
    image = np.asarray(image)
    if image.shape != (resolution, resolution, 3) or image.dtype != np.uint8:
        raise AutoStoryError(
            "GENERATOR_FAILED",
            f"generator returned shape {image.shape}, expected ({resolution}, {resolution}, 3) uint8",
        )
    if record is not None:
        record("conditions.subject", generator.name, seed, local_prompt)
    return image


def localize_and_mask(
    image: np.ndarray,
    local_prompt: str,
    backends: PerceptionBundle,
    *,
    fallback: str = "full_image",
) -> tuple[BoundingBox, np.ndarray]:
    """Detected box and binary mask for the subject in `image`.

    The highest-scoring detection wins; ties break toward the larger box, then
    toward detector list order. Zero detections either fall back to the full
    image (with a warning) or raise, per `fallback`.
    """
    try:
        detections = backends.detector.detect(image, local_prompt)
    except Exception as exc:
        raise AutoStoryError("BACKEND_FAILED", f"detection failed: {exc}") from exc
    if not detections:
        if fallback != "full_image":
            raise AutoStoryError("DETECTION_EMPTY", f"no detection for prompt {local_prompt!r}")
        logger.warning("no detection for prompt %r; falling back to the full image", local_prompt)
        box = BoundingBox(0.0, 0.0, 1.0, 1.0)
    else:
        best_index = max(
            range(len(detections)),
            key=lambda i: (detections[i][1], detections[i][0].area, -i),
        )
        box = detections[best_index][0]
    try:
        mask = np.asarray(backends.segmenter.segment(image, box), dtype=bool)
    except Exception as exc:
        raise AutoStoryError("BACKEND_FAILED", f"segmentation failed: {exc}") from exc
    height, width = image.shape[:2]
    if mask.shape != (height, width):
        raise AutoStoryError("BACKEND_FAILED", f"segmenter returned shape {mask.shape}, expected {(height, width)}")
    px0, py0, px1, py1 = box.pixel_rect(width, height)
    clipped = np.zeros_like(mask)
    clipped[py0:py1, px0:px1] = mask[py0:py1, px0:px1]
    return box, clipped


def extract_sketch(mask: np.ndarray, crop_box: BoundingBox | None = None) -> ConditionMap:
    """Morphological boundary of a binary mask as a sketch map.

    A pixel is a stroke iff it is set in the mask and at least one 4-neighbor
    is unset or lies beyond the image border.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise AutoStoryError("EMPTY_MASK", "mask must be a non-empty 2D array")
    if not mask.any():
        raise AutoStoryError("EMPTY_MASK", "mask has no foreground pixels")
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        mask
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    boundary = mask & ~interior
    values = boundary.astype(np.float64)
    if crop_box is not None:
        height, width = mask.shape
        px0, py0, px1, py1 = crop_box.pixel_rect(width, height)
        values = values[py0:py1, px0:px1]
    return ConditionMap(values, kind="sketch")


def extract_keypoints(
    image: np.ndarray,
    detected_box: BoundingBox,
    backends: PerceptionBundle,
) -> KeypointSet:
    """Pose keypoints re-expressed relative to the detected box.

    Joints outside the box are kept (coordinates may leave [0, 1]) and logged;
    invisible joints keep visible=False.
    """
    try:
        keypoints = backends.pose.estimate_pose(image, detected_box)
    except Exception as exc:
        raise AutoStoryError("POSE_FAILED", f"pose estimation failed: {exc}") from exc
    if detected_box.width <= 0 or detected_box.height <= 0:
        raise AutoStoryError("POSE_FAILED", f"detected box {detected_box.to_list()} has no positive area")
    joints = []
    for joint in keypoints.joints:
        x_rel = (joint.x - detected_box.x0) / detected_box.width
        y_rel = (joint.y - detected_box.y0) / detected_box.height
        if joint.visible and not (0.0 <= x_rel <= 1.0 and 0.0 <= y_rel <= 1.0):
            logger.warning("joint %r lies outside the detected box (out_of_box)", joint.name)
        joints.append(Joint(name=joint.name, x=x_rel, y=y_rel, visible=joint.visible))
    return KeypointSet(joints=tuple(joints), skeleton=keypoints.skeleton)


def _draw_line(canvas: np.ndarray, p0: tuple[int, int], p1: tuple[int, int], rect: tuple[int, int, int, int]) -> None:
    """1px Bresenham segment, clipped to the half-open rect (px0, py0, px1, py1)."""
    px0, py0, px1, py1 = rect
    x, y = p0
    x1, y1 = p1
    dx, dy = abs(x1 - x), abs(y1 - y)
    sx = 1 if x < x1 else -1
    sy = 1 if y < y1 else -1
    err = dx - dy
    while True:
        if px0 <= x < px1 and py0 <= y < py1:
            canvas[y, x] = 1.0
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def _paste_skeleton(canvas: np.ndarray, keypoints: KeypointSet, rect: tuple[int, int, int, int]) -> None:
    height, width = canvas.shape
    positions = {}
    for joint in keypoints.joints:
        positions[joint.name] = (
            min(max(int(joint.x * width), 0), width - 1),
            min(max(int(joint.y * height), 0), height - 1),
            joint.visible,
        )
    for a, b in keypoints.skeleton:
        if a not in positions or b not in positions:
            continue
        xa, ya, va = positions[a]
        xb, yb, vb = positions[b]
        if va and vb:
            _draw_line(canvas, (xa, ya), (xb, yb), rect)


def keypoints_to_panel(keypoints: KeypointSet, box: BoundingBox) -> KeypointSet:
    """Map box-relative joints into panel coordinates through `box`."""
    joints = tuple(
        Joint(name=j.name, x=box.x0 + j.x * box.width, y=box.y0 + j.y * box.height, visible=j.visible)
        for j in keypoints.joints
    )
    return KeypointSet(joints=joints, skeleton=keypoints.skeleton)


def rasterize_keypoints(
    keypoint_sets: Sequence[KeypointSet],
    resolution: int,
    rect: tuple[int, int, int, int] | None = None,
) -> ConditionMap:
    """Panel-coordinate keypoint sets as a 1px skeleton raster."""
    canvas = np.zeros((resolution, resolution), dtype=np.float64)
    clip = rect if rect is not None else (0, 0, resolution, resolution)
    for keypoints in keypoint_sets:
        _paste_skeleton(canvas, keypoints, clip)
    return ConditionMap(canvas, kind="keypoint-raster")


def compose_conditions(
    layout: SceneLayout,
    conditions: Sequence[SubjectCondition],
    *,
    resolution: int,
) -> tuple[ConditionMap, tuple[KeypointSet, ...]]:
    """Compose per-subject conditions onto one panel canvas.

    Sketches are rescaled (nearest neighbor, independent x/y factors) from
    their detected box to their layout box. Keypoints are mapped into panel
    coordinates and rasterized. Later bindings overwrite earlier ones inside
    their layout box.
    """
    if len(conditions) != len(layout.bindings):
        raise ValueError(f"{len(conditions)} conditions for {len(layout.bindings)} bindings")
    canvas = np.zeros((resolution, resolution), dtype=np.float64)
    panel_keypoints: list[KeypointSet] = []
    any_sketch = False
    for index, (binding, subject) in enumerate(zip(layout.bindings, conditions)):
        px0, py0, px1, py1 = binding.box.pixel_rect(resolution, resolution)
        canvas[py0:py1, px0:px1] = 0.0
        if subject.kind == "sketch":
            any_sketch = True
            src = subject.sketch.values
            if subject.source_box is not None:
                sx0, sy0, sx1, sy1 = subject.source_box.pixel_rect(resolution, resolution)
                if src.shape != (sy1 - sy0, sx1 - sx0):
                    raise AutoStoryError(
                        "SIZE_MISMATCH",
                        f"sketch crop {src.shape} does not match detected box extent {(sy1 - sy0, sx1 - sx0)}",
                        path=f"bindings[{index}]",
                    )
            dst_h, dst_w = py1 - py0, px1 - px0
            src_h, src_w = src.shape
            rows = np.minimum((np.arange(dst_h) + 0.5) * src_h // dst_h, src_h - 1).astype(int)
            cols = np.minimum((np.arange(dst_w) + 0.5) * src_w // dst_w, src_w - 1).astype(int)
            canvas[py0:py1, px0:px1] = src[np.ix_(rows, cols)]
        else:
            mapped = keypoints_to_panel(subject.keypoints, binding.box)
            panel_keypoints.append(mapped)
            _paste_skeleton(canvas, mapped, (px0, py0, px1, py1))
    kind = "sketch" if any_sketch or not panel_keypoints else "keypoint-raster"
    return ConditionMap(canvas, kind=kind), tuple(panel_keypoints)


def build_panel_condition(
    layout: SceneLayout,
    backends: PerceptionBundle,
    generator: GenerationBackend,
    seed: int,
    *,
    resolution: int,
    characters: Mapping[str, CharacterProfile] | None = None,
    detection_fallback: str = "full_image",
    record: Recorder | None = None,
) -> PanelConditionBuild:
    """Build and compose the full condition for one panel's layout.

    Subjects bound to a human character get keypoints; everything else gets a
    sketch. Errors are annotated with the failing binding index.
    """
    characters = characters or {}
    subjects: list[SubjectAssets] = []
    images: list[np.ndarray] = []
    per_subject: list[SubjectCondition] = []
    for index, binding in enumerate(layout.bindings):
        try:
            image = generate_subject(
                binding.local_prompt,
                generator,
                derive_seed(seed, "subject", index),
                resolution=resolution,
                record=record,
            )
            box, mask = localize_and_mask(image, binding.local_prompt, backends, fallback=detection_fallback)
            profile = characters.get(binding.subject_ref) if binding.subject_ref else None
            if profile is not None and profile.is_human:
                keypoints = extract_keypoints(image, box, backends)
                condition = SubjectCondition(kind="keypoints", keypoints=keypoints, source_box=box)
            else:
                sketch = extract_sketch(mask, crop_box=box)
                condition = SubjectCondition(kind="sketch", sketch=sketch, source_box=box)
        except AutoStoryError as exc:
            raise AutoStoryError(
                exc.code, f"binding {index} ({binding.local_prompt!r}): {exc}", path=f"bindings[{index}]"
            ) from exc
        subjects.append(
            SubjectAssets(
                image_id=sha256_hex(encode_png_rgb(image)),
                detected_box=box,
                mask=mask,
                condition=condition,
            )
        )
        images.append(image)
        per_subject.append(condition)
    condition, panel_keypoints = compose_conditions(layout, per_subject, resolution=resolution)
    return PanelConditionBuild(
        condition=condition,
        keypoints=panel_keypoints,
        subjects=subjects,
        subject_images=images,
    )
