"""Core domain model: boxes, layouts, condition maps, keypoints, panels, projects.

All coordinates are normalized to [0, 1] with the origin at the top-left corner;
conversion to pixels happens only at raster boundaries. Layout bindings are
ordered: later bindings win wherever regions overlap.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT_PRONOUNS, PipelineConfig

DEFAULT_MAX_SUBJECTS = 6

CONDITION_KINDS = ("sketch", "keypoint-raster")


def canonical_json(obj) -> bytes:
    """Stable byte serialization: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized coordinates, origin top-left."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def in_range(self) -> bool:
        return all(0.0 <= v <= 1.0 for v in (self.x0, self.y0, self.x1, self.y1))

    def is_valid(self) -> bool:
        return self.in_range() and self.x0 < self.x1 and self.y0 < self.y1

    def pixel_rect(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Map to a half-open pixel rect (px0, py0, px1, py1).

        Near edges floor, far edges ceil, clipped to the grid; any valid box
        covers at least one cell on any grid with positive dimensions.
        """
        px0 = min(max(math.floor(self.x0 * width), 0), width)
        px1 = min(max(math.ceil(self.x1 * width), 0), width)
        py0 = min(max(math.floor(self.y0 * height), 0), height)
        py1 = min(max(math.ceil(self.y1 * height), 0), height)
        return px0, py0, px1, py1

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BoundingBox":
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class LocalBinding:
    """One subject: a local prompt tied to a region, optionally to a character."""

    local_prompt: str
    box: BoundingBox
    subject_ref: str | None = None

    def to_dict(self) -> dict:
        return {"local_prompt": self.local_prompt, "box": self.box.to_list(), "subject_ref": self.subject_ref}

    @classmethod
    def from_dict(cls, data: dict) -> "LocalBinding":
        return cls(
            local_prompt=data["local_prompt"],
            box=BoundingBox.from_list(data["box"]),
            subject_ref=data.get("subject_ref"),
        )


@dataclass(frozen=True)
class SceneLayout:
    """A panel's global prompt plus its ordered subject bindings."""

    global_prompt: str
    bindings: tuple[LocalBinding, ...]
    panel_index: int = 1

    def to_dict(self) -> dict:
        return {
            "global_prompt": self.global_prompt,
            "panel_index": self.panel_index,
            "bindings": [b.to_dict() for b in self.bindings],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneLayout":
        return cls(
            global_prompt=data["global_prompt"],
            bindings=tuple(LocalBinding.from_dict(b) for b in data["bindings"]),
            panel_index=int(data.get("panel_index", 1)),
        )

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))


class ConditionMap:
    """Dense 2D control map with values in [0, 1].

    Values are quantized to 8-bit levels on construction so the PNG round trip
    is lossless. `kind` distinguishes sketch strokes from rasterized keypoints.
    """

    __slots__ = ("values", "kind")

    def __init__(self, values: np.ndarray, kind: str):
        if kind not in CONDITION_KINDS:
            raise ValueError(f"unknown condition kind {kind!r}")
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("condition values must be a non-empty 2D grid")
        if not np.isfinite(arr).all():
            raise ValueError("condition values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("condition values must lie in [0, 1]")
        self.values = np.round(arr * 255.0) / 255.0
        self.values.flags.writeable = False
        self.kind = kind

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def to_u8(self) -> np.ndarray:
        return np.round(self.values * 255.0).astype(np.uint8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConditionMap):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:  # pragma: no cover
        return f"ConditionMap({self.width}x{self.height}, kind={self.kind!r})"


@dataclass(frozen=True)
class Joint:
    name: str
    x: float
    y: float
    visible: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "x": self.x, "y": self.y, "visible": self.visible}

    @classmethod
    def from_dict(cls, data: dict) -> "Joint":
        return cls(name=data["name"], x=float(data["x"]), y=float(data["y"]), visible=bool(data["visible"]))


@dataclass(frozen=True)
class KeypointSet:
    """Named joints plus skeleton edges referencing joints by name."""

    joints: tuple[Joint, ...]
    skeleton: tuple[tuple[str, str], ...] = ()

    def joint(self, name: str) -> Joint:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    def names(self) -> list[str]:
        return [j.name for j in self.joints]

    def violations(self) -> list[str]:
        """Invariant check: unique names, visible joints in range, edges resolvable."""
        problems = []
        names = self.names()
        if len(set(names)) != len(names):
            problems.append("duplicate joint names")
        for j in self.joints:
            if j.visible and not (0.0 <= j.x <= 1.0 and 0.0 <= j.y <= 1.0):
                problems.append(f"visible joint {j.name!r} outside [0, 1]")
        known = set(names)
        for a, b in self.skeleton:
            if a not in known or b not in known:
                problems.append(f"skeleton edge ({a!r}, {b!r}) references unknown joint")
        return problems

    def to_dict(self) -> dict:
        return {
            "joints": [j.to_dict() for j in self.joints],
            "skeleton": [list(edge) for edge in self.skeleton],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KeypointSet":
        return cls(
            joints=tuple(Joint.from_dict(j) for j in data["joints"]),
            skeleton=tuple((a, b) for a, b in data.get("skeleton", [])),
        )


@dataclass
class Panel:
    """One story panel and everything derived for it."""

    index: int
    plot_text: str
    layout: SceneLayout | None = None
    condition: ConditionMap | None = None
    keypoints: tuple[KeypointSet, ...] = ()
    image_ref: str | None = None
    condition_source: str = "auto"  # "auto" | "user"
    condition_stale: bool = False
    image_stale: bool = False
    render_seed: int | None = None
    rendered_layout_digest: str | None = None
    rendered_condition_digest: str | None = None


@dataclass
class CharacterProfile:
    """A recurring subject: description, training images, identity weights handle."""

    name: str
    description: str
    training_images: tuple[str, ...] = ()
    is_human: bool = False
    source: str = "forged"  # "forged" | "user"
    custom_weights_ref: str | None = None
    forge_meta: dict | None = None


@dataclass(frozen=True)
class ProvenanceEntry:
    """Append-only record of one pipeline event.

    `seq` is a logical clock (0, 1, 2, ...) rather than wall time so that two
    identical runs produce identical manifests.
    """

    stage: str
    backend: str
    seed: int | None
    seq: int
    detail: str | None = None

    def to_dict(self) -> dict:
        return {"stage": self.stage, "backend": self.backend, "seed": self.seed, "seq": self.seq, "detail": self.detail}

    @classmethod
    def from_dict(cls, data: dict) -> "ProvenanceEntry":
        return cls(
            stage=data["stage"],
            backend=data["backend"],
            seed=data["seed"],
            seq=int(data["seq"]),
            detail=data.get("detail"),
        )


@dataclass
class Project:
    """Whole story state: request, panels, characters, provenance, artifacts.

    `artifacts` maps content-addressed ids (sha256 of the encoded bytes) to the
    bytes themselves; panels and characters reference artifacts by id.
    """

    id: str
    request_text: str
    config: PipelineConfig
    seed: int
    story_text: str = ""
    panels: list[Panel] = field(default_factory=list)
    characters: list[CharacterProfile] = field(default_factory=list)
    provenance: list[ProvenanceEntry] = field(default_factory=list)
    artifacts: dict[str, bytes] = field(default_factory=dict)

    def record(self, stage: str, backend: str, seed: int | None, detail: str | None = None) -> None:
        self.provenance.append(ProvenanceEntry(stage, backend, seed, seq=len(self.provenance), detail=detail))

    def panel(self, index: int) -> Panel:
        for p in self.panels:
            if p.index == index:
                return p
        from .errors import AutoStoryError

        raise AutoStoryError("PANEL_NOT_FOUND", f"no panel with index {index}", path=f"panels[{index}]")

    def add_artifact(self, data: bytes) -> str:
        ref = sha256_hex(data)
        self.artifacts[ref] = data
        return ref

    def character(self, name: str) -> CharacterProfile | None:
        for c in self.characters:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def to_payload(self) -> list[dict]:
        return [{"code": v.code, "path": v.path, "message": v.message} for v in self.violations]


def _pronoun_pattern(pronouns: Iterable[str]) -> re.Pattern | None:
    words = [re.escape(w) for w in pronouns if w]
    if not words:
        return None
    return re.compile(r"\b(?:" + "|".join(words) + r")\b", re.IGNORECASE)


def find_pronoun(text: str, pronouns: Iterable[str] = DEFAULT_PRONOUNS) -> str | None:
    """First bare pronoun token in `text`, matched on word boundaries, or None."""
    pattern = _pronoun_pattern(pronouns)
    if pattern is None:
        return None
    hit = pattern.search(text)
    return hit.group(0) if hit else None


def validate_scene_layout(
    layout: SceneLayout,
    pronouns: Iterable[str] = DEFAULT_PRONOUNS,
    max_subjects: int = DEFAULT_MAX_SUBJECTS,
) -> ValidationReport:
    """Check every layout invariant and return the violations as data.

    Pure: never raises for content problems, never mutates. An empty report
    means the layout is safe for every downstream consumer.
    """
    violations: list[Violation] = []
    if layout.panel_index < 1:
        violations.append(Violation("PANEL_INDEX", "panel_index", f"panel_index must be >= 1, got {layout.panel_index}"))
    n = len(layout.bindings)
    if n == 0:
        violations.append(Violation("NO_BINDINGS", "bindings", "layout needs at least one binding"))
    elif n > max_subjects:
        violations.append(Violation("TOO_MANY_SUBJECTS", "bindings", f"{n} bindings exceed the limit of {max_subjects}"))
    for i, binding in enumerate(layout.bindings):
        base = f"bindings[{i}]"
        if not binding.local_prompt.strip():
            violations.append(Violation("EMPTY_PROMPT", f"{base}.local_prompt", "local prompt is empty"))
        else:
            pronoun = find_pronoun(binding.local_prompt, pronouns)
            if pronoun is not None:
                violations.append(
                    Violation("PRONOUN_IN_PROMPT", f"{base}.local_prompt", f"local prompt contains bare pronoun {pronoun!r}")
                )
        box = binding.box
        if not box.in_range():
            violations.append(Violation("BOX_OUT_OF_RANGE", f"{base}.box", f"box {box.to_list()} leaves [0, 1]"))
        if box.x0 >= box.x1 or box.y0 >= box.y1:
            violations.append(Violation("BOX_DEGENERATE", f"{base}.box", f"box {box.to_list()} has no positive area"))
    return ValidationReport(tuple(violations))
