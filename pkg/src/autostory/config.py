"""Pipeline configuration. Plain data, JSON round-trippable."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .errors import AutoStoryError

DEFAULT_PRONOUNS = (
    "he", "she", "they", "it",
    "him", "her", "them",
    "his", "hers", "its", "their",
)


@dataclass(frozen=True)
class ClipFilterPolicy:
    """How forged candidates are kept: score threshold or best-k."""

    mode: str = "threshold"  # "threshold" | "top_k"
    tau: float = 0.25
    k: int = 5

    def validate(self) -> None:
        if self.mode not in ("threshold", "top_k"):
            raise AutoStoryError("INVALID_CONFIG", f"unknown clip filter mode {self.mode!r}", path="clip_policy.mode")
        if self.mode == "top_k" and self.k < 1:
            raise AutoStoryError("INVALID_CONFIG", "top_k policy needs k >= 1", path="clip_policy.k")


@dataclass(frozen=True)
class CharacterForgeConfig:
    """Viewpoint sampling ranges and candidate filtering bounds."""

    n_candidates: int = 16
    n_keep_min: int = 5
    n_keep_max: int = 30
    azimuth_range_deg: tuple[float, float] = (-60.0, 60.0)
    elevation_range_deg: tuple[float, float] = (-10.0, 30.0)
    base_radius: float = 1.0
    radius_jitter: float = 0.10
    clip_policy: ClipFilterPolicy = field(default_factory=ClipFilterPolicy)

    def validate(self) -> None:
        # n_keep_max may exceed n_candidates; the effective cap is their minimum.
        if not (1 <= self.n_keep_min <= self.n_keep_max):
            raise AutoStoryError("INVALID_CONFIG", "need 1 <= n_keep_min <= n_keep_max", path="forge.n_keep_min")
        if self.n_keep_min > self.n_candidates:
            raise AutoStoryError(
                "INVALID_CONFIG",
                f"n_keep_min={self.n_keep_min} can never be met with n_candidates={self.n_candidates}",
                path="forge.n_candidates",
            )
        self.clip_policy.validate()


@dataclass(frozen=True)
class CharacterSpec:
    """A character declared up front, optionally with user-supplied images."""

    name: str
    description: str = ""
    is_human: bool = False
    image_paths: tuple[str, ...] = ()


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs: panel count, resolution, backend ids, limits."""

    k_panels: int = 7
    resolution: int = 512
    seed: int = 0
    max_retries: int = 3
    max_subjects: int = 6
    min_char_images: int = 5
    pronouns: tuple[str, ...] = DEFAULT_PRONOUNS
    user_story: bool = False
    detection_fallback: str = "full_image"  # "full_image" | "error"
    llm_backend: str = "stub"
    generation_backend: str = "stub"
    detector_backend: str = "stub"
    segmenter_backend: str = "stub"
    pose_backend: str = "stub"
    view_backend: str = "stub"
    embedder_backend: str = "stub"
    template_dir: str | None = None
    forge: CharacterForgeConfig = field(default_factory=CharacterForgeConfig)
    characters: tuple[CharacterSpec, ...] = ()

    def validate(self) -> None:
        if self.k_panels < 1:
            raise AutoStoryError("INVALID_CONFIG", "k_panels must be >= 1", path="k_panels")
        if self.resolution < 8:
            raise AutoStoryError("INVALID_CONFIG", "resolution must be >= 8", path="resolution")
        if self.max_retries < 1:
            raise AutoStoryError("INVALID_CONFIG", "max_retries must be >= 1", path="max_retries")
        if self.max_subjects < 1:
            raise AutoStoryError("INVALID_CONFIG", "max_subjects must be >= 1", path="max_subjects")
        if self.detection_fallback not in ("full_image", "error"):
            raise AutoStoryError("INVALID_CONFIG", "detection_fallback must be full_image or error", path="detection_fallback")
        self.forge.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        if "forge" in data and isinstance(data["forge"], dict):
            forge = dict(data["forge"])
            if "clip_policy" in forge and isinstance(forge["clip_policy"], dict):
                forge["clip_policy"] = ClipFilterPolicy(**forge["clip_policy"])
            for key in ("azimuth_range_deg", "elevation_range_deg"):
                if key in forge and forge[key] is not None:
                    forge[key] = tuple(forge[key])
            data["forge"] = CharacterForgeConfig(**forge)
        if "characters" in data:
            specs = []
            for item in data["characters"]:
                if isinstance(item, dict):
                    item = dict(item)
                    if "image_paths" in item:
                        item["image_paths"] = tuple(item["image_paths"])
                    item = CharacterSpec(**item)
                specs.append(item)
            data["characters"] = tuple(specs)
        if "pronouns" in data and data["pronouns"] is not None:
            data["pronouns"] = tuple(data["pronouns"])
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise AutoStoryError("INVALID_CONFIG", f"unknown config fields: {sorted(unknown)}", path=sorted(unknown)[0])
        return cls(**data)
