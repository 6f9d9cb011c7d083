"""Reference attention math and the panel render entry point.

These operators define the semantics real diffusion backends must honor:
region-sampled cross-attention routes each latent position to exactly one
text embedding (its innermost binding, later bindings winning overlaps, the
global prompt elsewhere), and extended self-attention lets frame i attend to
the token concatenation of frame 0 and frame i-1. All math is float64.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .backends.contracts import GenerationBackend
from .errors import AutoStoryError
from .model import BoundingBox, ConditionMap, SceneLayout


def _as_matrix(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise AutoStoryError("DIMENSION_MISMATCH", f"{name} must be a non-empty 2D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise AutoStoryError("DIMENSION_MISMATCH", f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class AttentionParams:
    """Projection matrices: queries from latent channels, keys and values from
    context channels, all into a shared width d."""

    d: int
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_q", _as_matrix("w_q", self.w_q))
        object.__setattr__(self, "w_k", _as_matrix("w_k", self.w_k))
        object.__setattr__(self, "w_v", _as_matrix("w_v", self.w_v))
        if self.d < 1:
            raise AutoStoryError("DIMENSION_MISMATCH", f"d must be >= 1, got {self.d}")
        if self.w_q.shape[1] != self.d or self.w_k.shape[1] != self.d or self.w_v.shape[1] != self.d:
            raise AutoStoryError("DIMENSION_MISMATCH", "every projection must map into d columns")
        if self.w_k.shape[0] != self.w_v.shape[0]:
            raise AutoStoryError("DIMENSION_MISMATCH", "w_k and w_v must share the context dimension")


class LatentGrid:
    """An h x w grid of latent vectors, optionally tagged with a frame index."""

    __slots__ = ("values", "frame_index")

    def __init__(self, values: np.ndarray, frame_index: int | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 3 or arr.size == 0:
            raise AutoStoryError("SHAPE_MISMATCH", f"latent grid must be h x w x c, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise AutoStoryError("SHAPE_MISMATCH", "latent grid contains non-finite values")
        self.values = arr
        self.frame_index = frame_index

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def tokens(self) -> np.ndarray:
        """Row-major flattening to (h*w, channels)."""
        return self.values.reshape(-1, self.channels)


class TextEmbedding:
    """A tokens x channels embedding matrix with its source text."""

    __slots__ = ("matrix", "source")

    def __init__(self, matrix: np.ndarray, source: str = ""):
        self.matrix = _as_matrix("embedding", matrix)
        self.source = source

    @property
    def tokens(self) -> int:
        return self.matrix.shape[0]

    @property
    def channels(self) -> int:
        return self.matrix.shape[1]


def scaled_dot_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """softmax(q k^T / sqrt(d)) v with row-max subtraction for stability."""
    q = _as_matrix("q", q)
    k = _as_matrix("k", k)
    v = _as_matrix("v", v)
    if q.shape[1] != k.shape[1]:
        raise AutoStoryError("DIMENSION_MISMATCH", f"q has width {q.shape[1]} but k has width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise AutoStoryError("DIMENSION_MISMATCH", f"k has {k.shape[0]} rows but v has {v.shape[0]}")
    logits = q @ k.T / np.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ v


def region_assignment(
    boxes: Sequence[BoundingBox], width: int, height: int
) -> np.ndarray:
    """Grid of context indices: -1 for the global prompt, j for binding j.

    Boxes map to cells by flooring the near edge and ceiling the far edge;
    later boxes overwrite earlier ones.
    """
    assignment = np.full((height, width), -1, dtype=np.int64)
    for j, box in enumerate(boxes):
        px0, py0, px1, py1 = box.pixel_rect(width, height)
        if px0 >= px1 or py0 >= py1:
            raise AutoStoryError(
                "EMPTY_REGION",
                f"box {box.to_list()} covers no cells on a {width}x{height} grid",
                path=f"bindings[{j}]",
            )
        assignment[py0:py1, px0:px1] = j
    return assignment


def region_sampled_cross_attention(
    z: LatentGrid,
    bindings: Sequence[tuple[BoundingBox, TextEmbedding]],
    global_embedding: TextEmbedding,
    params: AttentionParams,
) -> LatentGrid:
    """Cross-attention where each latent position sees exactly one prompt.

    Positions inside binding j's box attend only to that binding's local
    embedding; positions outside every box attend to the global embedding.
    """
    if z.channels != params.w_q.shape[0]:
        raise AutoStoryError(
            "DIMENSION_MISMATCH", f"latent channels {z.channels} do not match w_q rows {params.w_q.shape[0]}"
        )
    contexts = [global_embedding] + [emb for _, emb in bindings]
    for emb in contexts:
        if emb.channels != params.w_k.shape[0]:
            raise AutoStoryError(
                "DIMENSION_MISMATCH",
                f"embedding channels {emb.channels} do not match w_k rows {params.w_k.shape[0]}",
            )
    assignment = region_assignment([box for box, _ in bindings], z.width, z.height).ravel()
    tokens = z.tokens()
    out = np.zeros((tokens.shape[0], params.d), dtype=np.float64)
    for group in range(-1, len(bindings)):
        positions = np.flatnonzero(assignment == group)
        if positions.size == 0:
            continue
        embedding = global_embedding if group == -1 else bindings[group][1]
        q = tokens[positions] @ params.w_q
        k = embedding.matrix @ params.w_k
        v = embedding.matrix @ params.w_v
        out[positions] = scaled_dot_attention(q, k, v)
    return LatentGrid(out.reshape(z.height, z.width, params.d), frame_index=z.frame_index)


def extended_self_attention(frames: Sequence[LatentGrid], params: AttentionParams) -> list[LatentGrid]:
    """Frame-consistent self-attention over an ordered frame batch.

    Frame 0 attends to itself. Frame i >= 1 attends to the token concatenation
    of frame 0 and frame i-1; for i == 1 that concatenates frame 0 with itself.
    """
    if not frames:
        raise AutoStoryError("SHAPE_MISMATCH", "frame batch is empty")
    shape = frames[0].values.shape
    for i, frame in enumerate(frames):
        if frame.values.shape != shape:
            raise AutoStoryError(
                "SHAPE_MISMATCH", f"frame {i} has shape {frame.values.shape}, expected {shape}"
            )
    if frames[0].channels != params.w_q.shape[0] or frames[0].channels != params.w_k.shape[0]:
        raise AutoStoryError(
            "DIMENSION_MISMATCH",
            f"latent channels {frames[0].channels} do not match the projections",
        )
    outputs = []
    for i, frame in enumerate(frames):
        queries = frame.tokens() @ params.w_q
        if i == 0:
            context = frames[0].tokens()
        else:
            context = np.concatenate([frames[0].tokens(), frames[i - 1].tokens()], axis=0)
        k = context @ params.w_k
        v = context @ params.w_v
        out = scaled_dot_attention(queries, k, v)
        outputs.append(LatentGrid(out.reshape(shape[0], shape[1], params.d), frame_index=i))
    return outputs


@dataclass(frozen=True)
class CustomWeightsRef:
    """Opaque handle to trained identity weights and the characters fused in."""

    id: str
    characters: tuple[str, ...] = ()


_WEIGHTS_REGISTRY: dict[str, CustomWeightsRef] = {}
_WEIGHTS_LOCK = threading.Lock()


def register_weights(ref: CustomWeightsRef) -> CustomWeightsRef:
    with _WEIGHTS_LOCK:
        _WEIGHTS_REGISTRY[ref.id] = ref
    return ref


def resolve_weights(ref_id: str) -> CustomWeightsRef:
    with _WEIGHTS_LOCK:
        try:
            return _WEIGHTS_REGISTRY[ref_id]
        except KeyError:
            raise AutoStoryError("NOT_FOUND", f"no weights registered under {ref_id!r}", path=ref_id) from None


def render_panel(
    global_prompt: str,
    layout: SceneLayout,
    condition: ConditionMap,
    weights_ref: str | None,
    backend: GenerationBackend,
    seed: int,
    *,
    resolution: int,
    adapter_ref: str | None = None,
    record: Callable[[str, str, int | None, str | None], None] | None = None,
) -> np.ndarray:
    """Render one panel through the generation backend and log its provenance."""
    if condition.width != resolution or condition.height != resolution:
        raise AutoStoryError(
            "RESOLUTION_MISMATCH",
            f"condition is {condition.width}x{condition.height}, canonical resolution is {resolution}",
        )
    try:
        image = backend.render(global_prompt, layout, condition, weights_ref, adapter_ref, seed)
    except Exception as exc:
        raise AutoStoryError("BACKEND_FAILED", f"panel render failed: {exc}") from exc
    image = np.asarray(image)
    if image.shape != (resolution, resolution, 3) or image.dtype != np.uint8:
        raise AutoStoryError(
            "RESOLUTION_MISMATCH",
            f"backend returned shape {image.shape}, expected ({resolution}, {resolution}, 3) uint8",
        )
    if record is not None:
        detail = f"layout={layout.digest()[:16]} condition={condition_digest(condition)[:16]} weights={weights_ref or '-'}"
        record("render", backend.name, seed, detail)
    return image


def condition_digest(condition: ConditionMap) -> str:
    from .imaging import condition_to_png
    from .model import sha256_hex

    return sha256_hex(condition_to_png(condition))
