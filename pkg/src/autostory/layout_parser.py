"""Strict parser for the scene layout document grammar.

The accepted document is a single JSON object:

    {"global_prompt": "...",
     "objects": [{"prompt": "...", "box": [x0, y0, x1, y1], "subject": "..."}]}

`subject` is optional; every other field is required and no other field is
allowed. The parser is total: any input string either yields a SceneLayout
whose boxes and prompts satisfy the layout invariants, or raises
LayoutParseError. It never returns an invariant-violating layout and never
raises anything else.
"""

from __future__ import annotations

import json

from .errors import LayoutParseError
from .model import BoundingBox, LocalBinding, SceneLayout

CLAMP_EPSILON = 1e-6

_TOP_KEYS = {"global_prompt", "objects"}
_OBJECT_KEYS = {"prompt", "box", "subject"}


def _position(raw: str, pos: int) -> tuple[int, int]:
    pos = max(0, min(pos, len(raw)))
    line = raw.count("\n", 0, pos) + 1
    col = pos - raw.rfind("\n", 0, pos)
    return line, col


def _error(raw: str, pos: int, message: str, *, path: str | None = None, violation: str | None = None) -> LayoutParseError:
    line, col = _position(raw, pos)
    return LayoutParseError(message, line=line, col=col, path=path, violation=violation)


def _locate(raw: str, needle: str, occurrence: int = 0) -> int:
    """Best-effort text position of the nth occurrence of `needle`."""
    pos = -1
    for _ in range(occurrence + 1):
        pos = raw.find(needle, pos + 1)
        if pos < 0:
            return 0
    return pos


def _reject_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen.add(key)
    return dict(pairs)


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token}")


_DECODER = json.JSONDecoder(object_pairs_hook=_reject_duplicate_keys, parse_constant=_reject_constant)


def _clamp_coord(value: float) -> float | None:
    """Clamp to [0, 1] when within CLAMP_EPSILON of the range, else None."""
    if -CLAMP_EPSILON <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + CLAMP_EPSILON:
        return 1.0
    if 0.0 <= value <= 1.0:
        return value
    return None


def _parse_box(raw: str, value, index: int) -> BoundingBox:
    path = f"objects[{index}].box"
    pos = _locate(raw, '"box"', index)
    if not isinstance(value, list) or len(value) != 4:
        raise _error(raw, pos, "box must be a list of four numbers", path=path)
    coords = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise _error(raw, pos, f"box[{i}] must be a number", path=f"{path}[{i}]")
        clamped = _clamp_coord(float(item))
        if clamped is None:
            raise _error(
                raw, pos, f"box[{i}]={item} lies outside [0, 1] beyond epsilon",
                path=f"{path}[{i}]", violation="BOX_OUT_OF_RANGE",
            )
        coords.append(clamped)
    box = BoundingBox(*coords)
    if box.x0 >= box.x1 or box.y0 >= box.y1:
        raise _error(raw, pos, f"box {box.to_list()} has no positive area", path=path, violation="BOX_DEGENERATE")
    return box


def _parse_object(raw: str, value, index: int, max_objects: int) -> LocalBinding:
    path = f"objects[{index}]"
    pos = _locate(raw, '"prompt"', index)
    if not isinstance(value, dict):
        raise _error(raw, _locate(raw, '"objects"'), f"{path} must be an object", path=path)
    unknown = set(value) - _OBJECT_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _error(raw, _locate(raw, f'"{key}"'), f"unknown field {key!r} in {path}", path=f"{path}.{key}")
    missing = {"prompt", "box"} - set(value)
    if missing:
        raise _error(raw, pos, f"{path} is missing field {sorted(missing)[0]!r}", path=path)
    prompt = value["prompt"]
    if not isinstance(prompt, str):
        raise _error(raw, pos, f"{path}.prompt must be a string", path=f"{path}.prompt")
    if not prompt.strip():
        raise _error(raw, pos, f"{path}.prompt is empty", path=f"{path}.prompt", violation="EMPTY_PROMPT")
    subject = value.get("subject")
    if subject is not None:
        if not isinstance(subject, str) or not subject.strip():
            raise _error(raw, pos, f"{path}.subject must be a non-empty string", path=f"{path}.subject")
        subject = subject.strip()
    box = _parse_box(raw, value["box"], index)
    return LocalBinding(local_prompt=prompt.strip(), box=box, subject_ref=subject)


def parse_layout_document(raw: str, *, max_objects: int = 6) -> SceneLayout:
    """Parse one layout document. Total: SceneLayout or LayoutParseError."""
    if not isinstance(raw, str):
        raise LayoutParseError("layout document must be text")
    stripped = raw.lstrip()
    offset = len(raw) - len(stripped)
    if not stripped:
        raise _error(raw, 0, "document is empty")
    try:
        value, end = _DECODER.raw_decode(raw, offset)
    except json.JSONDecodeError as exc:
        raise _error(raw, exc.pos, f"invalid JSON: {exc.msg}") from None
    except (ValueError, RecursionError) as exc:
        raise _error(raw, offset, f"invalid JSON: {exc}") from None

    tail = raw[end:]
    if tail.strip():
        tail_pos = end + (len(tail) - len(tail.lstrip()))
        raise _error(raw, tail_pos, "trailing content after the layout object")

    if not isinstance(value, dict):
        raise _error(raw, offset, "document must be a JSON object")
    unknown = set(value) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _error(raw, _locate(raw, f'"{key}"'), f"unknown field {key!r}", path=key)
    missing = _TOP_KEYS - set(value)
    if missing:
        raise _error(raw, offset, f"missing field {sorted(missing)[0]!r}", path=sorted(missing)[0])

    global_prompt = value["global_prompt"]
    if not isinstance(global_prompt, str):
        raise _error(raw, _locate(raw, '"global_prompt"'), "global_prompt must be a string", path="global_prompt")

    objects = value["objects"]
    objects_pos = _locate(raw, '"objects"')
    if not isinstance(objects, list):
        raise _error(raw, objects_pos, "objects must be a list", path="objects")
    if len(objects) == 0:
        raise _error(raw, objects_pos, "objects is empty", path="objects", violation="NO_BINDINGS")
    if len(objects) > max_objects:
        raise _error(
            raw, objects_pos, f"{len(objects)} objects exceed the limit of {max_objects}",
            path="objects", violation="TOO_MANY_SUBJECTS",
        )

    bindings = tuple(_parse_object(raw, obj, i, max_objects) for i, obj in enumerate(objects))
    return SceneLayout(global_prompt=global_prompt, bindings=bindings, panel_index=1)
