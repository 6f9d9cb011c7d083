"""Story planning: request to story, story to panels, panels to layouts.

Every LLM task retries up to `max_retries` total attempts; each retry re-asks
with the rejection reason appended to the prompt. The layout step runs in two
sub-steps: panel text to image prompt, then image prompt to a layout document.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Iterable, Sequence

from .backends.contracts import LlmClient
from .config import DEFAULT_PRONOUNS
from .errors import AutoStoryError, LayoutParseError, ValidationFailedError
from .imaging import derive_seed
from .layout_parser import parse_layout_document
from .model import DEFAULT_MAX_SUBJECTS, SceneLayout, find_pronoun, validate_scene_layout
from .templates import REJECTION_PREFIX, TemplateSet

logger = logging.getLogger(__name__)


def _retry_prompt(base: str, error: str) -> str:
    return f"{base}\n\n{REJECTION_PREFIX}: {error}\nReply again following the required format exactly."


def generate_story(
    request: str,
    templates: TemplateSet,
    llm: LlmClient,
    seed: int,
    *,
    user_story: bool = False,
    max_retries: int = 3,
) -> str:
    """Expand a one-line request into a story; pass through when user_story."""
    if not request.strip():
        raise AutoStoryError("EMPTY_REQUEST", "request text is empty", path="request_text")
    if user_story:
        return request.strip()
    prompt = templates.d2s.render(request=request)
    for attempt in range(max_retries):
        text = llm.complete(prompt, seed).strip()
        if text:
            return text
        prompt = _retry_prompt(prompt, "the reply was empty")
    raise AutoStoryError("LLM_EMPTY_RESPONSE", f"story generation returned nothing after {max_retries} attempts")


def _parse_panel_lines(text: str) -> list[str]:
    """Numbered lines to panel texts; raises ValueError on malformed lines."""
    panels = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        head, sep, body = line.partition(".")
        if not sep or not head.strip().isdigit():
            raise ValueError(f"line {line!r} is not formatted as '<number>. <text>'")
        if not body.strip():
            raise ValueError(f"line {line!r} has an empty panel text")
        panels.append(body.strip())
    return panels


def segment_story(
    story: str,
    k: int,
    templates: TemplateSet,
    llm: LlmClient,
    seed: int,
    *,
    pronouns: Iterable[str] = DEFAULT_PRONOUNS,
    max_retries: int = 3,
) -> list[str]:
    """Split a story into exactly k panel texts, names only, no pronouns."""
    if k < 1:
        raise AutoStoryError("INVALID_CONFIG", f"panel count must be >= 1, got {k}", path="k_panels")
    prompt = templates.s2p.render(story=story, k=k)
    last_error = "no attempt made"
    count_mismatch = False
    for attempt in range(max_retries):
        reply = llm.complete(prompt, seed)
        try:
            panels = _parse_panel_lines(reply)
        except ValueError as exc:
            last_error, count_mismatch = str(exc), False
            prompt = _retry_prompt(prompt, last_error)
            continue
        if len(panels) != k:
            last_error = f"expected exactly {k} panels, got {len(panels)}"
            count_mismatch = True
            prompt = _retry_prompt(prompt, last_error)
            continue
        offending = next(((i, find_pronoun(p, pronouns)) for i, p in enumerate(panels) if find_pronoun(p, pronouns)), None)
        if offending is not None:
            index, pronoun = offending
            last_error = f"panel {index + 1} contains the pronoun {pronoun!r}; name the character instead"
            count_mismatch = False
            prompt = _retry_prompt(prompt, last_error)
            continue
        return panels
    code = "PANEL_COUNT_MISMATCH" if count_mismatch else "VALIDATION_FAILED"
    raise AutoStoryError(code, f"story segmentation failed after {max_retries} attempts: {last_error}")


def _plan_one_layout(
    panel_text: str,
    panel_index: int,
    templates: TemplateSet,
    llm: LlmClient,
    seed: int,
    *,
    pronouns: Iterable[str],
    max_subjects: int,
    max_retries: int,
) -> SceneLayout:
    # Sub-step one: panel text to a single image prompt.
    prompt = templates.p2prompt.render(panel=panel_text)
    image_prompt = ""
    for attempt in range(max_retries):
        image_prompt = llm.complete(prompt, seed).strip()
        if image_prompt:
            break
        prompt = _retry_prompt(prompt, "the reply was empty")
    if not image_prompt:
        raise AutoStoryError(
            "LLM_EMPTY_RESPONSE",
            f"image prompt for panel {panel_index} was empty after {max_retries} attempts",
            path=f"panels[{panel_index}]",
        )

    # Sub-step two: image prompt to a layout document, parsed and validated.
    prompt = templates.prompt2layout.render(prompt=image_prompt, max_objects=max_subjects)
    last_raw = ""
    last_error: AutoStoryError | None = None
    for attempt in range(max_retries):
        last_raw = llm.complete(prompt, seed)
        try:
            layout = parse_layout_document(last_raw, max_objects=max_subjects)
        except LayoutParseError as exc:
            last_error = exc
            prompt = _retry_prompt(prompt, str(exc))
            continue
        layout = dataclasses.replace(layout, panel_index=panel_index)
        report = validate_scene_layout(layout, pronouns, max_subjects)
        if report.ok:
            return layout
        last_error = ValidationFailedError(report)
        prompt = _retry_prompt(prompt, str(last_error))

    assert last_error is not None
    path = f"panels[{panel_index}]"
    if isinstance(last_error, ValidationFailedError):
        raise AutoStoryError("VALIDATION_FAILED", f"panel {panel_index} layout invalid after {max_retries} attempts: {last_error}", path=path)
    if last_error.violation is not None:
        # Parsed shape was fine but a value broke a layout invariant.
        raise AutoStoryError(
            "VALIDATION_FAILED",
            f"panel {panel_index} layout invalid after {max_retries} attempts: {last_error.violation}: {last_error}",
            path=path,
        )
    error = AutoStoryError("PARSE_FAILED", f"panel {panel_index} layout unparseable after {max_retries} attempts: {last_error}", path=path)
    error.last_raw = last_raw
    raise error


def plan_layouts(
    panel_texts: Sequence[str],
    templates: TemplateSet,
    llm: LlmClient,
    seed: int,
    *,
    pronouns: Iterable[str] = DEFAULT_PRONOUNS,
    max_subjects: int = DEFAULT_MAX_SUBJECTS,
    max_retries: int = 3,
) -> list[SceneLayout]:
    """Plan one validated SceneLayout per panel text, in order."""
    layouts = []
    for i, text in enumerate(panel_texts, start=1):
        layouts.append(
            _plan_one_layout(
                text,
                i,
                templates,
                llm,
                derive_seed(seed, "layout", i),
                pronouns=pronouns,
                max_subjects=max_subjects,
                max_retries=max_retries,
            )
        )
    return layouts
