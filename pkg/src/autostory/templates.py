"""Prompt templates for the planning steps, loaded from editable text files.

Placeholders use `{{name}}` syntax. The packaged defaults live next to this
module; a config may point at a directory with the same file names to swap
the wording without touching code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import AutoStoryError

TEMPLATE_IDS = ("d2s", "s2p", "p2prompt", "prompt2layout")

# Prefix of the note appended to a prompt when an attempt is retried. Kept
# here so backends can recognize and skip it when extracting payloads.
REJECTION_PREFIX = "Your previous reply was rejected"

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    """One instruction template plus optional in-context input/output examples."""

    id: str
    instruction: str
    examples: tuple[tuple[str, str], ...] = ()

    def render(self, **bindings: object) -> str:
        """Fill every placeholder; unbound placeholders are an error."""
        values = {key: str(val) for key, val in bindings.items()}
        if "examples" not in values and "{{examples}}" in self.instruction:
            values["examples"] = "\n\n".join(
                f"Input:\n{inp}\nOutput:\n{out}" for inp, out in self.examples
            )

        def _fill(match: re.Match) -> str:
            name = match.group(1)
            if name not in values:
                raise AutoStoryError(
                    "UNBOUND_PLACEHOLDER",
                    f"template {self.id!r} placeholder {{{{{name}}}}} has no binding",
                    path=name,
                )
            return values[name]

        return _PLACEHOLDER.sub(_fill, self.instruction)


@dataclass(frozen=True)
class TemplateSet:
    """All four planning templates: story, panels, image prompt, layout."""

    d2s: PromptTemplate
    s2p: PromptTemplate
    p2prompt: PromptTemplate
    prompt2layout: PromptTemplate

    def get(self, template_id: str) -> PromptTemplate:
        if template_id not in TEMPLATE_IDS:
            raise AutoStoryError("NOT_FOUND", f"unknown template id {template_id!r}", path=template_id)
        return getattr(self, template_id)

    @classmethod
    def load(cls, directory: Path | str) -> "TemplateSet":
        directory = Path(directory)
        examples: dict[str, list] = {}
        examples_file = directory / "examples.json"
        if examples_file.exists():
            examples = json.loads(examples_file.read_text(encoding="utf-8"))
        templates = {}
        for template_id in TEMPLATE_IDS:
            path = directory / f"{template_id}.txt"
            if not path.exists():
                raise AutoStoryError("NOT_FOUND", f"missing template file {path}", path=str(path))
            templates[template_id] = PromptTemplate(
                id=template_id,
                instruction=path.read_text(encoding="utf-8"),
                examples=tuple((inp, out) for inp, out in examples.get(template_id, [])),
            )
        return cls(**templates)

    @classmethod
    def default(cls) -> "TemplateSet":
        return cls.load(Path(str(resources.files("autostory") / "templates")))
