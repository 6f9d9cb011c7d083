"""Project persistence.

One directory per project: a `project.json` manifest plus flat, predictable
artifact files (`panel_{k}.png`, `panel_{k}_cond.png`, `panel_{k}_keypoints.json`,
`characters/{name}/img_{i}.png`). Artifact references are content addressed
(sha256 of the encoded bytes) and verified on load. Saving the same project
twice produces byte-identical trees.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .config import PipelineConfig
from .errors import AutoStoryError
from .imaging import condition_from_png, condition_to_png
from .model import (
    CharacterProfile,
    KeypointSet,
    Panel,
    Project,
    ProvenanceEntry,
    SceneLayout,
    canonical_json,
    sha256_hex,
)

SCHEMA_VERSION = 1
MANIFEST_NAME = "project.json"


def panel_image_name(index: int) -> str:
    return f"panel_{index}.png"

def panel_condition_name(index: int) -> str:
    return f"panel_{index}_cond.png"

def panel_keypoints_name(index: int) -> str:
    return f"panel_{index}_keypoints.json"

def character_image_name(name: str, i: int) -> str:
    return f"characters/{name}/img_{i}.png"


def _panel_to_dict(panel: Panel) -> dict:
    return {
        "index": panel.index,
        "plot_text": panel.plot_text,
        "layout": panel.layout.to_dict() if panel.layout is not None else None,
        "condition": (
            {"kind": panel.condition.kind, "sha256": sha256_hex(condition_to_png(panel.condition))}
            if panel.condition is not None
            else None
        ),
        "keypoints": bool(panel.keypoints),
        "image_ref": panel.image_ref,
        "condition_source": panel.condition_source,
        "condition_stale": panel.condition_stale,
        "image_stale": panel.image_stale,
        "render_seed": panel.render_seed,
        "rendered_layout_digest": panel.rendered_layout_digest,
        "rendered_condition_digest": panel.rendered_condition_digest,
    }


def _character_to_dict(character: CharacterProfile) -> dict:
    return {
        "name": character.name,
        "description": character.description,
        "training_images": list(character.training_images),
        "is_human": character.is_human,
        "source": character.source,
        "custom_weights_ref": character.custom_weights_ref,
        "forge_meta": character.forge_meta,
    }


def manifest_bytes(project: Project) -> bytes:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "id": project.id,
        "request_text": project.request_text,
        "story_text": project.story_text,
        "seed": project.seed,
        "config": project.config.to_dict(),
        "panels": [_panel_to_dict(p) for p in project.panels],
        "characters": [_character_to_dict(c) for c in project.characters],
        "provenance": [e.to_dict() for e in project.provenance],
    }
    return canonical_json(manifest)


def project_digest(project: Project) -> str:
    """Stable digest of the manifest; changes iff persisted state changes."""
    return sha256_hex(manifest_bytes(project))


def _check_project(project: Project) -> None:
    seen = set()
    for panel in project.panels:
        if panel.index < 1 or panel.index in seen:
            raise AutoStoryError("INVALID_PROJECT", f"panel index {panel.index} is not unique and positive",
                                 path=f"panels[{panel.index}]")
        seen.add(panel.index)
        if not panel.plot_text.strip():
            raise AutoStoryError("INVALID_PROJECT", f"panel {panel.index} has empty plot text",
                                 path=f"panels[{panel.index}].plot_text")
        if panel.image_ref is not None and panel.image_ref not in project.artifacts:
            raise AutoStoryError("INVALID_PROJECT", f"panel {panel.index} references unknown artifact {panel.image_ref}",
                                 path=f"panels[{panel.index}].image_ref")
    names = set()
    for character in project.characters:
        if not character.name or character.name in names or "/" in character.name:
            raise AutoStoryError("INVALID_PROJECT", f"character name {character.name!r} is not unique and path-safe",
                                 path=f"characters[{character.name}]")
        names.add(character.name)
        for ref in character.training_images:
            if ref not in project.artifacts:
                raise AutoStoryError("INVALID_PROJECT",
                                     f"character {character.name!r} references unknown artifact {ref}",
                                     path=f"characters[{character.name}]")


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_project(project: Project, root: Path | str) -> str:
    """Write the full project tree under `root`; returns the manifest digest."""
    _check_project(project)
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for panel in project.panels:
            if panel.condition is not None:
                _write_atomic(root / panel_condition_name(panel.index), condition_to_png(panel.condition))
            if panel.keypoints:
                payload = json.dumps([k.to_dict() for k in panel.keypoints], indent=2, sort_keys=True)
                _write_atomic(root / panel_keypoints_name(panel.index), payload.encode("utf-8"))
            if panel.image_ref is not None:
                _write_atomic(root / panel_image_name(panel.index), project.artifacts[panel.image_ref])
        for character in project.characters:
            directory = root / "characters" / character.name
            directory.mkdir(parents=True, exist_ok=True)
            for i, ref in enumerate(character.training_images):
                _write_atomic(root / character_image_name(character.name, i), project.artifacts[ref])
            meta = json.dumps(_character_to_dict(character), indent=2, sort_keys=True)
            _write_atomic(directory / "meta.json", meta.encode("utf-8"))
        data = manifest_bytes(project)
        _write_atomic(root / MANIFEST_NAME, data)
    except OSError as exc:
        raise AutoStoryError("IO_FAILED", f"could not write project to {root}: {exc}") from exc
    return sha256_hex(data)


def _expect(data: dict, key: str, kinds, path: str):
    if key not in data:
        raise AutoStoryError("SCHEMA_MISMATCH", f"manifest is missing {path!r}", path=path)
    value = data[key]
    if kinds is not None and not isinstance(value, kinds):
        raise AutoStoryError("SCHEMA_MISMATCH", f"{path!r} has the wrong type", path=path)
    return value


def _read_artifact(root: Path, name: str, expected_sha: str, path: str) -> bytes:
    file = root / name
    if not file.exists():
        raise AutoStoryError("NOT_FOUND", f"missing artifact file {name!r}", path=path)
    data = file.read_bytes()
    if sha256_hex(data) != expected_sha:
        raise AutoStoryError("SCHEMA_MISMATCH", f"artifact {name!r} does not match its recorded digest", path=path)
    return data


def load_project(root: Path | str) -> Project:
    """Load a project tree; value-equal to what save_project wrote."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise AutoStoryError("NOT_FOUND", f"no {MANIFEST_NAME} under {root}", path=MANIFEST_NAME)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AutoStoryError("SCHEMA_MISMATCH", f"manifest is not valid JSON: {exc}", path=MANIFEST_NAME) from exc
    if not isinstance(manifest, dict) or manifest.get("schema_version") != SCHEMA_VERSION:
        raise AutoStoryError(
            "SCHEMA_MISMATCH",
            f"unsupported schema_version {manifest.get('schema_version')!r}, expected {SCHEMA_VERSION}",
            path="schema_version",
        )
    try:
        config = PipelineConfig.from_dict(_expect(manifest, "config", dict, "config"))
    except AutoStoryError as exc:
        if exc.code == "SCHEMA_MISMATCH":
            raise
        raise AutoStoryError("SCHEMA_MISMATCH", f"config: {exc}", path=f"config.{exc.path or ''}") from exc
    except TypeError as exc:
        raise AutoStoryError("SCHEMA_MISMATCH", f"config: {exc}", path="config") from exc

    project = Project(
        id=_expect(manifest, "id", str, "id"),
        request_text=_expect(manifest, "request_text", str, "request_text"),
        config=config,
        seed=_expect(manifest, "seed", int, "seed"),
        story_text=_expect(manifest, "story_text", str, "story_text"),
    )
    for i, entry in enumerate(_expect(manifest, "panels", list, "panels")):
        path = f"panels[{i}]"
        if not isinstance(entry, dict):
            raise AutoStoryError("SCHEMA_MISMATCH", f"{path} must be an object", path=path)
        index = _expect(entry, "index", int, f"{path}.index")
        layout_data = entry.get("layout")
        try:
            layout = SceneLayout.from_dict(layout_data) if layout_data is not None else None
        except (KeyError, TypeError, ValueError) as exc:
            raise AutoStoryError("SCHEMA_MISMATCH", f"{path}.layout: {exc}", path=f"{path}.layout") from exc
        panel = Panel(
            index=index,
            plot_text=_expect(entry, "plot_text", str, f"{path}.plot_text"),
            layout=layout,
            image_ref=entry.get("image_ref"),
            condition_source=entry.get("condition_source", "auto"),
            condition_stale=bool(entry.get("condition_stale", False)),
            image_stale=bool(entry.get("image_stale", False)),
            render_seed=entry.get("render_seed"),
            rendered_layout_digest=entry.get("rendered_layout_digest"),
            rendered_condition_digest=entry.get("rendered_condition_digest"),
        )
        cond = entry.get("condition")
        if cond is not None:
            data = _read_artifact(root, panel_condition_name(index), cond["sha256"], f"{path}.condition")
            panel.condition = condition_from_png(data, kind=cond["kind"])
        if entry.get("keypoints"):
            kp_file = root / panel_keypoints_name(index)
            if not kp_file.exists():
                raise AutoStoryError("NOT_FOUND", f"missing artifact file {kp_file.name!r}", path=f"{path}.keypoints")
            try:
                sets = json.loads(kp_file.read_text(encoding="utf-8"))
                panel.keypoints = tuple(KeypointSet.from_dict(s) for s in sets)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise AutoStoryError("SCHEMA_MISMATCH", f"{path}.keypoints: {exc}", path=f"{path}.keypoints") from exc
        if panel.image_ref is not None:
            data = _read_artifact(root, panel_image_name(index), panel.image_ref, f"{path}.image_ref")
            project.artifacts[panel.image_ref] = data
        project.panels.append(panel)

    for entry in _expect(manifest, "characters", list, "characters"):
        path = f"characters[{entry.get('name') if isinstance(entry, dict) else '?'}]"
        if not isinstance(entry, dict):
            raise AutoStoryError("SCHEMA_MISMATCH", f"{path} must be an object", path=path)
        character = CharacterProfile(
            name=_expect(entry, "name", str, f"{path}.name"),
            description=_expect(entry, "description", str, f"{path}.description"),
            training_images=tuple(_expect(entry, "training_images", list, f"{path}.training_images")),
            is_human=bool(entry.get("is_human", False)),
            source=entry.get("source", "forged"),
            custom_weights_ref=entry.get("custom_weights_ref"),
            forge_meta=entry.get("forge_meta"),
        )
        for i, ref in enumerate(character.training_images):
            data = _read_artifact(root, character_image_name(character.name, i), ref, f"{path}.training_images[{i}]")
            project.artifacts[ref] = data
        project.characters.append(character)

    for i, entry in enumerate(_expect(manifest, "provenance", list, "provenance")):
        try:
            project.provenance.append(ProvenanceEntry.from_dict(entry))
        except (KeyError, TypeError) as exc:
            raise AutoStoryError("SCHEMA_MISMATCH", f"provenance[{i}]: {exc}", path=f"provenance[{i}]") from exc
    return project
