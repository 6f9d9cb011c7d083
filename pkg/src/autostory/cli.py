"""Command line front end.

Stage commands (`plan`, `forge`, `conditions`, `render`, `run`) drive the
pipeline in process against a projects directory; `serve` exposes the same
projects over HTTP. Rerunning a command resumes at the first incomplete stage,
so `run` on a finished project is a no-op.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .backends import create_backend
from .config import PipelineConfig
from .errors import AutoStoryError
from .evaluation import build_report
from .pipeline import PipelineRunner, project_id_for
from .store import MANIFEST_NAME, load_project

_BACKEND_FIELDS = {
    "llm": "llm_backend",
    "generator": "generation_backend",
    "detector": "detector_backend",
    "segmenter": "segmenter_backend",
    "pose": "pose_backend",
    "view": "view_backend",
    "embedder": "embedder_backend",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--projects-root", default="projects", help="directory holding project trees")
    parser.add_argument("--config", help="JSON file with pipeline config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--k-panels", type=int, dest="k_panels", help="override the panel count")
    parser.add_argument("--resolution", type=int, help="override the canonical resolution")
    for kind, field in _BACKEND_FIELDS.items():
        parser.add_argument(f"--backend.{kind}", dest=f"backend_{kind}", metavar="NAME",
                            help=f"backend id for {field}")


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    else:
        config = PipelineConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "k_panels", None) is not None:
        overrides["k_panels"] = args.k_panels
    if getattr(args, "resolution", None) is not None:
        overrides["resolution"] = args.resolution
    for kind, field in _BACKEND_FIELDS.items():
        value = getattr(args, f"backend_{kind}", None)
        if value:
            overrides[field] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    return config


def _open_project(args: argparse.Namespace) -> tuple[PipelineRunner, "Project"]:
    root = Path(args.projects_root)
    if getattr(args, "project", None):
        project = load_project(root / args.project)
        return PipelineRunner.for_project(project, root=root), project
    if not getattr(args, "request", None):
        raise AutoStoryError("EMPTY_REQUEST", "pass --request for a new project or --project for an existing one")
    config = _build_config(args)
    project_dir = root / project_id_for(args.request, config.seed)
    if (project_dir / MANIFEST_NAME).exists():
        project = load_project(project_dir)
        return PipelineRunner.for_project(project, root=root), project
    runner = PipelineRunner(config, root=root)
    return runner, runner.new_project(args.request)


def _print_summary(project, root: Path) -> None:
    print(f"project {project.id}  ({root / project.id})")
    if project.story_text:
        print(f"story: {len(project.story_text)} chars")
    if project.characters:
        print("characters: " + ", ".join(f"{c.name} ({len(c.training_images)} images)" for c in project.characters))
    for panel in project.panels:
        parts = [f"panel {panel.index}:"]
        parts.append("layout" if panel.layout is not None else "-")
        if panel.condition is not None:
            parts.append(f"condition[{panel.condition.kind}]" + (" (stale)" if panel.condition_stale else ""))
        else:
            parts.append("-")
        if panel.image_ref is not None:
            parts.append("image" + (" (stale)" if panel.image_stale else ""))
        else:
            parts.append("-")
        print("  " + " ".join(parts))


def _cmd_stage(args: argparse.Namespace, through: str) -> int:
    runner, project = _open_project(args)
    runner.run(project, through=through)
    _print_summary(project, Path(args.projects_root))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    root = Path(args.projects_root)
    projects = [load_project(root / pid) for pid in args.project]
    config = _build_config(args)
    embedder_id = args.embedder or config.embedder_backend
    embedder = create_backend("embedder", embedder_id, config)
    report = build_report(projects, embedder, embedder_id=embedder_id)
    print(report.to_markdown())
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        out.with_suffix(".md").write_text(report.to_markdown() + "\n", encoding="utf-8")
        print(f"wrote {out} and {out.with_suffix('.md')}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.projects_root, _build_config(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autostory", description="story visualization pipeline")
    parser.add_argument("--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_commands = {
        "plan": ("plan the story, panels and layouts", "plan"),
        "forge": ("plan, then build character training sets", "characters"),
        "conditions": ("run everything up to panel conditions", "conditions"),
        "render": ("run the full pipeline to rendered panels", "render"),
        "run": ("run the full pipeline to rendered panels", "render"),
    }
    for name, (help_text, through) in stage_commands.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--request", help="one line story request (starts a new project)")
        cmd.add_argument("--project", help="existing project id to resume")
        _add_common(cmd)
        cmd.set_defaults(func=lambda args, through=through: _cmd_stage(args, through))

    cmd = sub.add_parser("eval", help="score finished projects and write a report")
    cmd.add_argument("--project", action="append", required=True, help="project id (repeatable)")
    cmd.add_argument("--embedder", help="embedder backend id")
    cmd.add_argument("--out", help="write the report JSON here (plus a .md sibling)")
    _add_common(cmd)
    cmd.set_defaults(func=_cmd_eval)

    cmd = sub.add_parser("serve", help="serve the HTTP API")
    cmd.add_argument("--host", default="127.0.0.1")
    cmd.add_argument("--port", type=int, default=8000)
    _add_common(cmd)
    cmd.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except AutoStoryError as exc:
        print(f"error [{exc.code}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
