"""Command line front end: ``watertight convert | batch | check``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InputError, WatertightError
from .mesh_io import MeshFormat, read_mesh
from .octree import OctreeConfig
from .pipeline import (EXIT_INPUT, EXIT_INTERNAL, EXIT_OK, BatchManifest, PipelineConfig, batch_exit_code,
                       convert_file, run_batch)
from .project import ProjectionParams
from .verify import check_manifold

log = logging.getLogger("watertight")


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=[f.value for f in MeshFormat], help="output format (default: from suffix)")
    p.add_argument("--resolution", type=float, default=0.01, help="target leaf size in normalized units")
    p.add_argument("--depth", type=int, help="octree depth (overrides --resolution)")
    p.add_argument("--no-project", action="store_true", help="skip projection onto the input surface")
    p.add_argument("--steps", type=int, default=ProjectionParams.iterations, help="projection iterations")
    p.add_argument("--step-size", type=float, default=ProjectionParams.step_size)
    p.add_argument("--smooth-weight", type=float, default=ProjectionParams.smoothing_weight)


def _config(args, output: str | None) -> PipelineConfig:
    if args.format:
        fmt = MeshFormat(args.format)
    elif output:
        try:
            fmt = MeshFormat.from_path(output)
        except ValueError:
            fmt = MeshFormat.OBJ
    else:
        fmt = MeshFormat.OBJ
    return PipelineConfig(
        octree=OctreeConfig(target_leaf_size=args.resolution, max_depth=args.depth),
        projection=ProjectionParams(step_size=args.step_size, iterations=args.steps,
                                    smoothing_weight=args.smooth_weight),
        project_enabled=not args.no_project,
        output_format=fmt,
        emit_report=True,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser = argparse.ArgumentParser(prog="watertight", description="Convert triangle soups to watertight manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common], help="convert one mesh")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="write the manifold report as JSON")
    _add_pipeline_options(p)

    p = sub.add_parser("batch", parents=[common], help="convert every entry of a JSON manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--summary", help="write the batch summary as JSON (default: stdout)")
    _add_pipeline_options(p)

    p = sub.add_parser("check", parents=[common], help="verify topology of an existing mesh")
    p.add_argument("--input", required=True)
    p.add_argument("--report", help="write the manifold report as JSON (default: stdout)")
    return parser


def _cmd_convert(args) -> int:
    try:
        cfg = _config(args, args.output)
        rec = convert_file(args.input, args.output, cfg, report_path=args.report)
    except (InputError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except WatertightError as exc:
        log.error("internal error: %s", exc)
        return EXIT_INTERNAL
    r = rec["report"]
    log.info("%s -> %s: manifold=%s closed=%s oriented=%s flips=%d",
             args.input, args.output, r["is_manifold"], r["is_closed"], r["is_oriented"], r["flip_count"])
    return EXIT_OK


def _cmd_batch(args) -> int:
    try:
        manifest = BatchManifest.load(args.manifest)
        cfg = _config(args, None)
    except (OSError, ValueError, KeyError) as exc:
        log.error("bad manifest: %s", exc)
        return EXIT_INPUT
    summary = run_batch(manifest, cfg, jobs=max(1, args.jobs))
    text = json.dumps(summary, indent=2) + "\n"
    if args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stdout.write(text)
    return batch_exit_code(summary)


def _cmd_check(args) -> int:
    try:
        mesh = read_mesh(args.input)
    except (InputError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    text = check_manifold(mesh).to_json()
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"convert": _cmd_convert, "batch": _cmd_batch, "check": _cmd_check}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
