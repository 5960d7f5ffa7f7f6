"""End-to-end conversion of one mesh, and batch runs over a manifest."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

from .errors import InputError, MalformedSurface, WatertightError
from .extract import SplitReport, extract_surface
from .mesh_io import MeshFormat, TriangleMesh, denormalize, normalize, parse_mesh, write_mesh
from .octree import Octree, OctreeConfig, build_connections, build_octree
from .project import ProjectionParams, project_to_surface
from .signfield import classify_cells
from .verify import ManifoldReport, check_manifold, count_face_flips

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


@dataclass(frozen=True)
class PipelineConfig:
    octree: OctreeConfig = field(default_factory=OctreeConfig)
    projection: ProjectionParams = field(default_factory=ProjectionParams)
    project_enabled: bool = True
    output_format: MeshFormat = MeshFormat.OBJ
    emit_report: bool = True


@dataclass(eq=False)
class PipelineResult:
    mesh: TriangleMesh
    report: ManifoldReport
    splits: SplitReport
    tree: Octree
    extracted: TriangleMesh        # before projection, normalized frame
    normalized_output: TriangleMesh
    timings: dict


def convert(mesh: TriangleMesh, cfg: PipelineConfig | None = None) -> PipelineResult:
    cfg = cfg or PipelineConfig()
    timings = {}
    t0 = time.perf_counter()

    def lap(name):
        nonlocal t0
        now = time.perf_counter()
        timings[name] = now - t0
        t0 = now

    normalized, transform = normalize(mesh)
    tree = build_octree(normalized, cfg.octree)
    lap("octree")
    graph = build_connections(tree)
    lap("connections")
    signs = classify_cells(tree, graph)
    lap("signs")
    extracted, splits, _ = extract_surface(tree, signs, graph)
    lap("extract")
    topo = check_manifold(extracted)
    if not topo.watertight:
        raise MalformedSurface(f"extracted surface failed verification: {topo}")
    out = extracted
    if cfg.project_enabled:
        out = project_to_surface(extracted, tree, cfg.projection)
        lap("project")
    flips, rate = count_face_flips(out, tree)
    # projection moves vertices only, so the extracted topology still holds
    report = replace(topo, flip_count=flips, flip_rate=rate)
    lap("verify")
    log.info("splits: %s; timings: %s", splits, {k: round(v, 3) for k, v in timings.items()})
    return PipelineResult(denormalize(out, transform), report, splits, tree, extracted, out, timings)


def run_pipeline(mesh: TriangleMesh, cfg: PipelineConfig | None = None) -> tuple[TriangleMesh, ManifoldReport]:
    result = convert(mesh, cfg)
    return result.mesh, result.report


@dataclass(frozen=True)
class BatchManifest:
    entries: list[tuple[str, str]]
    on_error: str = "skip"

    def __post_init__(self):
        if self.on_error not in ("skip", "abort"):
            raise ValueError("on_error must be 'skip' or 'abort'")
        outputs = [o for _, o in self.entries]
        if any(not i or not o for i, o in self.entries):
            raise ValueError("manifest paths must be non-empty")
        if len(set(outputs)) != len(outputs):
            raise ValueError("manifest output paths must be distinct")

    @classmethod
    def from_json(cls, data: Union[str, dict], base: Union[str, Path, None] = None) -> "BatchManifest":
        if isinstance(data, str):
            data = json.loads(data)
        root = Path(base) if base is not None else None

        def resolve(p):
            p = Path(p)
            return str(root / p) if root is not None and not p.is_absolute() else str(p)

        entries = [(resolve(e["input"]), resolve(e["output"])) for e in data.get("entries", [])]
        return cls(entries, data.get("on_error", "skip"))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BatchManifest":
        path = Path(path)
        return cls.from_json(path.read_text(), base=path.parent)


def convert_file(src: Union[str, Path], dst: Union[str, Path], cfg: PipelineConfig,
                 report_path: Union[str, Path, None] = None) -> dict:
    """Convert one file. Returns a summary record; raises pipeline errors."""
    src, dst = Path(src), Path(dst)
    try:
        data = src.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {src}: {exc}") from exc
    mesh, dropped = parse_mesh(data, MeshFormat.from_path(src))
    result = convert(mesh, cfg)
    fmt = cfg.output_format
    dst.write_bytes(write_mesh(result.mesh, fmt))
    if report_path is not None and cfg.emit_report:
        Path(report_path).write_text(result.report.to_json())
    return {
        "input": str(src),
        "output": str(dst),
        "status": "ok",
        "dropped_degenerate": dropped,
        "edge_splits": result.splits.edge_splits,
        "vertex_splits": result.splits.vertex_splits,
        "report": result.report.to_dict(),
    }


def _run_entry(args) -> dict:
    src, dst, cfg = args
    try:
        return convert_file(src, dst, cfg)
    except InputError as exc:
        return {"input": src, "output": dst, "status": "input_error", "error": str(exc)}
    except WatertightError as exc:
        return {"input": src, "output": dst, "status": "internal_error", "error": str(exc)}


def run_batch(manifest: BatchManifest, cfg: PipelineConfig | None = None, jobs: int = 1) -> dict:
    """Convert every entry independently and aggregate the reports."""
    cfg = cfg or PipelineConfig()
    tasks = [(src, dst, cfg) for src, dst in manifest.entries]
    records: list[dict] = []
    aborted = False
    if jobs > 1 and manifest.on_error == "skip" and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_entry, tasks))
    else:
        for task in tasks:
            rec = _run_entry(task)
            records.append(rec)
            if rec["status"] != "ok" and manifest.on_error == "abort":
                aborted = True
                break
    return summarize(records, total=len(tasks), aborted=aborted)


def summarize(records: list[dict], total: int | None = None, aborted: bool = False) -> dict:
    ok = [r for r in records if r["status"] == "ok"]
    reports = [r["report"] for r in ok]
    watertight = sum(1 for r in reports if r["is_manifold"] and r["is_closed"] and r["is_oriented"])
    with_flips = sum(1 for r in reports if r["flip_count"] > 0)
    total = len(records) if total is None else total
    return {
        "total": total,
        "processed": len(records),
        "succeeded": len(ok),
        "input_errors": sum(1 for r in records if r["status"] == "input_error"),
        "internal_errors": sum(1 for r in records if r["status"] == "internal_error"),
        "aborted": aborted,
        "manifold_pass": f"{watertight}/{total}",
        "manifold_pass_count": watertight,
        "models_with_flips": with_flips,
        "mean_flip_rate": (sum(r["flip_rate"] for r in reports) / len(reports)) if reports else 0.0,
        "entries": records,
    }


def batch_exit_code(summary: dict) -> int:
    if summary["internal_errors"]:
        return EXIT_INTERNAL
    if summary["aborted"]:
        return EXIT_INPUT
    return EXIT_OK
