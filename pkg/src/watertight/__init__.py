"""Watertight 2-manifold conversion of arbitrary triangle meshes."""
from .errors import EmptyMesh, MalformedSurface, ParseError, ZeroExtent
from .extract import QuadSurface, SplitReport, extract_surface
from .mesh_io import MeshFormat, NormalizationTransform, TriangleMesh, denormalize, load_mesh, normalize, write_mesh
from .octree import Octree, OctreeConfig, build_connections, build_octree
from .pipeline import BatchManifest, PipelineConfig, run_batch, run_pipeline
from .project import ProjectionParams, project_to_surface
from .signfield import Sign, SignField, classify_cells
from .verify import ManifoldReport, check_manifold, count_face_flips

__version__ = "0.1.0"

__all__ = [
    "EmptyMesh", "MalformedSurface", "ParseError", "ZeroExtent",
    "QuadSurface", "SplitReport", "extract_surface",
    "MeshFormat", "NormalizationTransform", "TriangleMesh", "denormalize", "load_mesh", "normalize", "write_mesh",
    "Octree", "OctreeConfig", "build_connections", "build_octree",
    "BatchManifest", "PipelineConfig", "run_batch", "run_pipeline",
    "ProjectionParams", "project_to_surface",
    "Sign", "SignField", "classify_cells",
    "ManifoldReport", "check_manifold", "count_face_flips",
]
