"""Pull extracted vertices onto the input surface by small normal steps plus smoothing."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from . import _kernels
from .errors import NoTriangles
from .mesh_io import TriangleMesh
from .octree import Octree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionParams:
    step_size: float = 0.005
    iterations: int = 20
    smoothing_weight: float = 0.5
    # the grid search is exact and grows from the query's own cell, so the
    # result does not depend on this; kept so configurations stay portable
    search_radius_cells: int = 2
    tolerance: float = 1e-6  # stop once no vertex moves farther than this

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not 0.0 <= self.smoothing_weight <= 1.0:
            raise ValueError("smoothing_weight must lie in [0, 1]")
        if self.search_radius_cells < 0:
            raise ValueError("search_radius_cells must be non-negative")


class _LeafGrid:
    """Sparse block lookup from finest lattice cell to occupied leaf slot."""

    BLOCK = 8

    def __init__(self, tree: Octree):
        leaves = tree.occupied_leaves()
        if len(leaves) == 0:
            raise NoTriangles("octree has no occupied leaves")
        n = tree.resolution
        bs = min(self.BLOCK, n)
        coords = tree.coord[leaves]
        blk = coords // bs
        g = n // bs
        bkey = (blk[:, 0] * g + blk[:, 1]) * g + blk[:, 2]
        ukeys, binv = np.unique(bkey, return_inverse=True)
        top = np.full(g * g * g, -1, dtype=np.int64)
        top[ukeys] = np.arange(len(ukeys))
        blocks = np.full((len(ukeys), bs, bs, bs), -1, dtype=np.int32)
        local = coords % bs
        blocks[binv, local[:, 0], local[:, 1], local[:, 2]] = np.arange(len(leaves))
        counts = tree.tri_ptr[leaves + 1] - tree.tri_ptr[leaves]
        self.leaf_ptr = np.zeros(len(leaves) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.leaf_ptr[1:])
        gather = np.repeat(tree.tri_ptr[leaves] - self.leaf_ptr[:-1], counts) + np.arange(self.leaf_ptr[-1])
        self.leaf_tris = tree.tri_idx[gather]
        pts = tree.mesh.triangle_points()
        self.tri_lo = np.ascontiguousarray(pts.min(axis=1))
        self.tri_hi = np.ascontiguousarray(pts.max(axis=1))
        self.top = top.reshape(g, g, g)
        self.blocks = blocks
        self.bs = bs
        self.n = n
        self.origin = -tree.half_extent
        self.cell = tree.leaf_size


def _grid(tree: Octree) -> _LeafGrid:
    grid = tree.__dict__.get("_leaf_grid")
    if grid is None:
        grid = _LeafGrid(tree)
        tree.__dict__["_leaf_grid"] = grid
    return grid


def nearest_triangles(points: np.ndarray, tree: Octree, hint: np.ndarray | None = None):
    """Exact nearest input triangle for many points.

    Returns (triangle ids, closest points, distances). Candidates come from
    occupied leaves around each point's cell; the ring grows until no
    unvisited cell can hold anything closer. ``hint`` holds a likely
    triangle per point (e.g. last iteration's answer) to tighten the search.
    """
    grid = _grid(tree)
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if hint is None:
        hint = np.full(len(pts), -1, dtype=np.int64)
    return _kernels.closest_points_grid(
        pts, tree.mesh.vertices, tree.mesh.triangles, grid.top, grid.blocks, grid.bs, grid.n,
        grid.leaf_ptr, grid.leaf_tris, grid.origin, grid.cell, grid.tri_lo, grid.tri_hi,
        np.ascontiguousarray(hint, dtype=np.int64))


def nearest_triangle(point, tree: Octree) -> tuple[int, np.ndarray, float]:
    ids, closest, dist = nearest_triangles(np.asarray(point, dtype=np.float64)[None], tree)
    return int(ids[0]), closest[0], float(dist[0])


def _unit_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    normals, fallback = _kernels.vertex_normal_sums(vertices, triangles)
    norm = np.linalg.norm(normals, axis=1)
    weak = norm < 1e-12
    if weak.any():
        normals[weak] = fallback[weak]
        norm = np.linalg.norm(normals, axis=1)
        still = norm < 1e-12
        normals[still] = (0.0, 0.0, 1.0)
        norm[still] = 1.0
    return normals / norm[:, None]


def vertex_normals(mesh: TriangleMesh) -> np.ndarray:
    """Angle-weighted vertex normals; area weighting, then +z, where that degenerates."""
    return _unit_normals(mesh.vertices, mesh.triangles)


def _uniform_laplacian(mesh: TriangleMesh) -> csr_matrix:
    """Row-normalized 1-ring adjacency (each row averages the neighbors)."""
    t = mesh.triangles
    a = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    b = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    nv = mesh.n_vertices
    adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(nv, nv)).tocsr()
    adj.data[:] = 1.0  # duplicate entries were summed
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return csr_matrix(adj.multiply(inv[:, None]))


def _smooth(v: np.ndarray, avg: csr_matrix, isolated: np.ndarray, weight: float) -> np.ndarray:
    target = avg @ v
    target[isolated] = v[isolated]
    return (1.0 - weight) * v + weight * target


def laplacian_smooth(mesh: TriangleMesh, weight: float, _avg: csr_matrix | None = None) -> TriangleMesh:
    """Move each vertex toward the mean of its 1-ring: ``(1 - w) v + w mean``."""
    if weight == 0.0:
        return mesh
    avg = _uniform_laplacian(mesh) if _avg is None else _avg
    isolated = np.diff(avg.indptr) == 0
    return mesh.with_vertices(_smooth(mesh.vertices, avg, isolated, weight))


def surface_distances(mesh: TriangleMesh, tree: Octree) -> np.ndarray:
    return nearest_triangles(mesh.vertices, tree)[2]


def project_to_surface(extracted: TriangleMesh, tree: Octree, params: ProjectionParams | None = None) -> TriangleMesh:
    """Step vertices along their normals toward the nearest input triangle, smoothing after each step."""
    params = params or ProjectionParams()
    if params.iterations == 0:
        return extracted
    avg = _uniform_laplacian(extracted)
    isolated = np.diff(avg.indptr) == 0
    tris = extracted.triangles
    v = extracted.vertices.copy()
    hint = None
    for it in range(params.iterations):
        normals = _unit_normals(v, tris)
        hint, closest, _ = nearest_triangles(v, tree, hint)
        gap = np.einsum("ij,ij->i", closest - v, normals)
        step = np.sign(gap) * np.minimum(params.step_size, np.abs(gap))
        moved = v + step[:, None] * normals
        new = _smooth(moved, avg, isolated, params.smoothing_weight) if params.smoothing_weight else moved
        shift = np.abs(new - v).max() if len(v) else 0.0
        v = new
        if shift < params.tolerance:
            log.debug("projection settled after %d iterations", it + 1)
            break
    return extracted.with_vertices(v)
