"""Topology checks and face-flip counting for output meshes."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh_io import TriangleMesh


@dataclass(frozen=True)
class ManifoldReport:
    is_manifold: bool
    is_closed: bool
    is_oriented: bool
    bad_edges: int
    bad_vertices: int
    euler_characteristic: int
    genus_if_connected_closed: Optional[int]
    flip_count: int = 0
    flip_rate: float = 0.0

    @property
    def watertight(self) -> bool:
        return self.is_manifold and self.is_closed and self.is_oriented

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _edges(triangles: np.ndarray, n_vertices: int):
    """Directed half-edges of every triangle and their undirected keys."""
    a = triangles.reshape(-1)
    b = triangles[:, [1, 2, 0]].reshape(-1)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return a, b, lo * n_vertices + hi


def check_manifold(mesh: TriangleMesh) -> ManifoldReport:
    """Edge incidence, vertex fans, orientation and Euler characteristic."""
    tris = mesh.triangles
    nv = mesh.n_vertices
    nf = len(tris)
    a, b, key = _edges(tris, nv)
    ukey, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    # boundary edges (one face) are reported through is_closed, not here
    bad_edges = int(np.sum(counts > 2))
    is_closed = not np.any(counts == 1)

    # orientation: the two faces of a manifold edge must run it in opposite directions
    forward = (a < b).astype(np.int64)
    n_forward = np.bincount(inv, weights=forward, minlength=len(ukey))
    two = counts == 2
    is_oriented = bool(np.all(n_forward[two] == 1))
    directed = np.unique(a * nv + b)
    is_oriented &= len(directed) == len(a)

    # vertex fans: corners joined across manifold edges touching that vertex
    face = np.repeat(np.arange(nf), 3)
    corner_a = np.arange(3 * nf)                       # corner at a in this face
    corner_b = face * 3 + np.array([1, 2, 0] * nf)     # corner at b in this face
    order = np.argsort(inv, kind="stable")
    starts = np.searchsorted(inv[order], np.arange(len(ukey)))
    manifold_edges = np.flatnonzero(two)
    s1 = order[starts[manifold_edges]]
    s2 = order[starts[manifold_edges] + 1]
    # match corners at the same vertex
    same = a[s1] == a[s2]
    rows = np.concatenate([corner_a[s1], corner_b[s1]])
    cols = np.concatenate([np.where(same, corner_a[s2], corner_b[s2]),
                           np.where(same, corner_b[s2], corner_a[s2])])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(3 * nf, 3 * nf))
    _, label = connected_components(graph, directed=False) if nf else (0, np.zeros(0, dtype=np.int64))
    corner_vertex = tris.reshape(-1)
    fans = np.unique(corner_vertex.astype(np.int64) * (3 * nf) + label)
    fans_per_vertex = np.bincount(fans // (3 * nf), minlength=nv)
    bad_vertex = fans_per_vertex > 1
    # a vertex touching a non-manifold edge is also not a disk
    if bad_edges:
        bad_keys = ukey[counts > 2]
        bad_vertex[bad_keys // nv] = True
        bad_vertex[bad_keys % nv] = True
    bad_vertices = int(bad_vertex.sum())

    used = np.unique(tris)
    euler = int(len(used) - len(ukey) + nf)
    if nf:
        # pieces joined through shared vertices (face/vertex incidence graph)
        incidence = coo_matrix((np.ones(3 * nf), (face, nf + corner_vertex)), shape=(nf + nv, nf + nv))
        piece = connected_components(incidence, directed=False)[1][:nf]
        n_pieces = len(np.unique(piece))
    else:
        n_pieces = 0
    is_manifold = bad_edges == 0 and bad_vertices == 0
    genus = None
    if is_manifold and is_closed and is_oriented and n_pieces == 1:
        genus = (2 - euler) // 2
    return ManifoldReport(
        is_manifold=is_manifold,
        is_closed=bool(is_closed),
        is_oriented=bool(is_oriented),
        bad_edges=bad_edges,
        bad_vertices=bad_vertices,
        euler_characteristic=euler,
        genus_if_connected_closed=genus,
    )


def face_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    length = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, length, out=np.zeros_like(n), where=length > 0)


def count_face_flips(output: TriangleMesh, tree) -> tuple[int, float]:
    """Triangles whose normal opposes the nearest input triangle's normal.

    ``output`` must be in the tree's (normalized) coordinate frame.
    """
    from .project import nearest_triangles

    if output.n_triangles == 0:
        return 0, 0.0
    centroids = output.triangle_points().mean(axis=1)
    ids, _, _ = nearest_triangles(centroids, tree)
    out_n = face_normals(output.vertices, output.triangles)
    ref_n = face_normals(tree.mesh.vertices, tree.mesh.triangles)[ids]
    flips = int(np.sum(np.einsum("ij,ij->i", out_n, ref_n) < 0))
    return flips, flips / output.n_triangles
