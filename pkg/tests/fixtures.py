"""Mesh fixtures shared by the unit and acceptance tests."""
from __future__ import annotations

import numpy as np

from watertight.mesh_io import TriangleMesh

CUBE_TRIANGLES = np.array([
    [0, 2, 1], [0, 3, 2],   # z = lo
    [4, 5, 6], [4, 6, 7],   # z = hi
    [0, 1, 5], [0, 5, 4],   # y = lo
    [2, 3, 7], [2, 7, 6],   # y = hi
    [1, 2, 6], [1, 6, 5],   # x = hi
    [0, 4, 7], [0, 7, 3],   # x = lo
])


def cube(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> TriangleMesh:
    """Axis-aligned box, 8 vertices, 12 outward triangles."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    v = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ], dtype=float)
    return TriangleMesh(v, CUBE_TRIANGLES.copy())


def merge(*meshes: TriangleMesh) -> TriangleMesh:
    verts, tris, base = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + base)
        base += m.n_vertices
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    v = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                midpoint[key] = len(v) - 1
            return midpoint[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.array(v) * radius, np.array(faces))


def torus(major: float = 1.0, minor: float = 0.35, nu: int = 48, nv: int = 24) -> TriangleMesh:
    u = np.linspace(0, 2 * np.pi, nu, endpoint=False)
    w = np.linspace(0, 2 * np.pi, nv, endpoint=False)
    uu, ww = np.meshgrid(u, w, indexing="ij")
    pts = np.stack([(major + minor * np.cos(ww)) * np.cos(uu),
                    (major + minor * np.cos(ww)) * np.sin(uu),
                    minor * np.sin(ww)], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    a = i * nv + j
    b = ((i + 1) % nu) * nv + j
    c = ((i + 1) % nu) * nv + (j + 1) % nv
    d = i * nv + (j + 1) % nv
    tris = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
    return TriangleMesh(pts, tris)


def grid_plane(n: int = 10, hole: tuple[int, int] | None = None) -> TriangleMesh:
    """Flat n x n quad grid in z = 0 over [-1, 1]^2, optionally missing a block of quads."""
    xs = np.linspace(-1.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    v = np.stack([xx, yy, np.zeros_like(xx)], -1).reshape(-1, 3)
    tris = []
    for i in range(n):
        for j in range(n):
            if hole is not None and hole[0] <= i < hole[1] and hole[0] <= j < hole[1]:
                continue
            a, b = i * (n + 1) + j, (i + 1) * (n + 1) + j
            tris += [(a, b, b + 1), (a, b + 1, a + 1)]
    return TriangleMesh(v, np.array(tris))


def thin_sheet(n: int = 24) -> TriangleMesh:
    """Open half-cylinder sheet (single layer, one-sided)."""
    th = np.linspace(0, np.pi, n + 1)
    zs = np.linspace(-1.0, 1.0, n + 1)
    tt, zz = np.meshgrid(th, zs, indexing="ij")
    v = np.stack([np.cos(tt), np.sin(tt) - 0.5, zz], -1).reshape(-1, 3)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b = i * (n + 1) + j, (i + 1) * (n + 1) + j
            tris += [(a, b, b + 1), (a, b + 1, a + 1)]
    return TriangleMesh(v, np.array(tris))


def bowtie_soup() -> TriangleMesh:
    """Two triangles sharing a single vertex, plus a fin of three triangles on one edge."""
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0],
                  [0.5, 0.5, 1.0], [0.5, 0.5, -1.0], [1.0, 1.0, 0.3]], dtype=float)
    return TriangleMesh(v, np.array([[0, 1, 2], [0, 3, 4], [1, 2, 5], [1, 2, 6], [1, 2, 7]]))


def non_oriented_soup(seed: int = 7) -> TriangleMesh:
    """Closed cube whose triangle windings have been randomly reversed."""
    m = cube((-1, -1, -1), (1, 1, 1))
    tris = m.triangles.copy()
    flip = np.random.default_rng(seed).random(len(tris)) < 0.5
    flip[0] = True
    tris[flip] = tris[flip][:, ::-1]
    return TriangleMesh(m.vertices, tris)


def self_intersecting_cubes() -> TriangleMesh:
    return merge(cube((0, 0, 0), (1, 1, 1)), cube((0.5, 0.3, 0.2), (1.5, 1.3, 1.2)))


# voxel fixtures: closed mini-cubes inside chosen lattice cells of the
# [-1.1, 1.1]^3 root, with anchors pinning the bounding box to [-1, 1]^3 so
# that normalization is the identity and cell coordinates survive it
VOXEL_DEPTH = 4
ROOT_HALF = 1.1


def _anchor(corner: float) -> TriangleMesh:
    p = np.array([corner] * 3)
    d = -np.sign(corner) * 0.01
    return TriangleMesh(np.array([p, p + (d, 0, 0), p + (0, d, d)]), np.array([[0, 1, 2]]))


def voxel_soup(cells, depth: int = VOXEL_DEPTH, fill: float = 0.3, anchors: bool = True) -> TriangleMesh:
    size = 2 * ROOT_HALF / (1 << depth)
    parts = [_anchor(-1.0), _anchor(1.0)] if anchors else []
    for c in cells:
        center = -ROOT_HALF + (np.asarray(c, dtype=float) + 0.5) * size
        half = 0.5 * fill * size
        parts.append(cube(center - half, center + half))
    return merge(*parts)


def anchor_cells(depth: int = VOXEL_DEPTH) -> set[tuple[int, int, int]]:
    """Cells occupied by the two anchors (also occupied in every voxel soup)."""
    size = 2 * ROOT_HALF / (1 << depth)
    lo = int((ROOT_HALF - 1.0) // size)
    hi = (1 << depth) - 1 - lo
    return {(lo, lo, lo), (hi, hi, hi)}


def vertex_touching_cubes() -> TriangleMesh:
    return voxel_soup([(6, 6, 6), (7, 7, 7)])


def edge_touching_cubes() -> TriangleMesh:
    return voxel_soup([(6, 6, 6), (7, 7, 6)])


RING_CELLS = [(6 + i, 6 + j, 7) for i in range(3) for j in range(3) if (i, j) != (1, 1)]


def voxel_ring(anchors: bool = True) -> TriangleMesh:
    """Eight cells around a 3x3 square loop: a solid torus of voxels."""
    return voxel_soup(RING_CELLS, anchors=anchors)


def random_voxel_soup(seed: int, size: int = 4, offset: int = 6) -> tuple[TriangleMesh, list]:
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.2, 0.7)
    cells = [tuple(int(x) for x in c) for c in np.argwhere(rng.random((size,) * 3) < p) + offset]
    if not cells:
        cells = [(offset,) * 3]
    return voxel_soup(cells), cells


def corpus() -> dict[str, TriangleMesh]:
    """The named (non-random) fixtures used by the manifold guarantee."""
    return {
        "cube": cube(),
        "icosphere": icosphere(3),
        "torus": torus(),
        "open_plane": grid_plane(10),
        "plane_with_hole": grid_plane(10, hole=(3, 7)),
        "self_intersecting_cubes": self_intersecting_cubes(),
        "vertex_touching_cubes": vertex_touching_cubes(),
        "edge_touching_cubes": edge_touching_cubes(),
        "thin_sheet": thin_sheet(),
        "bowtie_soup": bowtie_soup(),
        "non_oriented_soup": non_oriented_soup(),
        "voxel_ring": voxel_ring(),
    }


VOXEL_FIXTURES = {"vertex_touching_cubes", "edge_touching_cubes", "voxel_ring"}
