"""Boundary surface between occupied and positive cells, made 2-manifold.

The raw surface is one lattice quad per (occupied leaf, direction) whose
neighbor is positive. Two configurations break manifoldness: a lattice
edge shared by four quads (two solid cells meeting along an edge) and a
vertex whose quads form several fans (solid cells meeting at a corner).

Edges are repaired first. The four quads are paired by the positive cell
they face, so the solid stays joined through the edge and the outside
pinches apart. Vertices are repaired next, one copy per fan. If both copies
of a split edge sit in one fan at an endpoint, that fan is cut into arcs.
Each arc gets its own vertex, and the faces where arcs meet gain a short
bridge edge. Without this the two edge copies would still have the same
endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import MalformedSurface
from .mesh_io import TriangleMesh
from .octree import DIRECTION_OFFSETS, ConnectionGraph, Octree
from .signfield import Sign, SignField

# how far split vertex copies are pulled toward the faces they serve
SPLIT_PULL = 0.25


@dataclass(frozen=True, eq=False)
class QuadSurface:
    """Polygon surface on the finest lattice (quads until repairs add bridges).

    Faces are stored as CSR: ``face_vert[face_ptr[f]:face_ptr[f+1]]``.
    ``cell``/``direction`` give each face's occupied leaf and the direction
    it faces (-1 for bridge faces). ``edge_copy[s]`` labels the edge from
    corner slot ``s`` to the next corner of the same face.
    """

    vertices: np.ndarray
    lattice: np.ndarray
    face_ptr: np.ndarray
    face_vert: np.ndarray
    cell: np.ndarray
    direction: np.ndarray
    edge_copy: np.ndarray
    cell_size: float

    @property
    def n_faces(self) -> int:
        return len(self.face_ptr) - 1

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def face_sizes(self) -> np.ndarray:
        return np.diff(self.face_ptr)

    def face(self, f: int) -> np.ndarray:
        return self.face_vert[self.face_ptr[f]:self.face_ptr[f + 1]]

    @property
    def quads(self) -> np.ndarray:
        if not np.all(self.face_sizes() == 4):
            raise ValueError("surface has non-quad faces")
        return self.face_vert.reshape(-1, 4)

    def faces(self) -> list[list[int]]:
        return [self.face(f).tolist() for f in range(self.n_faces)]

    def _slot_next(self) -> np.ndarray:
        """Index of the following corner slot within the same face."""
        sizes = self.face_sizes()
        face_of = np.repeat(np.arange(self.n_faces), sizes)
        nxt = np.arange(len(self.face_vert)) + 1
        last = self.face_ptr[1:] - 1
        nxt[last] = self.face_ptr[:-1]
        return nxt if len(face_of) else nxt[:0]


@dataclass(frozen=True)
class SplitReport:
    edge_splits: int = 0
    vertex_splits: int = 0

    def __add__(self, other: "SplitReport") -> "SplitReport":
        return SplitReport(self.edge_splits + other.edge_splits, self.vertex_splits + other.vertex_splits)


def _quad_corners(cell: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """(n, 4, 3) lattice corners, counter-clockwise seen from the positive side."""
    axis = direction >> 1
    positive = (direction & 1) == 0
    eye = np.eye(3, dtype=np.int64)
    ea = eye[axis]
    eu = eye[(axis + 1) % 3]
    ew = eye[(axis + 2) % 3]
    base = cell + ea * positive[:, None]
    first = np.where(positive[:, None], eu, ew)
    second = np.where(positive[:, None], ew, eu)
    return np.stack([base, base + first, base + first + second, base + second], axis=1)


def extract_boundary_faces(tree: Octree, signs: SignField, graph: ConnectionGraph) -> QuadSurface:
    """One outward quad per occupied-leaf face that looks into positive space.

    Faces on the root boundary look outside the domain, which counts as positive.
    """
    src, dst, direction = graph.slots(tree)
    facing = ~tree.occupied[dst] & (signs.sign[dst] == Sign.POSITIVE)
    leaves_f, dirs_f = src[facing], direction[facing]

    leaves = tree.occupied_leaves()
    top = tree.resolution - 1
    border_l, border_d = [], []
    for d in range(6):
        axis = d >> 1
        edge = 0 if d & 1 else top
        hit = leaves[tree.coord[leaves, axis] == edge]
        border_l.append(hit)
        border_d.append(np.full(len(hit), d, dtype=np.int64))
    leaves_f = np.concatenate([leaves_f, *border_l])
    dirs_f = np.concatenate([dirs_f, *border_d])

    cell = tree.coord[leaves_f]
    n1 = tree.resolution + 1
    cell_key = (cell[:, 0] * n1 + cell[:, 1]) * n1 + cell[:, 2]
    order = np.lexsort((dirs_f, cell_key))
    cell, dirs_f = cell[order], dirs_f[order]

    corners = _quad_corners(cell, dirs_f).reshape(-1, 3)
    keys = (corners[:, 0] * n1 + corners[:, 1]) * n1 + corners[:, 2]
    uniq, inverse = np.unique(keys, return_inverse=True)
    lattice = np.stack([uniq // (n1 * n1), (uniq // n1) % n1, uniq % n1], axis=1)
    vertices = -tree.half_extent + lattice * tree.leaf_size
    n = len(cell)
    return QuadSurface(
        vertices=vertices,
        lattice=lattice,
        face_ptr=np.arange(n + 1, dtype=np.int64) * 4,
        face_vert=inverse.astype(np.int64).reshape(-1),
        cell=cell,
        direction=dirs_f.astype(np.int64),
        edge_copy=np.zeros(4 * n, dtype=np.int64),
        cell_size=tree.leaf_size,
    )


def _edge_groups(surface: QuadSurface) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Group corner slots by (undirected edge, copy). Returns sorted slots, group starts, sizes, group id."""
    nxt = surface._slot_next()
    a = surface.face_vert
    b = surface.face_vert[nxt]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((np.arange(len(a)), surface.edge_copy, hi, lo))
    k = np.stack([lo[order], hi[order], surface.edge_copy[order]], axis=1)
    if len(k) == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, e
    new = np.ones(len(k), dtype=bool)
    new[1:] = np.any(k[1:] != k[:-1], axis=1)
    starts = np.flatnonzero(new)
    sizes = np.diff(np.append(starts, len(k)))
    group = np.cumsum(new) - 1
    return order, starts, sizes, group


def split_nonmanifold_edges(surface: QuadSurface) -> tuple[QuadSurface, SplitReport]:
    """Re-pair the four quads of every edge shared by two solid cells.

    Quads facing the same positive cell keep sharing an edge copy; the two
    pairs get distinct copy labels.
    """
    order, starts, sizes, _ = _edge_groups(surface)
    bad = (sizes != 2) & (sizes != 4)
    if bad.any():
        raise MalformedSurface(f"{int(bad.sum())} edge(s) with {sorted(set(sizes[bad].tolist()))} incident faces")
    four = np.flatnonzero(sizes == 4)
    if len(four) == 0:
        return surface, SplitReport()

    face_of_slot = np.repeat(np.arange(surface.n_faces), surface.face_sizes())
    slots = order[starts[four][:, None] + np.arange(4)]  # (k, 4) slot ids
    faces = face_of_slot[slots]
    if np.any(surface.direction[faces] < 0):
        raise MalformedSurface("bridge face on a four-face edge")
    pos_cell = surface.cell[faces] + DIRECTION_OFFSETS[surface.direction[faces]]
    # positive cells differ in exactly the two axes normal to the edge
    same_as_first = np.all(pos_cell == pos_cell[:, :1], axis=2)
    if np.any(same_as_first.sum(axis=1) != 2):
        raise MalformedSurface("four-face edge does not split into two positive cells")

    edge_copy = surface.edge_copy.copy()
    base = int(edge_copy.max()) + 1
    fresh = base + np.arange(len(four))
    second = slots[~same_as_first].reshape(-1, 2)
    edge_copy[second[:, 0]] = fresh
    edge_copy[second[:, 1]] = fresh
    return replace(surface, edge_copy=edge_copy), SplitReport(edge_splits=len(four))


def _fan_partners(surface: QuadSurface) -> tuple[np.ndarray, np.ndarray]:
    """For each corner, the corner of the neighboring face across its outgoing edge.

    Returns (next_partner, prev_partner) as corner-slot indices.
    """
    nxt = surface._slot_next()
    order, starts, sizes, _ = _edge_groups(surface)
    if np.any(sizes != 2):
        raise MalformedSurface("open or non-manifold fan: edge without exactly two faces")
    s1 = order[starts]
    s2 = order[starts + 1]
    fv = surface.face_vert
    opposite = fv[s1] == fv[nxt[s2]]
    if not np.all(opposite):
        raise MalformedSurface("inconsistent orientation across an edge")
    next_partner = np.empty(len(fv), dtype=np.int64)
    # slot s1 runs a->b, slot s2 runs b->a: corner s1 (at a) meets corner nxt[s2] (at a)
    next_partner[s1] = nxt[s2]
    next_partner[s2] = nxt[s1]
    prev_partner = np.empty_like(next_partner)
    prev_partner[next_partner] = np.arange(len(fv))
    return next_partner, prev_partner


def split_nonmanifold_vertices(surface: QuadSurface) -> tuple[QuadSurface, SplitReport]:
    """Give every edge-connected fan of faces around a vertex its own vertex copy.

    A fan that reaches the same neighbor twice (both copies of a split edge)
    is further cut into arcs joined by bridge edges.
    """
    fv = surface.face_vert
    n_corners = len(fv)
    nxt = surface._slot_next()
    next_partner, _ = _fan_partners(surface)
    adj = coo_matrix((np.ones(n_corners), (np.arange(n_corners), next_partner)), shape=(n_corners, n_corners))
    _, label = connected_components(adj, directed=False)

    # neighbor reached through each corner's outgoing edge
    neighbor = fv[nxt]
    # a fan is pinched when some neighbor appears through more than one spoke
    pair_key = label.astype(np.int64) * (surface.n_vertices + 1) + neighbor
    uk, counts = np.unique(pair_key, return_counts=True)
    pinched_fans = np.unique(uk[counts > 1] // (surface.n_vertices + 1))

    # canonical fan order: by vertex, then by the smallest corner in the fan
    n_fans = int(label.max()) + 1 if n_corners else 0
    first_corner = np.full(n_fans, n_corners, dtype=np.int64)
    np.minimum.at(first_corner, label, np.arange(n_corners))
    fan_vertex = fv[first_corner]
    fans_per_vertex = np.bincount(fan_vertex, minlength=surface.n_vertices)
    if len(pinched_fans) == 0 and np.all(fans_per_vertex <= 1):
        return surface, SplitReport()

    fan_order = np.lexsort((first_corner, fan_vertex))
    fan_rank = np.empty(n_fans, dtype=np.int64)
    fan_rank[fan_order] = np.arange(n_fans)

    face_of = np.repeat(np.arange(surface.n_faces), surface.face_sizes())
    sizes = surface.face_sizes()
    centers = np.add.reduceat(surface.vertices[fv], surface.face_ptr[:-1], axis=0) / sizes[:, None]

    new_pos = [surface.vertices[fan_vertex[f]] for f in fan_order]
    new_lat = [surface.lattice[fan_vertex[f]] for f in fan_order]
    split_vertex = fans_per_vertex[fan_vertex] > 1

    def pulled(v: int, faces) -> np.ndarray:
        offset = (centers[list(faces)] - surface.vertices[v]).mean(axis=0)
        return surface.vertices[v] + SPLIT_PULL * offset

    by_fan = np.argsort(label, kind="stable")
    fan_start = np.searchsorted(label[by_fan], np.arange(n_fans + 1))
    for f in np.flatnonzero(split_vertex):
        members = by_fan[fan_start[f]:fan_start[f + 1]]
        new_pos[fan_rank[f]] = pulled(fan_vertex[f], face_of[members])

    # corner -> list of new vertex ids (two for bridge corners)
    corner_new = fan_rank[label]
    expansions: dict[int, tuple[int, int]] = {}
    bridge_faces: list[list[int]] = []
    pinched_set = set(pinched_fans.tolist())
    for f in sorted(pinched_set, key=lambda x: fan_rank[x]):
        start = int(first_corner[f])
        cycle = [start]
        c = int(next_partner[start])
        while c != start:
            cycle.append(c)
            c = int(next_partner[c])
        nbrs = [int(neighbor[c]) for c in cycle]
        # greedy arcs along the outgoing spokes, no neighbor twice per arc
        arc_of, seen, arc = [], set(), 0
        for nb in nbrs:
            if nb in seen:
                arc += 1
                seen = set()
            seen.add(nb)
            arc_of.append(arc)
        m = arc + 1
        v = int(fan_vertex[f])
        arc_ids = [int(fan_rank[f])]
        for _ in range(m - 1):
            arc_ids.append(len(new_pos))
            new_pos.append(surface.vertices[v])
            new_lat.append(surface.lattice[v])
        arc_faces: list[list[int]] = [[] for _ in range(m)]
        for k, c in enumerate(cycle):
            a_prev, a_next = arc_of[k - 1], arc_of[k]
            arc_faces[a_next].append(face_of[c])
            if a_prev != a_next:
                arc_faces[a_prev].append(face_of[c])
                expansions[c] = (arc_ids[a_prev], arc_ids[a_next])
            else:
                corner_new[c] = arc_ids[a_next]
        for a in range(m):
            new_pos[arc_ids[a]] = pulled(v, arc_faces[a])
        if m >= 3:
            bridge_faces.append([arc_ids[a] for a in range(m - 1, -1, -1)])

    out_vert = []
    if expansions:
        for fidx in range(surface.n_faces):
            lo, hi = surface.face_ptr[fidx], surface.face_ptr[fidx + 1]
            row = []
            for c in range(lo, hi):
                if c in expansions:
                    row.extend(expansions[c])
                else:
                    row.append(int(corner_new[c]))
            out_vert.append(row)
        face_lists = out_vert + bridge_faces
        face_vert = np.array([v for row in face_lists for v in row], dtype=np.int64)
        lens = np.array([len(row) for row in face_lists], dtype=np.int64)
    else:
        face_vert = corner_new.astype(np.int64)
        lens = sizes
    face_ptr = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=face_ptr[1:])
    nb = len(bridge_faces)
    cell = np.concatenate([surface.cell, np.full((nb, 3), -1, dtype=np.int64)])
    direction = np.concatenate([surface.direction, np.full(nb, -1, dtype=np.int64)])
    out = QuadSurface(
        vertices=np.array(new_pos, dtype=np.float64).reshape(-1, 3),
        lattice=np.array(new_lat, dtype=np.int64).reshape(-1, 3),
        face_ptr=face_ptr,
        face_vert=face_vert,
        cell=cell,
        direction=direction,
        edge_copy=np.zeros(len(face_vert), dtype=np.int64),
        cell_size=surface.cell_size,
    )
    return out, SplitReport(vertex_splits=len(new_pos) - surface.n_vertices)


def triangulate(surface: QuadSurface) -> TriangleMesh:
    """Quads split along their (v0, v2) diagonal; longer polygons fan around a new center vertex."""
    sizes = surface.face_sizes()
    fv = surface.face_vert
    ptr = surface.face_ptr
    quads = np.flatnonzero(sizes == 4)
    q = fv[ptr[quads][:, None] + np.arange(4)]
    tris = [np.stack([q[:, [0, 1, 2]], q[:, [0, 2, 3]]], axis=1).reshape(-1, 3)]
    order = [np.repeat(quads, 2)]
    tri3 = np.flatnonzero(sizes == 3)
    tris.append(fv[ptr[tri3][:, None] + np.arange(3)])
    order.append(tri3)
    vertices = [surface.vertices]
    next_id = surface.n_vertices
    for f in np.flatnonzero(sizes > 4).tolist():
        poly = fv[ptr[f]:ptr[f + 1]]
        center = surface.vertices[poly].mean(axis=0)
        vertices.append(center[None])
        k = len(poly)
        tris.append(np.stack([np.full(k, next_id), poly, np.roll(poly, -1)], axis=1))
        order.append(np.full(k, f))
        next_id += 1
    tris = np.concatenate(tris)
    # keep triangles grouped in face order
    perm = np.argsort(np.concatenate(order), kind="stable")
    return TriangleMesh(np.concatenate(vertices), tris[perm])


def extract_surface(tree: Octree, signs: SignField, graph: ConnectionGraph) -> tuple[TriangleMesh, SplitReport, QuadSurface]:
    """Boundary faces, both repair passes and triangulation in one call."""
    surface = extract_boundary_faces(tree, signs, graph)
    surface, r1 = split_nonmanifold_edges(surface)
    surface, r2 = split_nonmanifold_vertices(surface)
    return triangulate(surface), r1 + r2, surface
