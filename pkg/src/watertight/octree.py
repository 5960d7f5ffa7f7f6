"""Adaptive octree over the input surface and its neighbor connection graph.

Nodes live in flat arrays indexed by a global node id. Children of an
occupied internal node are stored contiguously at ``first_child + c`` with
child index ``c = 4*z + 2*y + x`` (one bit per axis, 1 = upper half).
Lattice coordinates of a node at depth ``d`` run over ``0 .. 2**d - 1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import EmptyMesh
from .mesh_io import TriangleMesh


class NodeStatus(enum.IntEnum):
    EMPTY = 0
    OCCUPIED = 1


class Direction(enum.IntEnum):
    """Face directions, encoded as ``2 * axis + (1 if negative else 0)``."""

    PX = 0
    NX = 1
    PY = 2
    NY = 3
    PZ = 4
    NZ = 5

    @property
    def axis(self) -> int:
        return self.value >> 1

    @property
    def sign(self) -> int:
        return -1 if self.value & 1 else 1

    @property
    def offset(self) -> tuple[int, int, int]:
        o = [0, 0, 0]
        o[self.axis] = self.sign
        return tuple(o)

    @property
    def opposite(self) -> "Direction":
        return Direction(self.value ^ 1)

    @property
    def label(self) -> str:
        return ("+" if self.sign > 0 else "-") + "xyz"[self.axis]

    @classmethod
    def of(cls, axis: int, sign: int) -> "Direction":
        return cls(2 * axis + (1 if sign < 0 else 0))


# (n_dirs, 3) integer offsets indexed by Direction value
DIRECTION_OFFSETS = np.array([d.offset for d in Direction], dtype=np.int64)


@dataclass(frozen=True)
class AABB:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if any(a > b for a, b in zip(self.min, self.max)):
            raise ValueError("AABB min must not exceed max")

    def contains(self, p, tol: float = 0.0) -> bool:
        return all(lo - tol <= x <= hi + tol for lo, x, hi in zip(self.min, p, self.max))


def triangle_box_intersects(tri: Sequence[Sequence[float]], box: AABB) -> bool:
    """Closed triangle vs closed box overlap (separating axis theorem, 13 axes)."""
    t = np.asarray(tri, dtype=np.float64).reshape(3, 3)
    return bool(_kernels.tri_box_overlap(t[0], t[1], t[2], np.asarray(box.min, dtype=np.float64),
                                         np.asarray(box.max, dtype=np.float64), _kernels.SAT_EPS))


@dataclass(frozen=True)
class OctreeConfig:
    root_half_extent: float = 1.1
    target_leaf_size: float = 0.01
    max_depth: int | None = None

    def __post_init__(self):
        if not self.root_half_extent > 1.0:
            raise ValueError("root_half_extent must exceed 1 to cover a normalized mesh")
        if not self.target_leaf_size > 0.0:
            raise ValueError("target_leaf_size must be positive")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")

    @property
    def depth(self) -> int:
        """Resolved max depth: the shallowest power-of-two split no coarser than the target."""
        if self.max_depth is not None:
            return int(self.max_depth)
        return max(0, math.ceil(math.log2(2.0 * self.root_half_extent / self.target_leaf_size) - 1e-12))

    @property
    def leaf_size(self) -> float:
        return 2.0 * self.root_half_extent / (1 << self.depth)


@dataclass(frozen=True)
class OctreeNode:
    """Read-only view of one node."""

    id: int
    bbox: AABB
    status: NodeStatus
    triangles: np.ndarray
    children: tuple[int, ...]
    depth: int
    cell_coord: tuple[int, int, int]

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(eq=False)
class Octree:
    mesh: TriangleMesh
    config: OctreeConfig
    depth: np.ndarray          # (n,) node depth
    coord: np.ndarray          # (n, 3) lattice coordinate at the node's depth
    occupied: np.ndarray       # (n,) bool
    first_child: np.ndarray    # (n,) id of child 0, -1 for leaves
    tri_ptr: np.ndarray        # (n + 1,) CSR offsets into tri_idx
    tri_idx: np.ndarray        # triangle indices per node
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def max_depth(self) -> int:
        return self.config.depth

    @property
    def half_extent(self) -> float:
        return self.config.root_half_extent

    @property
    def leaf_size(self) -> float:
        return self.config.leaf_size

    @property
    def n_nodes(self) -> int:
        return len(self.depth)

    @property
    def resolution(self) -> int:
        """Number of finest cells along each axis."""
        return 1 << self.max_depth

    def node_size(self, depth) -> np.ndarray:
        return 2.0 * self.half_extent / np.left_shift(1, np.asarray(depth, dtype=np.int64))

    def is_leaf(self, ids=None) -> np.ndarray:
        fc = self.first_child if ids is None else self.first_child[ids]
        return fc < 0

    def occupied_leaves(self) -> np.ndarray:
        return np.flatnonzero(self.occupied & (self.depth == self.max_depth))

    def empty_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.occupied)

    def bbox_arrays(self, ids) -> tuple[np.ndarray, np.ndarray]:
        ids = np.asarray(ids)
        size = self.node_size(self.depth[ids])[..., None]
        lo = -self.half_extent + self.coord[ids] * size
        return lo, lo + size

    def triangles_of(self, node: int) -> np.ndarray:
        return self.tri_idx[self.tri_ptr[node]:self.tri_ptr[node + 1]]

    def node(self, node_id: int) -> OctreeNode:
        node_id = int(node_id)
        lo, hi = self.bbox_arrays(node_id)
        fc = int(self.first_child[node_id])
        return OctreeNode(
            id=node_id,
            bbox=AABB(tuple(lo.tolist()), tuple(hi.tolist())),
            status=NodeStatus.OCCUPIED if self.occupied[node_id] else NodeStatus.EMPTY,
            triangles=self.triangles_of(node_id),
            children=tuple(range(fc, fc + 8)) if fc >= 0 else (),
            depth=int(self.depth[node_id]),
            cell_coord=tuple(int(c) for c in self.coord[node_id]),
        )

    def lookup(self, depth: int, coord) -> int:
        """Node id at exactly ``depth`` and lattice ``coord``, or -1."""
        if not self._index:
            for i, (d, c) in enumerate(zip(self.depth.tolist(), self.coord.tolist())):
                self._index[(d, *c)] = i
        return self._index.get((int(depth), *(int(x) for x in coord)), -1)

    def locate(self, coords: np.ndarray, depth) -> np.ndarray:
        """Deepest node at depth <= ``depth`` covering each lattice cell.

        ``coords`` are lattice coordinates at ``depth`` (scalar or per row).
        Cells outside the root give -1.
        """
        coords = np.ascontiguousarray(np.asarray(coords, dtype=np.int64).reshape(-1, 3))
        depth = np.ascontiguousarray(np.broadcast_to(np.asarray(depth, dtype=np.int64), (len(coords),)))
        return _kernels.locate_cells(coords, depth, self.first_child)

    def locate_points(self, points: np.ndarray) -> np.ndarray:
        """Leaf-or-empty node containing each point (half-open cells)."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        cells = np.floor((p + self.half_extent) / self.leaf_size).astype(np.int64)
        cells = np.clip(cells, 0, self.resolution - 1)
        return self.locate(cells, self.max_depth)


def _child_offsets() -> np.ndarray:
    c = np.arange(8)
    return np.stack([c & 1, (c >> 1) & 1, (c >> 2) & 1], axis=1)


CHILD_OFFSETS = _child_offsets()


def build_octree(mesh: TriangleMesh, cfg: OctreeConfig | None = None) -> Octree:
    """Subdivide occupied nodes down to the finest level; empty nodes stay whole."""
    cfg = cfg or OctreeConfig()
    if mesh.n_triangles == 0:
        raise EmptyMesh("cannot build an octree without triangles")
    h = cfg.root_half_extent
    max_depth = cfg.depth
    tri_pts = np.ascontiguousarray(mesh.triangle_points())

    depth_parts = [np.zeros(1, dtype=np.int8)]
    coord_parts = [np.zeros((1, 3), dtype=np.int64)]
    occ_parts = [np.ones(1, dtype=bool)]
    fc_parts = []
    count_parts = [np.array([mesh.n_triangles], dtype=np.int64)]
    tri_parts = [np.arange(mesh.n_triangles, dtype=np.int64)]

    # level frontier: occupied nodes at depth d, (node, triangle) pairs in node order
    level_ids = np.zeros(1, dtype=np.int64)
    level_coord = coord_parts[0]
    pair_node = np.zeros(mesh.n_triangles, dtype=np.int64)  # local index within the level
    pair_tri = tri_parts[0]
    next_id = 1
    for d in range(max_depth):
        n_occ = len(level_ids)
        fc = np.full(len(depth_parts[-1]), -1, dtype=np.int64)
        if n_occ == 0:
            fc_parts.append(fc)
            break
        occ_local = np.flatnonzero(occ_parts[-1])
        # every occupied node at depth d < max_depth gets eight children
        fc[occ_local] = next_id + 8 * np.arange(n_occ)
        fc_parts.append(fc)

        child_coord = (2 * level_coord[:, None, :] + CHILD_OFFSETS[None]).reshape(-1, 3)
        size = 2.0 * h / (1 << (d + 1))
        # test each (parent pair, child) combination
        rep_child = np.repeat(pair_node * 8, 8) + np.tile(np.arange(8), len(pair_node))
        rep_tri = np.repeat(pair_tri, 8)
        lo = -h + child_coord[rep_child] * size
        hit = _kernels.tri_box_overlap_batch(tri_pts[rep_tri], lo, lo + size, _kernels.SAT_EPS)
        rep_child, rep_tri = rep_child[hit], rep_tri[hit]
        order = np.argsort(rep_child, kind="stable")
        rep_child, rep_tri = rep_child[order], rep_tri[order]
        counts = np.bincount(rep_child, minlength=8 * n_occ)

        depth_parts.append(np.full(8 * n_occ, d + 1, dtype=np.int8))
        coord_parts.append(child_coord)
        occ = counts > 0
        occ_parts.append(occ)
        count_parts.append(counts)
        tri_parts.append(rep_tri)
        next_id += 8 * n_occ

        level_ids = np.flatnonzero(occ)
        level_coord = child_coord[level_ids]
        remap = np.full(8 * n_occ, -1, dtype=np.int64)
        remap[level_ids] = np.arange(len(level_ids))
        pair_node = remap[rep_child]
        pair_tri = rep_tri
    else:
        fc_parts.append(np.full(len(depth_parts[-1]), -1, dtype=np.int64))
    if max_depth == 0:
        fc_parts = [np.full(1, -1, dtype=np.int64)]

    counts = np.concatenate(count_parts)
    tri_ptr = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=tri_ptr[1:])
    return Octree(
        mesh=mesh,
        config=cfg,
        depth=np.concatenate(depth_parts).astype(np.int64),
        coord=np.concatenate(coord_parts),
        occupied=np.concatenate(occ_parts),
        first_child=np.concatenate(fc_parts),
        tri_ptr=tri_ptr,
        tri_idx=np.concatenate(tri_parts),
    )


@dataclass(eq=False)
class ConnectionGraph:
    """Edges leaving occupied leaves toward face-adjacent nodes.

    ``src`` is always an occupied leaf; ``dst`` an empty node of any depth or
    another occupied leaf; ``direction`` points from src to dst. An
    occupied-occupied pair is stored once, from the lower cell along +axis.
    """

    src: np.ndarray
    dst: np.ndarray
    direction: np.ndarray

    def __len__(self):
        return len(self.src)

    def edges(self) -> list[tuple[int, int, Direction]]:
        return [(int(s), int(t), Direction(int(d))) for s, t, d in zip(self.src, self.dst, self.direction)]

    def slots(self, tree: Octree) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All direction slots of every occupied leaf, occupied pairs listed from both ends."""
        both = tree.occupied[self.dst]
        src = np.concatenate([self.src, self.dst[both]])
        dst = np.concatenate([self.dst, self.src[both]])
        direction = np.concatenate([self.direction, self.direction[both] ^ 1])
        order = np.lexsort((direction, src))
        return src[order], dst[order], direction[order]

    def neighbors(self, tree: Octree, leaf: int) -> dict[Direction, int]:
        src, dst, direction = self.slots(tree)
        sel = src == leaf
        return {Direction(int(d)): int(t) for d, t in zip(direction[sel], dst[sel])}


def _facing_children(axis: int, upper: bool) -> np.ndarray:
    """Child indices on one side of ``axis``, ordered by the other two bits."""
    bit = 1 << axis
    return np.array([c for c in range(8) if bool(c & bit) == upper], dtype=np.int64)


_FACING = {(a, u): _facing_children(a, u) for a in range(3) for u in (False, True)}
# the 12 face-adjacent sibling pairs: children differing only in one axis bit
SIBLING_PAIRS = [(c, c | (1 << a), a) for a in range(3) for c in range(8) if not c & (1 << a)]


def connect_nodes(tree: Octree, left, right, axis) -> ConnectionGraph:
    """Connect face-adjacent node pairs (``right`` sits at +axis of ``left``).

    Empty/empty pairs are dropped; an empty node is paired with each of the
    four facing children of an occupied partner; occupied/occupied pairs
    recurse into their four facing child pairs. Pairs reaching an occupied
    leaf emit an edge. Works on whole arrays of pairs, one level at a time.
    """
    left = np.atleast_1d(np.asarray(left, dtype=np.int64))
    right = np.atleast_1d(np.asarray(right, dtype=np.int64))
    axis = np.broadcast_to(np.atleast_1d(np.asarray(axis, dtype=np.int64)), left.shape).copy()
    max_depth = tree.max_depth
    out_src, out_dst, out_dir = [], [], []
    while len(left):
        lo, ro = tree.occupied[left], tree.occupied[right]
        keep = lo | ro
        left, right, axis, lo, ro = left[keep], right[keep], axis[keep], lo[keep], ro[keep]
        l_leaf = ~lo | (tree.depth[left] == max_depth)
        r_leaf = ~ro | (tree.depth[right] == max_depth)
        done = l_leaf & r_leaf
        if done.any():
            dl, dr, da = left[done], right[done], axis[done]
            from_left = tree.occupied[dl]
            out_src.append(np.where(from_left, dl, dr))
            out_dst.append(np.where(from_left, dr, dl))
            out_dir.append(2 * da + np.where(from_left, 0, 1))
        go = ~done
        left, right, axis, lo, ro = left[go], right[go], axis[go], lo[go], ro[go]
        if not len(left):
            break
        new_l = np.repeat(left, 4)
        new_r = np.repeat(right, 4)
        new_a = np.repeat(axis, 4)
        lo4, ro4 = np.repeat(lo, 4), np.repeat(ro, 4)
        slot = np.tile(np.arange(4), len(left))
        for a in range(3):
            sel = new_a == a
            up, down = _FACING[(a, True)], _FACING[(a, False)]
            ls = sel & lo4
            new_l[ls] = tree.first_child[new_l[ls]] + up[slot[ls]]
            rs = sel & ro4
            new_r[rs] = tree.first_child[new_r[rs]] + down[slot[rs]]
        left, right, axis = new_l, new_r, new_a
    if out_src:
        src, dst, direction = (np.concatenate(x) for x in (out_src, out_dst, out_dir))
    else:
        src = dst = direction = np.zeros(0, dtype=np.int64)
    return ConnectionGraph(src, dst, direction)


def build_connections(tree: Octree) -> ConnectionGraph:
    """Run the sibling-pair connection pass over every occupied internal node."""
    parents = np.flatnonzero(tree.occupied & (tree.first_child >= 0))
    fc = tree.first_child[parents]
    left = np.concatenate([fc + a for a, _, _ in SIBLING_PAIRS])
    right = np.concatenate([fc + b for _, b, _ in SIBLING_PAIRS])
    axis = np.concatenate([np.full(len(fc), ax, dtype=np.int64) for _, _, ax in SIBLING_PAIRS])
    graph = connect_nodes(tree, left, right, axis)
    order = np.lexsort((graph.dst, graph.direction, graph.src))
    return ConnectionGraph(graph.src[order], graph.dst[order], graph.direction[order])


def dump_octree(tree: Octree, graph: ConnectionGraph | None = None) -> str:
    """Plain-text listing: ``d i j k`` per occupied leaf, ``i j k dir node`` per connection."""
    lines = []
    for n in tree.occupied_leaves():
        i, j, k = tree.coord[n].tolist()
        lines.append(f"{tree.max_depth} {i} {j} {k}")
    lines.sort()
    if graph is not None:
        conn = []
        for s, t, d in zip(graph.src.tolist(), graph.dst.tolist(), graph.direction.tolist()):
            i, j, k = tree.coord[s].tolist()
            conn.append(f"{i} {j} {k} {Direction(d).label} {t}")
        lines.extend(sorted(conn))
    return "\n".join(lines) + ("\n" if lines else "")


def fine_adjacency(tree: Octree, graph: ConnectionGraph) -> set[tuple[tuple[int, int, int], tuple[int, int, int]]]:
    """Expand the graph into ordered pairs of face-adjacent finest cells (lower cell first)."""
    pairs = set()
    for s, d in zip(graph.src.tolist(), graph.direction.tolist()):
        a = tuple(tree.coord[s].tolist())
        b = tuple(x + o for x, o in zip(a, DIRECTION_OFFSETS[d].tolist()))
        pairs.add((a, b) if d % 2 == 0 else (b, a))
    return pairs


def iter_leaf_cells(tree: Octree) -> Iterable[tuple[int, tuple[int, int, int]]]:
    """Every finest cell with its covering leaf-or-empty node (coarse nodes expanded)."""
    leaves = np.flatnonzero(tree.first_child < 0)
    for n in leaves.tolist():
        span = 1 << (tree.max_depth - int(tree.depth[n]))
        base = tree.coord[n] * span
        for off in np.ndindex(span, span, span):
            yield n, tuple((base + off).tolist())
