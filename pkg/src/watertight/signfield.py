"""Inside/outside classification of empty octree nodes by flood fill from the root boundary."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .octree import DIRECTION_OFFSETS, ConnectionGraph, Octree


class Sign(enum.IntEnum):
    OCCUPIED = 0
    POSITIVE = 1
    NEGATIVE = 2


@dataclass(eq=False)
class SignField:
    """Per-node sign. Internal (subdivided) nodes are marked OCCUPIED."""

    sign: np.ndarray
    bfs_order: np.ndarray  # positive nodes in the order the search reached them

    def __getitem__(self, node):
        return self.sign[node]

    def counts(self) -> dict[str, int]:
        return {s.name.lower(): int((self.sign == s).sum()) for s in Sign}


def _coarse_neighbors(tree: Octree, nodes: np.ndarray, direction: int) -> np.ndarray:
    """Covering node (same depth or coarser) across one face; -1 outside the root."""
    target = tree.coord[nodes] + DIRECTION_OFFSETS[direction]
    return tree.locate(target, tree.depth[nodes])


def empty_adjacency(tree: Octree, node: int) -> list[int]:
    """All leaf-or-empty nodes sharing a face with ``node``, of any size."""
    out = []
    node = int(node)
    for d in range(6):
        q = int(_coarse_neighbors(tree, np.array([node]), d)[0])
        if q < 0:
            continue
        if tree.first_child[q] < 0:
            out.append(q)
            continue
        # same-depth neighbor is subdivided: collect its leaves facing back at us
        axis, upper = d >> 1, bool(d & 1)
        stack = [q]
        while stack:
            m = stack.pop()
            fc = int(tree.first_child[m])
            if fc < 0:
                out.append(m)
                continue
            for c in range(7, -1, -1):
                if bool(c & (1 << axis)) == upper:
                    stack.append(fc + c)
    return sorted(set(out))


def _empty_graph(tree: Octree) -> tuple[np.ndarray, np.ndarray]:
    """Undirected empty-empty face adjacency as a CSR (indptr, indices) over node ids."""
    empty = tree.empty_nodes()
    src_parts, dst_parts = [], []
    for d in range(6):
        q = _coarse_neighbors(tree, empty, d)
        ok = q >= 0
        ok[ok] &= ~tree.occupied[q[ok]]
        src_parts.append(empty[ok])
        dst_parts.append(q[ok])
    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    # the finer side finds the coarser one; add the reverse direction
    a = np.concatenate([src, dst])
    b = np.concatenate([dst, src])
    key = np.unique(a * tree.n_nodes + b)
    a, b = key // tree.n_nodes, key % tree.n_nodes
    indptr = np.zeros(tree.n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=tree.n_nodes), out=indptr[1:])
    return indptr, b


def boundary_seeds(tree: Octree) -> np.ndarray:
    empty = tree.empty_nodes()
    c = tree.coord[empty]
    top = (np.left_shift(1, tree.depth[empty]) - 1)[:, None]
    touches = np.any((c == 0) | (c == top), axis=1)
    return empty[touches]


def classify_cells(tree: Octree, graph: ConnectionGraph | None = None) -> SignField:
    """Breadth-first expansion of the positive (outside) region from the root faces.

    Empty nodes reached through empty face neighbors are POSITIVE, the rest
    NEGATIVE; occupied nodes keep OCCUPIED. ``graph`` is accepted for
    interface symmetry: occupied/empty links never carry positivity, so the
    search only needs empty/empty adjacency.
    """
    sign = np.full(tree.n_nodes, Sign.NEGATIVE, dtype=np.int8)
    sign[tree.occupied] = Sign.OCCUPIED
    indptr, indices = _empty_graph(tree)
    visited = np.zeros(tree.n_nodes, dtype=bool)
    frontier = boundary_seeds(tree)
    visited[frontier] = True
    order = [frontier]
    while len(frontier):
        starts, stops = indptr[frontier], indptr[frontier + 1]
        lengths = stops - starts
        if lengths.sum() == 0:
            break
        idx = np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(lengths.sum())
        nxt = indices[idx]
        nxt = np.unique(nxt[~visited[nxt]])
        visited[nxt] = True
        order.append(nxt)
        frontier = nxt
    sign[visited] = Sign.POSITIVE
    return SignField(sign, np.concatenate(order))


def fine_sign_grid(tree: Octree, signs: SignField) -> np.ndarray:
    """Dense (N, N, N) sign array at the finest level. For tests and debugging only."""
    n = tree.resolution
    grid = np.empty((n, n, n), dtype=np.int8)
    leaves = np.flatnonzero(tree.first_child < 0)
    for node in leaves.tolist():
        span = 1 << (tree.max_depth - int(tree.depth[node]))
        i, j, k = (tree.coord[node] * span).tolist()
        grid[i:i + span, j:j + span, k:k + span] = signs.sign[node]
    return grid


def dump_signs(tree: Octree, signs: SignField) -> str:
    """``d i j k sign`` per leaf-or-empty node, sorted."""
    leaves = np.flatnonzero(tree.first_child < 0)
    lines = sorted(
        f"{int(tree.depth[n])} {' '.join(map(str, tree.coord[n].tolist()))} {Sign(int(signs.sign[n])).name.lower()}"
        for n in leaves.tolist()
    )
    return "\n".join(lines) + ("\n" if lines else "")
