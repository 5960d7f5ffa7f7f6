"""Compiled inner loops: triangle/box overlap and point/triangle queries."""
import numpy as np
from numba import njit

# separation must exceed this before a triangle and a box count as disjoint,
# so exact contact (shared planes, touching corners) is treated as overlap
SAT_EPS = 1e-12


@njit(cache=True, inline="always")
def _separated(p0, p1, p2, r, eps):
    lo = min(p0, p1, p2)
    hi = max(p0, p1, p2)
    return lo > r + eps or hi < -r - eps


@njit(cache=True)
def tri_box_overlap(a, b, c, bmin, bmax, eps):
    """Closed-set triangle/AABB overlap by the separating axis theorem."""
    # box face normals, tested in absolute coordinates
    for k in range(3):
        if min(a[k], b[k], c[k]) > bmax[k] + eps or max(a[k], b[k], c[k]) < bmin[k] - eps:
            return False

    cx = 0.5 * (bmin[0] + bmax[0])
    cy = 0.5 * (bmin[1] + bmax[1])
    cz = 0.5 * (bmin[2] + bmax[2])
    hx = 0.5 * (bmax[0] - bmin[0])
    hy = 0.5 * (bmax[1] - bmin[1])
    hz = 0.5 * (bmax[2] - bmin[2])
    v0x, v0y, v0z = a[0] - cx, a[1] - cy, a[2] - cz
    v1x, v1y, v1z = b[0] - cx, b[1] - cy, b[2] - cz
    v2x, v2y, v2z = c[0] - cx, c[1] - cy, c[2] - cz

    e0x, e0y, e0z = v1x - v0x, v1y - v0y, v1z - v0z
    e1x, e1y, e1z = v2x - v1x, v2y - v1y, v2z - v1z
    e2x, e2y, e2z = v0x - v2x, v0y - v2y, v0z - v2z

    # triangle plane
    nx = e0y * e1z - e0z * e1y
    ny = e0z * e1x - e0x * e1z
    nz = e0x * e1y - e0y * e1x
    nn = np.sqrt(nx * nx + ny * ny + nz * nz)
    if nn > 0.0:
        d = (nx * v0x + ny * v0y + nz * v0z) / nn
        r = (hx * abs(nx) + hy * abs(ny) + hz * abs(nz)) / nn
        if abs(d) > r + eps:
            return False

    # the nine edge x box-axis cross products
    for e in range(3):
        if e == 0:
            ex, ey, ez = e0x, e0y, e0z
        elif e == 1:
            ex, ey, ez = e1x, e1y, e1z
        else:
            ex, ey, ez = e2x, e2y, e2z
        # axis = x_hat cross edge = (0, -ez, ey)
        ln = np.sqrt(ey * ey + ez * ez)
        if ln > 0.0:
            p0 = (-ez * v0y + ey * v0z) / ln
            p1 = (-ez * v1y + ey * v1z) / ln
            p2 = (-ez * v2y + ey * v2z) / ln
            r = (hy * abs(ez) + hz * abs(ey)) / ln
            if _separated(p0, p1, p2, r, eps):
                return False
        # y_hat cross edge = (ez, 0, -ex)
        ln = np.sqrt(ex * ex + ez * ez)
        if ln > 0.0:
            p0 = (ez * v0x - ex * v0z) / ln
            p1 = (ez * v1x - ex * v1z) / ln
            p2 = (ez * v2x - ex * v2z) / ln
            r = (hx * abs(ez) + hz * abs(ex)) / ln
            if _separated(p0, p1, p2, r, eps):
                return False
        # z_hat cross edge = (-ey, ex, 0)
        ln = np.sqrt(ex * ex + ey * ey)
        if ln > 0.0:
            p0 = (-ey * v0x + ex * v0y) / ln
            p1 = (-ey * v1x + ex * v1y) / ln
            p2 = (-ey * v2x + ex * v2y) / ln
            r = (hx * abs(ey) + hy * abs(ex)) / ln
            if _separated(p0, p1, p2, r, eps):
                return False
    return True


@njit(cache=True)
def tri_box_overlap_batch(tri_pts, bmin, bmax, eps):
    """Row-wise overlap of ``tri_pts[i]`` (3x3) against box ``bmin[i], bmax[i]``."""
    n = tri_pts.shape[0]
    out = np.empty(n, dtype=np.bool_)
    for i in range(n):
        out[i] = tri_box_overlap(tri_pts[i, 0], tri_pts[i, 1], tri_pts[i, 2], bmin[i], bmax[i], eps)
    return out


@njit(cache=True, inline="always")
def _closest_xyz(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point to p on triangle abc (Voronoi region walk), all scalars."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az

    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz

    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz)

    denom = va + vb + vc
    if denom == 0.0:
        # degenerate triangle that slipped through: fall back to its vertices
        da = apx * apx + apy * apy + apz * apz
        db = bpx * bpx + bpy * bpy + bpz * bpz
        dc = cpx * cpx + cpy * cpy + cpz * cpz
        if dc < da and dc < db:
            return cx, cy, cz
        if db < da:
            return bx, by, bz
        return ax, ay, az
    v = vb / denom
    w = vc / denom
    return ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w


@njit(cache=True)
def closest_point_on_triangle(p, a, b, c):
    """Closest point to ``p`` on triangle abc."""
    return _closest_xyz(p[0], p[1], p[2], a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2])


@njit(cache=True, inline="always")
def _closest_to_tri(px, py, pz, vertices, triangles, t):
    i, j, k = triangles[t, 0], triangles[t, 1], triangles[t, 2]
    return _closest_xyz(px, py, pz, vertices[i, 0], vertices[i, 1], vertices[i, 2],
                        vertices[j, 0], vertices[j, 1], vertices[j, 2],
                        vertices[k, 0], vertices[k, 1], vertices[k, 2])


@njit(cache=True)
def closest_points_brute(points, vertices, triangles):
    """Exhaustive nearest triangle for each point. Returns (ids, closest, dist)."""
    n = points.shape[0]
    ids = np.full(n, -1, dtype=np.int64)
    closest = np.empty((n, 3))
    dist = np.full(n, np.inf)
    for i in range(n):
        p = points[i]
        best = np.inf
        for t in range(triangles.shape[0]):
            qx, qy, qz = _closest_to_tri(p[0], p[1], p[2], vertices, triangles, t)
            d = (qx - p[0]) ** 2 + (qy - p[1]) ** 2 + (qz - p[2]) ** 2
            if d < best:
                best = d
                ids[i] = t
                closest[i, 0], closest[i, 1], closest[i, 2] = qx, qy, qz
        dist[i] = np.sqrt(best)
    return ids, closest, dist


@njit(cache=True)
def _leaf_at(top, blocks, bs, i, j, k):
    b = top[i // bs, j // bs, k // bs]
    if b < 0:
        return -1
    return blocks[b, i % bs, j % bs, k % bs]


@njit(cache=True, inline="always")
def _box_gap2(p, origin, cell, i, j, k):
    """Squared distance from p to lattice cell (i, j, k)."""
    g = 0.0
    idx = (i, j, k)
    for a in range(3):
        lo = origin + idx[a] * cell
        hi = lo + cell
        if p[a] < lo:
            g += (lo - p[a]) ** 2
        elif p[a] > hi:
            g += (p[a] - hi) ** 2
    return g


@njit(cache=True)
def closest_points_grid(points, vertices, triangles, top, blocks, bs, n_cells,
                        leaf_ptr, leaf_tris, origin, cell, tri_lo, tri_hi, hint):
    """Exact nearest triangle using the occupied-leaf lattice.

    Scans Chebyshev shells of cells around each query's cell, skipping cells
    farther away than the best hit so far. The search stops once the best
    distance is no larger than the distance from the query to the outside of
    the scanned block: every triangle is listed in each closed leaf it
    touches, so nothing outside the block can be closer. Ties go to the lower
    triangle id. ``hint`` (one triangle id per query, or -1) only seeds the
    bound; it never changes the answer.
    """
    n = points.shape[0]
    ids = np.full(n, -1, dtype=np.int64)
    closest = np.empty((n, 3))
    dist = np.full(n, np.inf)
    stamp = np.full(triangles.shape[0], -1, dtype=np.int64)
    c = np.empty(3, dtype=np.int64)
    for q in range(n):
        p = points[q]
        for a in range(3):
            v = int(np.floor((p[a] - origin) / cell))
            c[a] = min(max(v, 0), n_cells - 1)
        best = np.inf
        h = hint[q]
        if h >= 0:
            stamp[h] = q
            qx, qy, qz = _closest_to_tri(p[0], p[1], p[2], vertices, triangles, h)
            best = (qx - p[0]) ** 2 + (qy - p[1]) ** 2 + (qz - p[2]) ** 2
            ids[q] = h
            closest[q, 0], closest[q, 1], closest[q, 2] = qx, qy, qz
        r = 0
        while True:
            for i in range(max(c[0] - r, 0), min(c[0] + r, n_cells - 1) + 1):
                di = abs(i - c[0])
                for j in range(max(c[1] - r, 0), min(c[1] + r, n_cells - 1) + 1):
                    dj = abs(j - c[1])
                    k_step = 1 if (di == r or dj == r) else 2 * r
                    if r == 0:
                        k_step = 1
                    k = c[2] - r
                    while k <= c[2] + r:
                        kk = k
                        k += k_step
                        if kk < 0 or kk >= n_cells:
                            continue
                        if _box_gap2(p, origin, cell, i, j, kk) > best:
                            continue
                        leaf = _leaf_at(top, blocks, bs, i, j, kk)
                        if leaf < 0:
                            continue
                        for s in range(leaf_ptr[leaf], leaf_ptr[leaf + 1]):
                            t = leaf_tris[s]
                            if stamp[t] == q:
                                continue
                            stamp[t] = q
                            g = 0.0
                            for a in range(3):
                                if p[a] < tri_lo[t, a]:
                                    g += (tri_lo[t, a] - p[a]) ** 2
                                elif p[a] > tri_hi[t, a]:
                                    g += (p[a] - tri_hi[t, a]) ** 2
                            if g > best:
                                continue
                            qx, qy, qz = _closest_to_tri(p[0], p[1], p[2], vertices, triangles, t)
                            d = (qx - p[0]) ** 2 + (qy - p[1]) ** 2 + (qz - p[2]) ** 2
                            if d < best or (d == best and t < ids[q]):
                                best = d
                                ids[q] = t
                                closest[q, 0], closest[q, 1], closest[q, 2] = qx, qy, qz
            covers_all = True
            margin = np.inf
            for a in range(3):
                lo = c[a] - r
                hi = c[a] + r + 1
                if lo > 0:
                    covers_all = False
                    margin = min(margin, p[a] - (origin + lo * cell))
                if hi < n_cells:
                    covers_all = False
                    margin = min(margin, (origin + hi * cell) - p[a])
            if covers_all or (best < np.inf and margin >= 0.0 and best <= margin * margin):
                break
            r += 1
        dist[q] = np.sqrt(best)
    return ids, closest, dist


@njit(cache=True)
def vertex_normal_sums(vertices, triangles):
    """Per-vertex sums of corner-angle-weighted and area-weighted face normals."""
    nv = vertices.shape[0]
    by_angle = np.zeros((nv, 3))
    by_area = np.zeros((nv, 3))
    e = np.empty((3, 3))
    for f in range(triangles.shape[0]):
        for k in range(3):
            a = triangles[f, k]
            b = triangles[f, (k + 1) % 3]
            for x in range(3):
                e[k, x] = vertices[b, x] - vertices[a, x]   # edge leaving corner k
        nx = e[0, 1] * e[1, 2] - e[0, 2] * e[1, 1]
        ny = e[0, 2] * e[1, 0] - e[0, 0] * e[1, 2]
        nz = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        length = np.sqrt(nx * nx + ny * ny + nz * nz)   # |u x w| at every corner
        for k in range(3):
            a = triangles[f, k]
            by_area[a, 0] += nx
            by_area[a, 1] += ny
            by_area[a, 2] += nz
            if length > 0.0:
                # angle between the outgoing edge and the reversed incoming edge
                km = (k + 2) % 3
                dot = -(e[k, 0] * e[km, 0] + e[k, 1] * e[km, 1] + e[k, 2] * e[km, 2])
                s = np.arctan2(length, dot) / length
                by_angle[a, 0] += s * nx
                by_angle[a, 1] += s * ny
                by_angle[a, 2] += s * nz
    return by_angle, by_area


@njit(cache=True)
def locate_cells(coords, depth, first_child):
    """Descend from the root to the deepest node covering each lattice cell."""
    n = coords.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    for q in range(n):
        d = depth[q]
        res = 1 << d
        if (coords[q, 0] < 0 or coords[q, 1] < 0 or coords[q, 2] < 0
                or coords[q, 0] >= res or coords[q, 1] >= res or coords[q, 2] >= res):
            continue
        node = 0
        for level in range(1, d + 1):
            fc = first_child[node]
            if fc < 0:
                break
            s = d - level
            node = fc + ((coords[q, 0] >> s) & 1) + 2 * ((coords[q, 1] >> s) & 1) + 4 * ((coords[q, 2] >> s) & 1)
        out[q] = node
    return out
