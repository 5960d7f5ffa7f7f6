import numpy as np
import pytest

from watertight.errors import MalformedSurface
from watertight.mesh_io import normalize
from watertight.octree import OctreeConfig, build_connections, build_octree
from watertight.extract import (
    extract_boundary_faces, extract_surface, split_nonmanifold_edges, split_nonmanifold_vertices, triangulate,
)
from watertight.signfield import classify_cells
from watertight.verify import check_manifold

import oracles
from fixtures import cube, grid_plane, random_voxel_soup, torus, voxel_ring, voxel_soup


def stages(mesh, depth=4):
    tree = build_octree(mesh, OctreeConfig(max_depth=depth))
    graph = build_connections(tree)
    return tree, classify_cells(tree, graph), graph


def cells_soup(cells):
    return voxel_soup(cells, anchors=False)


def edge_incidence(surface):
    """Faces per (undirected edge, copy label), counted independently."""
    counts = {}
    for f in range(surface.n_faces):
        lo, hi = surface.face_ptr[f], surface.face_ptr[f + 1]
        verts = surface.face_vert[lo:hi]
        for i in range(hi - lo):
            a, b = int(verts[i]), int(verts[(i + 1) % (hi - lo)])
            key = (min(a, b), max(a, b), int(surface.edge_copy[lo + i]))
            counts[key] = counts.get(key, 0) + 1
    return counts


def test_single_cell_is_outward_cube():
    tree, signs, graph = stages(cells_soup([(7, 7, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    assert surface.n_faces == 6 and surface.n_vertices == 8
    mesh = triangulate(surface)
    assert mesh.n_triangles == 12
    report = check_manifold(mesh)
    assert report.watertight and report.euler_characteristic == 2
    # outward: positive signed volume
    p = mesh.triangle_points()
    assert np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() > 0


def test_quads_are_unit_lattice_squares_ccw_from_outside():
    tree, signs, graph = stages(cells_soup([(7, 7, 7), (8, 7, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    corners = surface.lattice[surface.quads]
    steps = np.abs(np.diff(np.concatenate([corners, corners[:, :1]], axis=1), axis=1)).sum(axis=2)
    assert np.all(steps == 1)
    normal = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 1])
    center = corners.mean(axis=1) - (surface.cell + 0.5)
    assert np.all(np.einsum("ij,ij->i", normal, center) > 0)


def test_two_cell_block():
    tree, signs, graph = stages(cells_soup([(7, 7, 7), (8, 7, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    assert surface.n_faces == 10
    mesh = triangulate(surface)
    report = check_manifold(mesh)
    assert mesh.n_triangles == 20 and report.watertight and report.genus_if_connected_closed == 0


def test_cube_shell_has_no_inner_faces():
    mesh = cube((-0.25, -0.25, -0.25), (0.25, 0.25, 0.25))
    tree, signs, graph = stages(mesh, 4)
    surface = extract_boundary_faces(tree, signs, graph)
    occ = oracles.dense_occupancy(mesh.vertices, mesh.triangles, 4)
    assert surface.n_faces == oracles.dense_boundary_faces(oracles.dense_signs(occ))
    # the cell each face looks into lies outside the shell
    from watertight.octree import DIRECTION_OFFSETS
    beyond = surface.cell + DIRECTION_OFFSETS[surface.direction]
    center = -1.1 + (beyond + 0.5) * tree.leaf_size
    assert np.all(np.abs(center).max(axis=1) > 0.25)


def test_coarse_positive_neighbors_emit_fine_quads():
    tree, signs, graph = stages(cells_soup([(7, 7, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    assert np.all(np.ptp(surface.lattice[surface.quads], axis=1).max(axis=1) == 1)


@pytest.mark.parametrize("make,depth", [
    (lambda: normalize(torus(nu=16, nv=8))[0], 5),
    (lambda: normalize(grid_plane(6, hole=(2, 4)))[0], 5),
    (lambda: random_voxel_soup(3)[0], 4),
])
def test_quad_count_matches_dense_face_scan(make, depth):
    mesh = make()
    tree, signs, graph = stages(mesh, depth)
    surface = extract_boundary_faces(tree, signs, graph)
    occ = oracles.dense_occupancy(mesh.vertices, mesh.triangles, depth)
    assert surface.n_faces == oracles.dense_boundary_faces(oracles.dense_signs(occ))


def test_edge_split_example():
    tree, signs, graph = stages(cells_soup([(7, 7, 7), (8, 8, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    before = edge_incidence(surface)
    assert sorted(before.values()).count(4) == 1
    split, report = split_nonmanifold_edges(surface)
    assert report.edge_splits == 1
    assert set(edge_incidence(split).values()) == {2}
    # quads that face the same positive cell share the surviving copy
    final, _ = split_nonmanifold_vertices(split)
    assert check_manifold(triangulate(final)).watertight


def test_vertex_split_example():
    tree, signs, graph = stages(cells_soup([(7, 7, 7), (8, 8, 8)]))
    surface = extract_boundary_faces(tree, signs, graph)
    split, r1 = split_nonmanifold_edges(surface)
    assert r1.edge_splits == 0
    final, r2 = split_nonmanifold_vertices(split)
    assert r2.vertex_splits == 1
    assert final.n_vertices == surface.n_vertices + 1
    mesh = triangulate(final)
    report = check_manifold(mesh)
    assert report.watertight and report.euler_characteristic == 4   # two separate cubes


def test_manifold_cube_unchanged():
    tree, signs, graph = stages(cells_soup([(7, 7, 7), (8, 7, 7), (7, 8, 7), (8, 8, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    s1, r1 = split_nonmanifold_edges(surface)
    s2, r2 = split_nonmanifold_vertices(s1)
    assert r1.edge_splits == 0 and r2.vertex_splits == 0
    assert s2.faces() == surface.faces() and np.array_equal(s2.vertices, surface.vertices)


def test_open_surface_is_rejected():
    tree, signs, graph = stages(cells_soup([(7, 7, 7)]))
    surface = extract_boundary_faces(tree, signs, graph)
    from dataclasses import replace
    ptr = surface.face_ptr[:-1]
    cut = replace(surface, face_ptr=ptr, face_vert=surface.face_vert[:ptr[-1]],
                  cell=surface.cell[:-1], direction=surface.direction[:-1],
                  edge_copy=surface.edge_copy[:ptr[-1]])
    with pytest.raises(MalformedSurface):
        split_nonmanifold_vertices(cut)


def test_voxel_ring_is_a_torus():
    tree, signs, graph = stages(voxel_ring(anchors=False))
    mesh, report, _ = extract_surface(tree, signs, graph)
    topo = check_manifold(mesh)
    assert topo.watertight
    assert topo.euler_characteristic == 0 and topo.genus_if_connected_closed == 1


@pytest.mark.parametrize("seed", range(25))
def test_random_voxel_fields_become_manifold(seed):
    mesh, _ = random_voxel_soup(seed)
    tree, signs, graph = stages(mesh)
    surface = extract_boundary_faces(tree, signs, graph)
    s1, r1 = split_nonmanifold_edges(surface)
    assert set(edge_incidence(s1).values()) == {2}
    again, r1b = split_nonmanifold_edges(s1)
    assert r1b.edge_splits == 0 and np.array_equal(again.edge_copy, s1.edge_copy)

    s2, r2 = split_nonmanifold_vertices(s1)
    again2, r2b = split_nonmanifold_vertices(s2)
    assert r2b.vertex_splits == 0 and again2.faces() == s2.faces()

    tris = triangulate(s2)
    # quads give two triangles, triangles one, longer bridge polygons a fan around a center
    assert tris.n_triangles == sum(len(f) - 2 if len(f) <= 4 else len(f) for f in s2.faces())
    report = check_manifold(tris)
    assert report.watertight, report
    assert oracles.half_edge_valid(tris.triangles)
