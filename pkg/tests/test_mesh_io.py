import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from watertight.errors import EmptyMesh, ParseError, ZeroExtent
from watertight.mesh_io import (
    MeshFormat, NormalizationTransform, TriangleMesh, denormalize, load_mesh, normalize, parse_mesh,
    read_mesh, save_mesh, write_mesh,
)

from fixtures import cube

TRI_OBJ = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"


def test_minimal_obj():
    m = load_mesh(TRI_OBJ, "obj")
    assert m.n_vertices == 3 and m.n_triangles == 1
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_quad_is_fan_triangulated():
    m = load_mesh(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", MeshFormat.OBJ)
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_degenerate_only_face_is_empty():
    with pytest.raises(EmptyMesh):
        load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n", "obj")


def test_degenerates_dropped_and_counted():
    src = TRI_OBJ + b"f 1 1 2\nv 2 0 0\nf 1 2 4\n"   # repeated index, then collinear
    m, dropped = parse_mesh(src, "obj")
    assert m.n_triangles == 1 and dropped == 2
    assert m.n_vertices == 4   # vertex order and count are preserved


def test_obj_sub_indices_negative_indices_and_comments():
    src = b"# header\nv 0 0 0\nv 1 0 0 # trailing\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n"
    m = load_mesh(src, "obj")
    assert m.triangles.tolist() == [[0, 1, 2]]


@pytest.mark.parametrize("text,line", [
    (b"v 0 0 0\nv 1 0\n", 2),
    (b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", 4),
    (b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", 4),
    (b"v 0 0 0\nf 1 2\n", 2),
])
def test_obj_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        load_mesh(text, "obj")
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_off_parse_and_errors():
    m = load_mesh(b"OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", "off")
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]
    with pytest.raises(ParseError):
        load_mesh(b"OFF\n3 1 0\n0 0 0\n1 0 0\n", "off")
    with pytest.raises(ParseError):
        load_mesh(b"PLY\n", "off")
    with pytest.raises(ParseError):
        load_mesh(b"OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", "off")


def test_stream_source_and_format_from_path(tmp_path):
    assert load_mesh(io.BytesIO(TRI_OBJ), "obj").n_triangles == 1
    path = tmp_path / "m.off"
    save_mesh(cube(), path)
    assert path.read_bytes().startswith(b"OFF\n")
    assert read_mesh(path) == cube()


def test_write_obj_format():
    text = write_mesh(load_mesh(TRI_OBJ, "obj"), "obj").decode()
    lines = text.splitlines()
    assert sum(line.startswith("v ") for line in lines) == 3
    assert [line for line in lines if line.startswith("f ")] == ["f 1 2 3"]


@pytest.mark.parametrize("fmt", ["obj", "off"])
def test_round_trip_is_exact(fmt):
    rng = np.random.default_rng(3)
    m = TriangleMesh(rng.normal(size=(30, 3)) * 1e3, rng.integers(0, 30, size=(20, 3)))
    m = TriangleMesh(m.vertices, m.triangles[(m.triangles[:, 0] != m.triangles[:, 1])
                                             & (m.triangles[:, 1] != m.triangles[:, 2])
                                             & (m.triangles[:, 0] != m.triangles[:, 2])])
    again = load_mesh(write_mesh(m, fmt), fmt)
    assert again == m


def test_serialization_idempotent_on_cube_surface():
    first = write_mesh(cube(), "obj")
    second = write_mesh(load_mesh(first, "obj"), "obj")
    assert first == second
    assert load_mesh(first, "obj").n_vertices == 8


def test_mesh_invariants_enforced():
    with pytest.raises(ValueError):
        TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])
    m = cube()
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_normalize_cube():
    out, t = normalize(cube((0, 0, 0), (2, 2, 2)))
    assert np.allclose(t.translation, (-1, -1, -1)) and t.scale == 1.0
    lo, hi = out.bounds()
    assert lo.tolist() == [-1, -1, -1] and hi.tolist() == [1, 1, 1]


def test_normalize_box_aspect():
    # uniform scale 1/2 about the center (2, 1, 0.5)
    out, t = normalize(cube((0, 0, 0), (4, 2, 1)))
    lo, hi = out.bounds()
    assert np.allclose(lo, [-1, -0.5, -0.25]) and np.allclose(hi, [1, 0.5, 0.25])
    assert np.allclose(t.translation, (-2, -1, -0.5)) and t.scale == 0.5


def test_normalize_zero_extent():
    with pytest.raises(ZeroExtent):
        normalize(TriangleMesh(np.ones((3, 3)), [[0, 1, 2]]))


def test_normalize_random_cloud_against_min_max_scan():
    rng = np.random.default_rng(11)
    v = rng.normal(size=(100, 3)) * [3.0, 1.0, 0.5] + [10, -4, 2]
    out, _ = normalize(TriangleMesh(v, [[0, 1, 2]]))
    # independent scan: widest axis and its midpoint
    spans = [max(v[:, a]) - min(v[:, a]) for a in range(3)]
    axis = spans.index(max(spans))
    assert abs(np.abs(out.vertices[:, axis]).max() - 1.0) <= 1e-9
    for a in range(3):
        mid = 0.5 * (out.vertices[:, a].max() + out.vertices[:, a].min())
        assert abs(mid) <= 1e-9


def test_denormalize_identity_and_round_trip():
    m = cube((0, 0, 0), (2, 2, 2))
    assert denormalize(m, NormalizationTransform((0.0, 0.0, 0.0), 1.0)) == m
    out, t = normalize(m)
    assert np.allclose(denormalize(out, t).vertices, m.vertices, atol=1e-12)


coords = arrays(np.float64, st.tuples(st.integers(3, 12), st.just(3)),
                elements=st.floats(-1e3, 1e3, allow_nan=False, width=64))


def _spread(v):
    return float((v.max(axis=0) - v.min(axis=0)).max()) > 1e-3


@settings(max_examples=1000, deadline=None)
@given(coords)
def test_round_trip_property(v):
    if not _spread(v):
        return
    m = TriangleMesh(v, [[0, 1, 2]])
    out, t = normalize(m)
    assert np.abs(denormalize(out, t).vertices - v).max() < 1e-7


@settings(max_examples=200, deadline=None)
@given(coords)
def test_normalize_idempotent_and_uniform(v):
    if not _spread(v):
        return
    m = TriangleMesh(v, [[0, 1, 2]])
    once, t = normalize(m)
    twice, _ = normalize(once)
    assert np.abs(twice.vertices - once.vertices).max() < 1e-7
    e_in = np.linalg.norm(v[1:] - v[:-1], axis=1)
    e_out = np.linalg.norm(once.vertices[1:] - once.vertices[:-1], axis=1)
    big = e_in > 1e-6 * e_in.max()
    assert np.allclose(e_out[big] / e_in[big], t.scale, rtol=1e-9)
