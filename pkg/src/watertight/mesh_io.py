"""Triangle mesh container, OBJ/OFF reading and writing, normalization."""
from __future__ import annotations

import enum
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import EmptyMesh, ParseError, ZeroExtent

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


class MeshFormat(str, enum.Enum):
    OBJ = "obj"
    OFF = "off"

    @classmethod
    def coerce(cls, value: Union["MeshFormat", str]) -> "MeshFormat":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower().lstrip("."))

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "MeshFormat":
        return cls.coerce(Path(path).suffix)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle soup. Counter-clockwise winding faces outward.

    Arrays are copied on construction and made read-only.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and self.triangles.shape == other.triangles.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
        )

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(vertices, self.triangles)

    def flipped(self) -> "TriangleMesh":
        """Same surface with every winding reversed."""
        return TriangleMesh(self.vertices, self.triangles[:, ::-1])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_points(self) -> np.ndarray:
        """(n_triangles, 3, 3) array of corner coordinates."""
        return self.vertices[self.triangles]


@dataclass(frozen=True)
class NormalizationTransform:
    """``normalized = (original + translation) * scale``."""

    translation: tuple[float, float, float]
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) + np.asarray(self.translation)) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale - np.asarray(self.translation)


def drop_degenerate(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, int]:
    """Remove triangles that repeat an index or have (near) zero area."""
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(triangles) == 0:
        return triangles, 0
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    keep = (a != b) & (b != c) & (a != c)
    p = vertices[triangles]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    keep &= area > DEGENERATE_AREA
    return triangles[keep], int(len(triangles) - keep.sum())


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8", errors="replace")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data


def _fan(poly: list[int]) -> list[tuple[int, int, int]]:
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _parse_obj(text: str) -> tuple[list, list]:
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError("vertex record needs 3 coordinates", lineno)
            try:
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise ParseError(f"bad vertex coordinate in {raw.strip()!r}", lineno) from None
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError("face record needs at least 3 vertices", lineno)
            poly = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise ParseError(f"bad face index {token!r}", lineno) from None
                if idx > 0:
                    idx -= 1
                elif idx < 0:
                    idx += len(vertices)
                else:
                    raise ParseError("face index 0 is not valid in OBJ", lineno)
                if idx < 0 or idx >= len(vertices):
                    raise ParseError(f"face index {token!r} out of range", lineno)
                poly.append(idx)
            triangles.extend(_fan(poly))
    return vertices, triangles


def _parse_off(text: str) -> tuple[list, list]:
    records: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            records.append((lineno, line.split()))
    if not records:
        raise ParseError("empty OFF file", 1)
    lineno, head = records[0]
    if not head[0].upper().endswith("OFF"):
        raise ParseError("missing OFF header", lineno)
    pos = 1
    counts = head[1:]
    if not counts:
        if len(records) < 2:
            raise ParseError("missing OFF counts line", lineno)
        lineno, counts = records[1]
        pos = 2
    try:
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise ParseError("bad OFF counts line", lineno) from None
    if len(records) < pos + n_vertices + n_faces:
        raise ParseError("OFF file truncated", records[-1][0])

    vertices = []
    for lineno, parts in records[pos:pos + n_vertices]:
        try:
            vertices.append((float(parts[0]), float(parts[1]), float(parts[2])))
        except (ValueError, IndexError):
            raise ParseError("bad OFF vertex record", lineno) from None
    triangles = []
    for lineno, parts in records[pos + n_vertices:pos + n_vertices + n_faces]:
        try:
            k = int(parts[0])
            poly = [int(x) for x in parts[1:1 + k]]
        except ValueError:
            raise ParseError("bad OFF face record", lineno) from None
        if k < 3 or len(poly) != k:
            raise ParseError("OFF face needs at least 3 indices", lineno)
        if min(poly) < 0 or max(poly) >= n_vertices:
            raise ParseError("OFF face index out of range", lineno)
        triangles.extend(_fan(poly))
    return vertices, triangles


def parse_mesh(source: Union[bytes, str, BinaryIO], format: Union[MeshFormat, str]) -> tuple[TriangleMesh, int]:
    """Parse OBJ/OFF text. Returns the mesh and the number of dropped degenerate triangles."""
    fmt = MeshFormat.coerce(format)
    text = _read_text(source)
    if fmt is MeshFormat.OBJ:
        vertices, triangles = _parse_obj(text)
    else:
        vertices, triangles = _parse_off(text)
    v = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    t, dropped = drop_degenerate(v, np.array(triangles, dtype=np.int64))
    if dropped:
        log.warning("dropped %d degenerate triangle(s)", dropped)
    if len(t) == 0:
        raise EmptyMesh("no non-degenerate triangles in input")
    return TriangleMesh(v, t), dropped


def load_mesh(source: Union[bytes, str, BinaryIO], format: Union[MeshFormat, str]) -> TriangleMesh:
    return parse_mesh(source, format)[0]


def read_mesh(path: Union[str, Path], format: Union[MeshFormat, str, None] = None) -> TriangleMesh:
    fmt = MeshFormat.from_path(path) if format is None else format
    with open(path, "rb") as f:
        return load_mesh(f, fmt)


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    r = repr(float(x))
    return "0.0" if r == "-0.0" else r


def write_mesh(mesh: TriangleMesh, format: Union[MeshFormat, str]) -> bytes:
    fmt = MeshFormat.coerce(format)
    out = io.StringIO()
    if fmt is MeshFormat.OBJ:
        for x, y, z in mesh.vertices.tolist():
            out.write(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        for a, b, c in (mesh.triangles + 1).tolist():
            out.write(f"f {a} {b} {c}\n")
    else:
        out.write("OFF\n")
        out.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for x, y, z in mesh.vertices.tolist():
            out.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
        for a, b, c in mesh.triangles.tolist():
            out.write(f"3 {a} {b} {c}\n")
    return out.getvalue().encode("ascii")


def save_mesh(mesh: TriangleMesh, path: Union[str, Path], format: Union[MeshFormat, str, None] = None) -> None:
    fmt = MeshFormat.from_path(path) if format is None else format
    Path(path).write_bytes(write_mesh(mesh, fmt))


def normalize(mesh: TriangleMesh) -> tuple[TriangleMesh, NormalizationTransform]:
    """Center the bounding box at the origin and scale its widest axis to [-1, 1]."""
    if mesh.n_vertices == 0:
        raise EmptyMesh("cannot normalize a mesh without vertices")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if not extent > 0.0:
        raise ZeroExtent("all vertices coincide")
    center = 0.5 * (lo + hi)
    t = NormalizationTransform(tuple(float(c) for c in -center), 2.0 / extent)
    v = t.apply(mesh.vertices)
    # pin the widest axis exactly to [-1, 1] against rounding
    axis = int(np.argmax(hi - lo))
    v[mesh.vertices[:, axis] == lo[axis], axis] = -1.0
    v[mesh.vertices[:, axis] == hi[axis], axis] = 1.0
    return TriangleMesh(v, mesh.triangles), t


def denormalize(mesh: TriangleMesh, t: NormalizationTransform) -> TriangleMesh:
    return mesh.with_vertices(t.invert(mesh.vertices))
