"""Indexed triangle meshes and the plain-text mesh format.

The format is the `v`/`vn`/`f` subset of Wavefront OBJ: vertex positions
in patient millimetres, optional per-vertex normals, 1-based face indices
written as `i`, `i//n` or `i/t/n`, and `#` comments.  Faces must be
triangles.  When a file carries no normals they are computed as the
area-weighted average of incident face normals (counter-clockwise winding
points outward).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IndexOutOfRange, MalformedLine, NonTriangleFace

_UNIT_TOL = 1e-4


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle surface in patient millimetres."""

    vertices: np.ndarray    # float64 (nv, 3)
    normals: np.ndarray     # float64 (nv, 3), unit length
    triangles: np.ndarray   # int64 (nt, 3)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if tris.shape[0] < 1:
            raise ValueError("a mesh needs at least one triangle")
        if normals.shape != verts.shape:
            raise ValueError("one normal per vertex required")
        if tris.min(initial=0) < 0 or (tris.size and tris.max() >= verts.shape[0]):
            raise ValueError("triangle index out of range")
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > _UNIT_TOL):
            raise ValueError("normals must be unit length")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "triangles", tris)

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class Appearance:
    """Display name, base color and opacity of one organ surface."""

    name: str
    color: tuple[float, float, float]
    opacity: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("appearance name must be nonempty")
        channels = (*self.color, self.opacity)
        if any(c < 0 or c > 1 for c in channels):
            raise ValueError("color and opacity channels must lie in [0, 1]")
        object.__setattr__(self, "color", tuple(float(c) for c in self.color))
        object.__setattr__(self, "opacity", float(self.opacity))


def _parse_face_token(token: str, line_no: int) -> tuple[int, int | None]:
    parts = token.split("/")
    try:
        vi = int(parts[0])
        ni = None
        if len(parts) == 3 and parts[2] != "":
            ni = int(parts[2])
        elif len(parts) == 2 and parts[1] != "":
            # `i/t` carries a texture index this renderer ignores.
            ni = None
        elif len(parts) > 3:
            raise ValueError
    except ValueError:
        raise MalformedLine(f"line {line_no}: bad face token {token!r}") from None
    return vi, ni


def area_weighted_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Per-vertex normals as the normalized sum of incident face cross products.

    The cross product of two triangle edges has magnitude 2*area, so the
    plain sum is already area weighted.  Faces are accumulated in a
    canonical order so the result is bitwise independent of their order in
    the file.  Vertices with no incident faces (or cancelling faces) fall
    back to +z.
    """
    order = np.lexsort((triangles[:, 2], triangles[:, 1], triangles[:, 0]))
    tris = triangles[order]
    acc = np.zeros_like(vertices)
    a = vertices[tris[:, 0]]
    b = vertices[tris[:, 1]]
    c = vertices[tris[:, 2]]
    face = np.cross(b - a, c - a)
    for corner in range(3):
        np.add.at(acc, tris[:, corner], face)
    lengths = np.linalg.norm(acc, axis=1)
    degenerate = lengths < 1e-12
    acc[degenerate] = (0.0, 0.0, 1.0)
    lengths[degenerate] = 1.0
    return acc / lengths[:, None]


def load_mesh(text: str) -> TriangleMesh:
    """Parse the v/vn/f text format into a TriangleMesh."""
    vertices: list[list[float]] = []
    file_normals: list[list[float]] = []
    faces: list[tuple[tuple[int, int | None], ...]] = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        if kind == "v" or kind == "vn":
            if len(args) != 3:
                raise MalformedLine(f"line {line_no}: {kind} needs 3 coordinates")
            try:
                coords = [float(v) for v in args]
            except ValueError:
                raise MalformedLine(f"line {line_no}: non-numeric coordinate") from None
            (vertices if kind == "v" else file_normals).append(coords)
        elif kind == "f":
            if len(args) != 3:
                raise NonTriangleFace(f"line {line_no}: face has {len(args)} corners, need 3")
            faces.append(tuple(_parse_face_token(tok, line_no) for tok in args))
        else:
            raise MalformedLine(f"line {line_no}: unsupported record {kind!r}")

    nv = len(vertices)
    tris = np.empty((len(faces), 3), dtype=np.int64)
    normal_index: dict[int, int] = {}
    any_face_normal = False
    for fi, face in enumerate(faces):
        for ci, (vi, ni) in enumerate(face):
            if vi < 1 or vi > nv:
                raise IndexOutOfRange(f"face references vertex {vi} of {nv}")
            tris[fi, ci] = vi - 1
            if ni is not None:
                any_face_normal = True
                if ni < 1 or ni > len(file_normals):
                    raise IndexOutOfRange(f"face references normal {ni} of {len(file_normals)}")
                normal_index[vi - 1] = ni - 1

    verts = np.asarray(vertices, dtype=np.float64).reshape(nv, 3)
    if any_face_normal:
        normals = np.zeros((nv, 3), dtype=np.float64)
        missing = np.ones(nv, dtype=bool)
        for vi, ni in normal_index.items():
            normals[vi] = file_normals[ni]
            missing[vi] = False
        if np.any(missing):
            computed = area_weighted_normals(verts, tris)
            normals[missing] = computed[missing]
        lengths = np.linalg.norm(normals, axis=1)
        safe = np.where(lengths < 1e-12, 1.0, lengths)
        normals = normals / safe[:, None]
    else:
        normals = area_weighted_normals(verts, tris)
    return TriangleMesh(vertices=verts, normals=normals, triangles=tris)


def load_mesh_file(path: str | Path) -> TriangleMesh:
    with open(path, "r", encoding="utf-8") as fh:
        return load_mesh(fh.read())
