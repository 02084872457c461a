"""Mesh text-format loading and computed normals."""

from __future__ import annotations

import numpy as np
import pytest

from fixtures import make_icosphere, mesh_to_obj

from imhotep.errors import IndexOutOfRange, MalformedLine, NonTriangleFace
from imhotep.mesh import load_mesh

RIGHT_TRIANGLE = """
# flat right triangle, counter-clockwise in the z=0 plane
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
"""

TETRAHEDRON = """
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 3 2
f 1 2 4
f 1 4 3
f 2 3 4
"""


def test_planar_triangle_normals_point_up():
    mesh = load_mesh(RIGHT_TRIANGLE)
    assert mesh.triangle_count == 1
    assert np.allclose(mesh.normals, [[0, 0, 1]] * 3)


def test_vertex_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n")


def test_quad_rejected():
    with pytest.raises(NonTriangleFace):
        load_mesh("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")


def test_malformed_lines():
    with pytest.raises(MalformedLine):
        load_mesh("v 0 0\nf 1 2 3\n")
    with pytest.raises(MalformedLine):
        load_mesh("vx 0 0 0\n")
    with pytest.raises(MalformedLine):
        load_mesh("v 0 0 zero\nf 1 1 1\n")


def _face_average_normals(vertices, triangles):
    """Independent oracle: accumulate raw cross products, then normalize."""
    acc = np.zeros_like(vertices)
    for a, b, c in triangles:
        face = np.cross(vertices[b] - vertices[a], vertices[c] - vertices[a])
        for v in (a, b, c):
            acc[v] += face
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)


def test_tetrahedron_normals_match_face_average_oracle():
    mesh = load_mesh(TETRAHEDRON)
    assert mesh.vertices.shape == (4, 3)
    assert mesh.triangle_count == 4
    assert np.allclose(np.linalg.norm(mesh.normals, axis=1), 1.0, atol=1e-6)
    oracle = _face_average_normals(mesh.vertices, mesh.triangles.tolist())
    assert np.allclose(mesh.normals, oracle, atol=1e-12)


def test_explicit_normals_used_verbatim():
    text = (
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "vn 0 0 -1\nvn 0 0 -1\nvn 0 0 -1\n"
        "f 1//1 2//2 3//3\n"
    )
    mesh = load_mesh(text)
    assert np.allclose(mesh.normals, [[0, 0, -1]] * 3)


def test_normals_invariant_under_face_reordering():
    sphere = make_icosphere(radius=10.0, subdivisions=1, bump_seed=3)
    text = mesh_to_obj(sphere)
    lines = text.strip().splitlines()
    verts = [l for l in lines if l.startswith("v ")]
    faces = [l for l in lines if l.startswith("f ")]
    forward = load_mesh("\n".join(verts + faces))
    backward = load_mesh("\n".join(verts + faces[::-1]))
    assert np.array_equal(forward.normals, backward.normals)
    assert np.allclose(np.linalg.norm(forward.normals, axis=1), 1.0, atol=1e-6)


def test_comments_and_blank_lines_ignored():
    mesh = load_mesh("# header\n\nv 0 0 0\nv 1 0 0 # inline\nv 0 1 0\n\nf 1 2 3\n")
    assert mesh.triangle_count == 1
