"""Shared fixture builders: meshes, patient directories, synthetic volumes."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from dicom_writer import make_series

from imhotep.mesh import TriangleMesh, area_weighted_normals


def make_icosphere(radius: float = 50.0, center=(0.0, 0.0, 0.0),
                   subdivisions: int = 1, bump_seed: int | None = None) -> TriangleMesh:
    """Subdivided icosahedron; optionally radially perturbed (organ-ish blob)."""
    phi = (1 + math.sqrt(5)) / 2
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        new_faces = []

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = np.asarray(verts[a]) + np.asarray(verts[b])
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    pts = np.asarray(verts, dtype=np.float64)
    radii = np.full(len(pts), float(radius))
    if bump_seed is not None:
        rng = np.random.RandomState(bump_seed)
        radii *= 1.0 + 0.15 * rng.uniform(-1, 1, size=len(pts))
    pts = pts * radii[:, None] + np.asarray(center, dtype=np.float64)
    tris = np.asarray(faces, dtype=np.int64)
    return TriangleMesh(vertices=pts, normals=area_weighted_normals(pts, tris), triangles=tris)


def mesh_to_obj(mesh: TriangleMesh, with_normals: bool = False) -> str:
    lines = ["# fixture mesh"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if with_normals:
        for n in mesh.normals:
            lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1}//{t[0]+1} {t[1]+1}//{t[1]+1} {t[2]+1}//{t[2]+1}")
    else:
        for t in mesh.triangles:
            lines.append(f"f {t[0]+1} {t[1]+1} {t[2]+1}")
    return "\n".join(lines) + "\n"


def tiny_png_bytes() -> bytes:
    from PIL import Image
    import io
    buf = io.BytesIO()
    Image.new("RGBA", (4, 4), (200, 30, 30, 255)).save(buf, format="PNG")
    return buf.getvalue()


def build_patient_dir(root: Path, *, with_volume: bool = True,
                      n_meshes: int = 3, with_record: bool = True,
                      with_annotations: bool = True,
                      with_transfer: bool = True) -> Path:
    """Write a complete patient directory fixture under `root`."""
    root.mkdir(parents=True, exist_ok=True)
    meshes_dir = root / "meshes"
    meshes_dir.mkdir(exist_ok=True)

    names = ["Liver", "Tumor", "Hepatic Vein", "Portal Vein", "Bile Duct"]
    colors = [(0.55, 0.27, 0.07), (0.95, 0.85, 0.1), (0.2, 0.3, 0.8),
              (0.8, 0.2, 0.3), (0.2, 0.8, 0.3)]
    opacities = [1.0, 0.9, 0.6, 1.0, 0.5]
    manifest = []
    for i in range(n_meshes):
        mesh = make_icosphere(radius=40.0 - 8 * i, center=(12.0 * i, -6.0 * i, 9.0 * i),
                              subdivisions=1, bump_seed=10 + i)
        fname = f"organ_{i}.obj"
        (meshes_dir / fname).write_text(mesh_to_obj(mesh), encoding="utf-8")
        manifest.append({
            "file": fname,
            "name": names[i % len(names)],
            "color": list(colors[i % len(colors)]),
            "opacity": opacities[i % len(opacities)],
        })
    (meshes_dir / "meshes.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")

    if with_volume:
        dicom_dir = root / "dicom"
        dicom_dir.mkdir(exist_ok=True)
        files, _ = make_series(shape=(6, 16, 16), origin=(-40.0, -40.0, -25.0),
                               pixel_spacing=(5.0, 5.0), slice_step=10.0, seed=7)
        for k, blob in enumerate(files):
            (dicom_dir / f"slice_{k:03d}.dcm").write_bytes(blob)

    if with_record:
        images_dir = root / "images"
        images_dir.mkdir(exist_ok=True)
        (images_dir / "axial_overview.png").write_bytes(tiny_png_bytes())
        record = {
            "name": "Test Patient",
            "age": "63",
            "sex": "F",
            "diagnosis": "Hepatocellular carcinoma, segment IVa",
            "notes_html": "<b>Programme:</b> <span style='color:red'>resection</span>",
            "labs": [
                {"name": "Bilirubin", "value": "1.1", "unit": "mg/dL",
                 "timestamp": "2024-05-02T08:00:00"},
                {"name": "INR", "value": "1.0", "unit": "",
                 "timestamp": "2024-05-02T08:00:00"},
            ],
            "images": [
                {"file": "images/axial_overview.png", "caption": "Axial overview",
                 "slot": "image.0"},
            ],
        }
        (root / "patient.json").write_text(json.dumps(record, indent=1), encoding="utf-8")

    if with_annotations:
        annotations = [
            {"id": 1, "position": [10.0, -5.0, 4.0], "normal": [0.0, 0.0, 1.0],
             "text": "tumor margin"},
            {"id": 2, "position": [-14.0, 8.0, -6.0], "normal": [1.0, 0.0, 0.0],
             "text": "vessel branch"},
        ]
        (root / "annotations.json").write_text(json.dumps(annotations), encoding="utf-8")

    if with_transfer:
        transfer = {
            "reference_step_mm": 1.0,
            "points": [
                {"value": -1000, "rgba": [0, 0, 0, 0]},
                {"value": 0, "rgba": [0.4, 0.1, 0.1, 0.02]},
                {"value": 800, "rgba": [0.9, 0.9, 0.8, 0.5]},
            ],
        }
        (root / "transfer.json").write_text(json.dumps(transfer), encoding="utf-8")
    return root


def random_volume(seed: int, dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0),
                  origin=(0.0, 0.0, 0.0), orientation=None):
    from imhotep.volume import Volume
    rng = np.random.RandomState(seed)
    nx, ny, nz = dims
    vox = rng.randint(-1000, 1500, size=(nz, ny, nx)).astype(np.int16)
    return Volume(voxels=vox, spacing=spacing, origin=origin,
                  orientation=np.eye(3) if orientation is None else orientation)


def random_transfer(seed: int):
    from imhotep.transfer import TransferFunction
    rng = np.random.RandomState(seed)
    n = rng.randint(3, 6)
    values = np.sort(rng.uniform(-1100, 1600, size=n))
    while np.any(np.diff(values) < 1e-3):
        values = np.sort(rng.uniform(-1100, 1600, size=n))
    rgba = rng.uniform(0, 1, size=(n, 4))
    rgba[:, 3] = rng.uniform(0.0, 0.6, size=n)
    return TransferFunction(values=values, rgba=rgba,
                            reference_step=float(rng.uniform(0.5, 2.0)))
