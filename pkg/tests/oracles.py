"""Independent brute-force oracles shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np


def pick_oracle(instances, origin, direction):
    """All-triangles ray intersection sweep.

    Same accept rules as the production picker (|det| > 1e-12, inclusive
    barycentric bounds, t > 1e-9, ties to lower mesh id then triangle
    index) but evaluated one triangle at a time in plain Python.
    Returns (t, mesh_id, triangle_index) or None.
    """
    best = None
    for mesh_id, mesh, transform in instances:
        inv = np.linalg.inv(np.asarray(transform, dtype=np.float64))
        o = inv[:3, :3] @ origin + inv[:3, 3]
        d = inv[:3, :3] @ direction
        for tri_idx, (ia, ib, ic) in enumerate(mesh.triangles):
            v0, v1, v2 = mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]
            e1, e2 = v1 - v0, v2 - v0
            px = d[1] * e2[2] - d[2] * e2[1]
            py = d[2] * e2[0] - d[0] * e2[2]
            pz = d[0] * e2[1] - d[1] * e2[0]
            det = e1[0] * px + e1[1] * py + e1[2] * pz
            if abs(det) <= 1e-12:
                continue
            inv_det = 1.0 / det
            tv = o - v0
            u = (tv[0] * px + tv[1] * py + tv[2] * pz) * inv_det
            qx = tv[1] * e1[2] - tv[2] * e1[1]
            qy = tv[2] * e1[0] - tv[0] * e1[2]
            qz = tv[0] * e1[1] - tv[1] * e1[0]
            v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv_det
            t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv_det
            if u < 0.0 or v < 0.0 or u + v > 1.0 or t <= 1e-9:
                continue
            key = (t, mesh_id, tri_idx)
            if best is None or key < best:
                best = key
    return best


def rects_overlap(a, b) -> bool:
    """Strict-interior overlap of two (x0, y0, x1, y1) rectangles."""
    return not (a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1])


def any_label_overlap(placements) -> bool:
    """Pairwise sweep over placed label rectangles (None = off screen)."""
    rects = [p.rect for p in placements if p.rect is not None]
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if rects_overlap(rects[i], rects[j]):
                return True
    return False
