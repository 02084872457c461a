"""Software triangle rasterization with transparency.

Opaque surfaces draw with a depth test and perspective-correct vertex
normals; translucent surfaces draw afterwards, object-sorted back to front
by transformed centroid depth, blended over without writing depth.  The
object-level sort is an approximation: intersecting translucent organs can
blend in the wrong order locally.  Shared translucent edges may blend
twice along the seam (inclusive edge rule).
"""

from __future__ import annotations

import numpy as np

from .camera import Camera
from .errors import DegenerateTransform
from .framebuffer import Framebuffer
from .mesh import Appearance, TriangleMesh
from .shading import LightingParams, shade_blinn_phong

_AREA_EPS = 1e-12


def _apply_transform(mesh: TriangleMesh, transform: np.ndarray):
    m = np.asarray(transform, dtype=np.float64)
    if m.shape != (4, 4):
        raise ValueError("model transform must be 4x4")
    linear = m[:3, :3]
    det = np.linalg.det(linear)
    if abs(det) < 1e-12:
        raise DegenerateTransform(f"model matrix determinant {det:.3e}")
    verts = mesh.vertices @ linear.T + m[:3, 3]
    normal_mat = np.linalg.inv(linear).T
    normals = mesh.normals @ normal_mat.T
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(lengths < 1e-12, 1.0, lengths)
    return verts, normals


def _clip_near(tri_cam, tri_world, tri_normal, near: float):
    """Sutherland-Hodgman clip of one triangle against z_cam == near.

    Returns lists of camera-space vertices and interpolated attributes;
    the polygon is then fan-triangulated by the caller.
    """
    out_cam, out_world, out_normal = [], [], []
    for k in range(3):
        a_cam, b_cam = tri_cam[k], tri_cam[(k + 1) % 3]
        a_wld, b_wld = tri_world[k], tri_world[(k + 1) % 3]
        a_nrm, b_nrm = tri_normal[k], tri_normal[(k + 1) % 3]
        a_in = a_cam[2] >= near
        b_in = b_cam[2] >= near
        if a_in:
            out_cam.append(a_cam)
            out_world.append(a_wld)
            out_normal.append(a_nrm)
        if a_in != b_in:
            f = (near - a_cam[2]) / (b_cam[2] - a_cam[2])
            out_cam.append(a_cam + f * (b_cam - a_cam))
            out_world.append(a_wld + f * (b_wld - a_wld))
            out_normal.append(a_nrm + f * (b_nrm - a_nrm))
    return out_cam, out_world, out_normal


def _project_cam(cam: Camera, pts_cam: np.ndarray) -> np.ndarray:
    z = pts_cam[:, 2]
    x_ndc = pts_cam[:, 0] / (z * cam.tan_half_fov * cam.aspect)
    y_ndc = pts_cam[:, 1] / (z * cam.tan_half_fov)
    px = (x_ndc + 1.0) / 2.0 * cam.width - 0.5
    py = (1.0 - y_ndc) / 2.0 * cam.height - 0.5
    return np.column_stack([px, py, z])


def _raster_triangle(fb: Framebuffer, cam: Camera, lighting: LightingParams,
                     pts_px, world, normals, color, opacity: float, write_depth: bool):
    (x0, y0, z0), (x1, y1, z1), (x2, y2, z2) = pts_px
    min_x = max(0, int(np.ceil(min(x0, x1, x2))))
    max_x = min(cam.width - 1, int(np.floor(max(x0, x1, x2))))
    min_y = max(0, int(np.ceil(min(y0, y1, y2))))
    max_y = min(cam.height - 1, int(np.floor(max(y0, y1, y2))))
    if min_x > max_x or min_y > max_y:
        return
    area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if abs(area2) < _AREA_EPS:
        return

    xs = np.arange(min_x, max_x + 1, dtype=np.float64)
    ys = np.arange(min_y, max_y + 1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    w0 = ((x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)) / area2
    w1 = ((x0 - x2) * (gy - y2) - (y0 - y2) * (gx - x2)) / area2
    w2 = 1.0 - w0 - w1
    inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
    if not inside.any():
        return

    # Perspective-correct interpolation via 1/z weights.
    iw0 = w0 / z0
    iw1 = w1 / z1
    iw2 = w2 / z2
    denom = iw0 + iw1 + iw2
    z = 1.0 / denom

    tile_depth = fb.depth[min_y:max_y + 1, min_x:max_x + 1]
    if write_depth:
        visible = inside & (z < tile_depth) & (z <= cam.far)
    else:
        visible = inside & (z <= tile_depth) & (z <= cam.far)
    if not visible.any():
        return

    vw0 = iw0[visible]
    vw1 = iw1[visible]
    vw2 = iw2[visible]
    vdenom = denom[visible]
    pos = (vw0[:, None] * world[0] + vw1[:, None] * world[1] + vw2[:, None] * world[2]) / vdenom[:, None]
    nrm = (vw0[:, None] * normals[0] + vw1[:, None] * normals[1] + vw2[:, None] * normals[2]) / vdenom[:, None]
    lengths = np.linalg.norm(nrm, axis=1, keepdims=True)
    nrm = nrm / np.where(lengths < 1e-12, 1.0, lengths)

    view = cam.eye - pos
    view_len = np.linalg.norm(view, axis=1, keepdims=True)
    view = view / np.where(view_len < 1e-12, 1.0, view_len)
    # Two-sided: organ meshes have arbitrary winding, so face the viewer.
    facing = np.sum(nrm * view, axis=1) < 0
    nrm[facing] = -nrm[facing]

    shaded = shade_blinn_phong(np.asarray(color, dtype=np.float64), nrm, view, view, lighting)

    tile_color = fb.color[min_y:max_y + 1, min_x:max_x + 1]
    if write_depth:
        tile_color[visible] = np.column_stack([shaded, np.ones(len(shaded))])
        tile_depth[visible] = z[visible]
    else:
        dst = tile_color[visible]
        src = np.column_stack([shaded * opacity, np.full(len(shaded), opacity)])
        tile_color[visible] = src + (1.0 - opacity) * dst


def _raster_mesh(fb: Framebuffer, cam: Camera, lighting: LightingParams,
                 mesh: TriangleMesh, appearance: Appearance, transform: np.ndarray,
                 opacity: float, write_depth: bool):
    verts_world, vert_normals = _apply_transform(mesh, transform)
    verts_cam = cam.to_camera(verts_world)
    for tri in mesh.triangles:
        tri_cam = verts_cam[tri]
        if np.all(tri_cam[:, 2] < cam.near):
            continue
        if np.any(tri_cam[:, 2] < cam.near):
            poly_cam, poly_world, poly_normal = _clip_near(
                tri_cam, verts_world[tri], vert_normals[tri], cam.near)
            if len(poly_cam) < 3:
                continue
            fans = [(0, k, k + 1) for k in range(1, len(poly_cam) - 1)]
            for a, b, c in fans:
                sub_cam = np.stack([poly_cam[a], poly_cam[b], poly_cam[c]])
                pts = _project_cam(cam, sub_cam)
                _raster_triangle(fb, cam, lighting, pts,
                                 [poly_world[a], poly_world[b], poly_world[c]],
                                 [poly_normal[a], poly_normal[b], poly_normal[c]],
                                 appearance.color, opacity, write_depth)
        else:
            pts = _project_cam(cam, tri_cam)
            _raster_triangle(fb, cam, lighting, pts,
                             list(verts_world[tri]), list(vert_normals[tri]),
                             appearance.color, opacity, write_depth)


def raster_opaque_pass(fb: Framebuffer, instances, cam: Camera, lighting: LightingParams):
    """instances: iterable of (mesh, appearance, transform, effective_opacity)."""
    for mesh, appearance, transform, opacity in instances:
        _raster_mesh(fb, cam, lighting, mesh, appearance, transform, opacity, True)


def raster_translucent_pass(fb: Framebuffer, instances, cam: Camera, lighting: LightingParams):
    """Blend translucent meshes back-to-front by transformed centroid depth."""
    keyed = []
    for order, (mesh, appearance, transform, opacity) in enumerate(instances):
        verts_world, _ = _apply_transform(mesh, transform)
        centroid_z = float(cam.to_camera(verts_world.mean(axis=0)[None, :])[0, 2])
        keyed.append((-centroid_z, order, mesh, appearance, transform, opacity))
    keyed.sort(key=lambda item: (item[0], item[1]))
    for _, _, mesh, appearance, transform, opacity in keyed:
        _raster_mesh(fb, cam, lighting, mesh, appearance, transform, opacity, False)


def split_by_opacity(instances):
    """Partition (mesh, appearance, transform, opacity) by opaque/translucent."""
    opaque, translucent = [], []
    for item in instances:
        opacity = item[3]
        if opacity >= 1.0:
            opaque.append(item)
        elif opacity > 0.0:
            translucent.append(item)
    return opaque, translucent


def rasterize_meshes(meshes, cam: Camera,
                     lighting: LightingParams | None = None) -> Framebuffer:
    """Render (mesh, appearance, transform) triples into a fresh framebuffer.

    Opaque meshes draw first with depth writes; translucent ones blend over
    afterwards.  The depth buffer holds opaque-surface distances only.
    """
    lighting = lighting or LightingParams()
    fb = Framebuffer.empty(cam.width, cam.height)
    full = [(m, a, np.asarray(t, dtype=np.float64), a.opacity) for (m, a, t) in meshes]
    opaque, translucent = split_by_opacity(full)
    raster_opaque_pass(fb, opaque, cam, lighting)
    raster_translucent_pass(fb, translucent, cam, lighting)
    return fb
