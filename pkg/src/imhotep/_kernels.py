"""Compiled per-pixel volume ray-marching kernel.

The kernel works entirely in the volume's own (patient) space; callers
convert camera geometry and depth limits into that space.  Marching
semantics, shared verbatim with `raycast.raymarch_pixel`:

  * rays are clipped to the box of voxel centers, to t >= t_near and to
    the per-pixel depth limit,
  * samples sit at t = t_entry + (k + 0.5) * step, k = 0..K-1 with
    K = max(0, ceil(span / step - 0.5)),
  * marching stops before a sample once accumulated alpha exceeds
    `early_exit` (0.99 in production),
  * per sample: trilinear value -> transfer-function RGBA -> opacity
    correction -> Blinn-Phong headlight shading when the central-difference
    gradient exists (one-voxel interior margin) and its magnitude exceeds
    the threshold, ambient-only otherwise -> front-to-back premultiplied
    compositing.

Pixels are fully independent, so the parallel row loop is deterministic
for any thread count.
"""

from __future__ import annotations

import math
import os

# Coarse row-parallel loops need no work stealing; workqueue is the layer
# that exists everywhere.  Respect an explicit override from the caller.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
from numba import njit, prange

EARLY_EXIT_ALPHA = 0.99


@njit(cache=True, inline="always")
def _trilinear(vox, nx, ny, nz, x, y, z):
    # Clamp to the domain of voxel centers; callers already clip rays and
    # clamping only absorbs float noise at the faces.
    if x < 0.0:
        x = 0.0
    elif x > nx - 1.0:
        x = nx - 1.0
    if y < 0.0:
        y = 0.0
    elif y > ny - 1.0:
        y = ny - 1.0
    if z < 0.0:
        z = 0.0
    elif z > nz - 1.0:
        z = nz - 1.0
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    z0 = int(math.floor(z))
    if x0 > nx - 2:
        x0 = nx - 2
    if y0 > ny - 2:
        y0 = ny - 2
    if z0 > nz - 2:
        z0 = nz - 2
    if x0 < 0:
        x0 = 0
    if y0 < 0:
        y0 = 0
    if z0 < 0:
        z0 = 0
    x1 = x0 + 1 if x0 + 1 <= nx - 1 else x0
    y1 = y0 + 1 if y0 + 1 <= ny - 1 else y0
    z1 = z0 + 1 if z0 + 1 <= nz - 1 else z0
    fx = x - x0
    fy = y - y0
    fz = z - z0

    c000 = vox[z0, y0, x0]
    c100 = vox[z0, y0, x1]
    c010 = vox[z0, y1, x0]
    c110 = vox[z0, y1, x1]
    c001 = vox[z1, y0, x0]
    c101 = vox[z1, y0, x1]
    c011 = vox[z1, y1, x0]
    c111 = vox[z1, y1, x1]

    c00 = c000 * (1.0 - fx) + c100 * fx
    c10 = c010 * (1.0 - fx) + c110 * fx
    c01 = c001 * (1.0 - fx) + c101 * fx
    c11 = c011 * (1.0 - fx) + c111 * fx
    c0 = c00 * (1.0 - fy) + c10 * fy
    c1 = c01 * (1.0 - fy) + c11 * fy
    return c0 * (1.0 - fz) + c1 * fz


@njit(cache=True, inline="always")
def _tf_lookup(tf_values, tf_rgba, s, out4):
    n = tf_values.shape[0]
    if s <= tf_values[0]:
        for c in range(4):
            out4[c] = tf_rgba[0, c]
        return
    if s >= tf_values[n - 1]:
        for c in range(4):
            out4[c] = tf_rgba[n - 1, c]
        return
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tf_values[mid] <= s:
            lo = mid
        else:
            hi = mid
    f = (s - tf_values[lo]) / (tf_values[hi] - tf_values[lo])
    for c in range(4):
        out4[c] = tf_rgba[lo, c] * (1.0 - f) + tf_rgba[hi, c] * f


@njit(cache=True, parallel=True)
def march_image(
    vox,                    # int16 (nz, ny, nx)
    minv,                   # float64 (3,3): index = minv @ (p - origin)
    origin,                 # float64 (3,)
    spacing,                # float64 (3,)
    orient,                 # float64 (3,3): columns are grid axis directions
    eye,                    # float64 (3,), volume space
    right, up, forward,     # float64 (3,), unit
    tan_half, aspect,       # float64
    width, height,          # int64
    depth_z,                # float64 (h, w): camera-z limit in caller mm (inf = none)
    conv_scale,             # float64: caller mm per volume mm along a ray
    near_mm,                # float64: near plane, caller mm
    tf_values, tf_rgba,     # float64 (n,), (n, 4)
    ref_step, step,         # float64, volume mm
    ka, kd, ks, shininess, grad_eps,
    use_correction,         # bool
    early_exit,             # float64 (>1 disables)
    out,                    # float64 (h, w, 4), premultiplied RGBA
):
    nz, ny, nx = vox.shape
    alpha_exp = step / ref_step
    need_shading = (kd > 0.0) or (ks > 0.0)

    for j in prange(height):
        for i in range(width):
            u = 2.0 * (i + 0.5) / width - 1.0
            v = 1.0 - 2.0 * (j + 0.5) / height
            dx = forward[0] + u * tan_half * aspect * right[0] + v * tan_half * up[0]
            dy = forward[1] + u * tan_half * aspect * right[1] + v * tan_half * up[1]
            dz = forward[2] + u * tan_half * aspect * right[2] + v * tan_half * up[2]
            dlen = math.sqrt(dx * dx + dy * dy + dz * dz)
            dx /= dlen
            dy /= dlen
            dz /= dlen
            cos_f = dx * forward[0] + dy * forward[1] + dz * forward[2]

            t0 = near_mm / (cos_f * conv_scale)
            if t0 < 0.0:
                t0 = 0.0
            limit = depth_z[j, i]
            t1 = np.inf if limit == np.inf else limit / (cos_f * conv_scale)

            # Ray in fractional-index space.
            rx = eye[0] - origin[0]
            ry = eye[1] - origin[1]
            rz = eye[2] - origin[2]
            ox = minv[0, 0] * rx + minv[0, 1] * ry + minv[0, 2] * rz
            oy = minv[1, 0] * rx + minv[1, 1] * ry + minv[1, 2] * rz
            oz = minv[2, 0] * rx + minv[2, 1] * ry + minv[2, 2] * rz
            dix = minv[0, 0] * dx + minv[0, 1] * dy + minv[0, 2] * dz
            diy = minv[1, 0] * dx + minv[1, 1] * dy + minv[1, 2] * dz
            diz = minv[2, 0] * dx + minv[2, 1] * dy + minv[2, 2] * dz

            miss = False
            for axis in range(3):
                if axis == 0:
                    o_a, d_a, hi_a = ox, dix, nx - 1.0
                elif axis == 1:
                    o_a, d_a, hi_a = oy, diy, ny - 1.0
                else:
                    o_a, d_a, hi_a = oz, diz, nz - 1.0
                if abs(d_a) < 1e-12:
                    if o_a < 0.0 or o_a > hi_a:
                        miss = True
                        break
                else:
                    ta = (0.0 - o_a) / d_a
                    tb = (hi_a - o_a) / d_a
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > t0:
                        t0 = ta
                    if tb < t1:
                        t1 = tb
            out[j, i, 0] = 0.0
            out[j, i, 1] = 0.0
            out[j, i, 2] = 0.0
            out[j, i, 3] = 0.0
            if miss or not (t1 > t0):
                continue

            span = t1 - t0
            count = int(math.ceil(span / step - 0.5))
            if count < 0:
                count = 0

            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            acc_a = 0.0
            rgba = np.empty(4, dtype=np.float64)
            for k in range(count):
                if acc_a > early_exit:
                    break
                t = t0 + (k + 0.5) * step
                px = ox + t * dix
                py = oy + t * diy
                pz = oz + t * diz
                s = _trilinear(vox, nx, ny, nz, px, py, pz)
                _tf_lookup(tf_values, tf_rgba, s, rgba)
                a = rgba[3]
                if use_correction:
                    a = 1.0 - (1.0 - a) ** alpha_exp
                if a <= 0.0:
                    continue

                sh_r = ka * rgba[0]
                sh_g = ka * rgba[1]
                sh_b = ka * rgba[2]
                if need_shading:
                    interior = (
                        px >= 1.0 and px <= nx - 2.0
                        and py >= 1.0 and py <= ny - 2.0
                        and pz >= 1.0 and pz <= nz - 2.0
                    )
                    if interior:
                        ggx = (_trilinear(vox, nx, ny, nz, px + 1.0, py, pz)
                               - _trilinear(vox, nx, ny, nz, px - 1.0, py, pz)) / (2.0 * spacing[0])
                        ggy = (_trilinear(vox, nx, ny, nz, px, py + 1.0, pz)
                               - _trilinear(vox, nx, ny, nz, px, py - 1.0, pz)) / (2.0 * spacing[1])
                        ggz = (_trilinear(vox, nx, ny, nz, px, py, pz + 1.0)
                               - _trilinear(vox, nx, ny, nz, px, py, pz - 1.0)) / (2.0 * spacing[2])
                        gwx = orient[0, 0] * ggx + orient[0, 1] * ggy + orient[0, 2] * ggz
                        gwy = orient[1, 0] * ggx + orient[1, 1] * ggy + orient[1, 2] * ggz
                        gwz = orient[2, 0] * ggx + orient[2, 1] * ggy + orient[2, 2] * ggz
                        mag = math.sqrt(gwx * gwx + gwy * gwy + gwz * gwz)
                        if mag > grad_eps:
                            nrm_x = -gwx / mag
                            nrm_y = -gwy / mag
                            nrm_z = -gwz / mag
                            # Headlight: l == v == -d, so n.h == n.l.
                            ndl = -(nrm_x * dx + nrm_y * dy + nrm_z * dz)
                            if ndl < 0.0:
                                ndl = 0.0
                            spec = ndl ** shininess
                            sh_r = ka * rgba[0] + kd * rgba[0] * ndl + ks * spec
                            sh_g = ka * rgba[1] + kd * rgba[1] * ndl + ks * spec
                            sh_b = ka * rgba[2] + kd * rgba[2] * ndl + ks * spec
                            if sh_r > 1.0:
                                sh_r = 1.0
                            if sh_g > 1.0:
                                sh_g = 1.0
                            if sh_b > 1.0:
                                sh_b = 1.0

                w = (1.0 - acc_a) * a
                acc_r += w * sh_r
                acc_g += w * sh_g
                acc_b += w * sh_b
                acc_a += w

            out[j, i, 0] = acc_r
            out[j, i, 1] = acc_g
            out[j, i, 2] = acc_b
            out[j, i, 3] = acc_a
