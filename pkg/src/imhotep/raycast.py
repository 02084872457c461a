"""Front-to-back compositing and the single-ray marching entry point.

`raymarch_pixel` is the scalar form of the compiled whole-frame kernel: it
drives the same code through a one-pixel camera whose only ray is the ray
given, so the two can never drift apart.
"""

from __future__ import annotations

import numpy as np

from ._kernels import EARLY_EXIT_ALPHA, march_image
from .shading import LightingParams
from .transfer import TransferFunction
from .volume import Volume

__all__ = ["EARLY_EXIT_ALPHA", "composite_front_to_back", "raymarch_pixel"]


def composite_front_to_back(samples, early_exit_alpha: float | None = None):
    """Accumulate (rgb, alpha) samples ordered nearest first.

    Returns premultiplied (rgb, alpha).  When `early_exit_alpha` is given,
    compositing stops before a sample once accumulated alpha exceeds it;
    the truncated tail can change the result by at most (1 - threshold)
    per channel.
    """
    color = np.zeros(3, dtype=np.float64)
    alpha = 0.0
    for rgb, a in samples:
        if early_exit_alpha is not None and alpha > early_exit_alpha:
            break
        w = (1.0 - alpha) * a
        color += w * np.asarray(rgb, dtype=np.float64)
        alpha += w
    return color, alpha


def _orthonormal_complement(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    right = np.cross(d, helper)
    right /= np.linalg.norm(right)
    up = np.cross(right, d)
    return right, up


def raymarch_pixel(
    volume: Volume,
    tf: TransferFunction,
    lp: LightingParams,
    ray: tuple[np.ndarray, np.ndarray],
    step: float,
    depth_limit: float = np.inf,
    *,
    opacity_correction: bool = True,
) -> tuple[np.ndarray, float]:
    """March one ray through the volume; returns premultiplied (rgb, alpha).

    `ray` is (origin mm, unit direction) in the volume's space; `step` and
    `depth_limit` are millimetres along the ray.  A ray that misses the
    volume returns the empty composite.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    origin, direction = ray
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    direction = direction / np.linalg.norm(direction)
    right, up = _orthonormal_complement(direction)

    minv = (volume.orientation / volume.spacing).T  # diag(1/spacing) @ orientation.T
    depth = np.full((1, 1), float(depth_limit), dtype=np.float64)
    out = np.empty((1, 1, 4), dtype=np.float64)
    march_image(
        volume.voxels,
        np.ascontiguousarray(minv),
        volume.origin,
        volume.spacing,
        np.ascontiguousarray(volume.orientation),
        np.asarray(origin, dtype=np.float64).reshape(3),
        right, up, direction,
        1.0, 1.0,
        1, 1,
        depth,
        1.0,
        0.0,
        tf.values, tf.rgba,
        tf.reference_step, float(step),
        lp.ka, lp.kd, lp.ks, lp.shininess, lp.gradient_epsilon,
        opacity_correction,
        EARLY_EXIT_ALPHA,
        out,
    )
    return out[0, 0, :3].copy(), float(out[0, 0, 3])
