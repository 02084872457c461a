"""Blinn-Phong shading with a headlight default.

The light direction defaults to the view direction (a headlight), so no
scene-level light configuration is required; every caller may override it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LightingParams:
    ka: float = 0.2
    kd: float = 0.7
    ks: float = 0.3
    shininess: float = 32.0
    gradient_epsilon: float = 0.5   # HU/mm below which volume samples stay unshaded

    def __post_init__(self):
        for name in ("ka", "kd", "ks"):
            value = getattr(self, name)
            if value < 0 or value > 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.shininess > 0:
            raise ValueError("shininess must be positive")
        if self.gradient_epsilon < 0:
            raise ValueError("gradient_epsilon must be >= 0")


def shade_blinn_phong(base, normal, view_dir, light_dir, lp: LightingParams):
    """ka*base + kd*base*max(n.l,0) + ks*max(n.h,0)^shininess, clamped to [0,1].

    All direction arguments must be unit length.  Accepts (3,) vectors or
    (N, 3) batches (base may be (3,) while directions are batched).
    """
    base = np.asarray(base, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    v = np.asarray(view_dir, dtype=np.float64)
    l = np.asarray(light_dir, dtype=np.float64)
    single = n.ndim == 1

    n2 = n.reshape(-1, 3)
    v2 = v.reshape(-1, 3)
    l2 = l.reshape(-1, 3)
    h = l2 + v2
    h_len = np.linalg.norm(h, axis=1, keepdims=True)
    h = np.divide(h, h_len, out=np.zeros_like(h), where=h_len > 1e-12)

    n_dot_l = np.maximum(np.sum(n2 * l2, axis=1), 0.0)
    n_dot_h = np.maximum(np.sum(n2 * h, axis=1), 0.0)
    spec = np.power(n_dot_h, lp.shininess)

    base2 = np.broadcast_to(base.reshape(-1, 3), n2.shape)
    color = (lp.ka * base2
             + lp.kd * base2 * n_dot_l[:, None]
             + lp.ks * spec[:, None])
    color = np.clip(color, 0.0, 1.0)
    return color[0] if single else color
