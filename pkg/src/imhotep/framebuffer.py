"""Render target: premultiplied RGBA color plus camera-space depth.

Color channels are float64 premultiplied by alpha while a frame is being
built; `to_rgba8` quantizes for export.  Depth holds the camera-space z of
the nearest opaque surface in millimetres, with +inf where nothing opaque
was drawn.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

DEPTH_EMPTY = np.inf


@dataclass
class Framebuffer:
    color: np.ndarray   # float64 (h, w, 4), premultiplied alpha
    depth: np.ndarray   # float64 (h, w), camera z in mm, inf where empty

    def __post_init__(self):
        if self.color.ndim != 3 or self.color.shape[2] != 4:
            raise ValueError("color must be (h, w, 4)")
        if self.depth.shape != self.color.shape[:2]:
            raise ValueError("depth dimensions must match color")

    @classmethod
    def empty(cls, width: int, height: int) -> "Framebuffer":
        if width < 1 or height < 1:
            raise ValueError("framebuffer dimensions must be positive")
        return cls(
            color=np.zeros((height, width, 4), dtype=np.float64),
            depth=np.full((height, width), DEPTH_EMPTY, dtype=np.float64),
        )

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]

    def to_rgba8(self) -> np.ndarray:
        """Quantize to uint8 RGBA, row-major top-to-bottom."""
        return (np.clip(self.color, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.to_rgba8(), mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()

    def save_png(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.png_bytes())
