"""Pinhole camera and stereo rig.

Pixel convention: column i runs left to right, row j top to bottom, and
the ray through pixel (i, j) passes the image plane at

    u = 2*(i + 0.5)/width - 1        (right positive)
    v = 1 - 2*(j + 0.5)/height       (up positive)
    dir = normalize(forward + u * tan(fov/2) * aspect * right
                            + v * tan(fov/2) * up)

so projecting a point back yields pixel-center coordinates (px == i at the
center of column i).  Depth values are camera-space z: the distance along
`forward`, in millimetres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

_BASIS_TOL = 1e-6


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("zero-length direction")
    return v / n


@dataclass(frozen=True)
class Camera:
    eye: np.ndarray                 # mm
    forward: np.ndarray             # unit
    up: np.ndarray                  # unit
    right: np.ndarray               # unit
    vertical_fov: float             # radians, (0, pi)
    width: int
    height: int
    near: float                     # mm
    far: float                      # mm

    def __post_init__(self):
        eye = np.asarray(self.eye, dtype=np.float64).reshape(3)
        f = np.asarray(self.forward, dtype=np.float64).reshape(3)
        u = np.asarray(self.up, dtype=np.float64).reshape(3)
        r = np.asarray(self.right, dtype=np.float64).reshape(3)
        basis = np.stack([r, u, f])
        if not np.allclose(basis @ basis.T, np.eye(3), atol=_BASIS_TOL):
            raise ValueError("camera basis must be orthonormal")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if not (0 < self.vertical_fov < math.pi):
            raise ValueError("vertical_fov must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        object.__setattr__(self, "eye", eye)
        object.__setattr__(self, "forward", f)
        object.__setattr__(self, "up", u)
        object.__setattr__(self, "right", r)

    @classmethod
    def look_at(cls, eye, target, up_hint, *, vertical_fov: float, width: int,
                height: int, near: float = 10.0, far: float = 1e5) -> "Camera":
        eye = np.asarray(eye, dtype=np.float64).reshape(3)
        forward = _unit(np.asarray(target, dtype=np.float64) - eye)
        up_hint = _unit(up_hint)
        right = np.cross(forward, up_hint)
        if np.linalg.norm(right) < 1e-9:
            raise ValueError("up hint is parallel to the view direction")
        right = _unit(right)
        up = np.cross(right, forward)
        return cls(eye=eye, forward=forward, up=up, right=right,
                   vertical_fov=vertical_fov, width=width, height=height,
                   near=near, far=far)

    @property
    def tan_half_fov(self) -> float:
        return math.tan(self.vertical_fov / 2.0)

    @property
    def aspect(self) -> float:
        return self.width / self.height

    @property
    def focal_px(self) -> float:
        """Focal length in pixels: (height/2) / tan(fov/2)."""
        return (self.height / 2.0) / self.tan_half_fov

    def ray_direction(self, i: float, j: float) -> np.ndarray:
        """Unit world direction through pixel (column i, row j)."""
        u = 2.0 * (i + 0.5) / self.width - 1.0
        v = 1.0 - 2.0 * (j + 0.5) / self.height
        d = (self.forward
             + u * self.tan_half_fov * self.aspect * self.right
             + v * self.tan_half_fov * self.up)
        return d / np.linalg.norm(d)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World -> camera coordinates (x right, y up, z forward)."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.eye
        return np.column_stack([p @ self.right, p @ self.up, p @ self.forward])

    def project(self, points: np.ndarray) -> np.ndarray:
        """World -> (px, py, z_cam); valid only where z_cam > 0."""
        cam = self.to_camera(points)
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            x_ndc = cam[:, 0] / (z * self.tan_half_fov * self.aspect)
            y_ndc = cam[:, 1] / (z * self.tan_half_fov)
        px = (x_ndc + 1.0) / 2.0 * self.width - 0.5
        py = (1.0 - y_ndc) / 2.0 * self.height - 0.5
        return np.column_stack([px, py, z])

    def with_size(self, width: int, height: int) -> "Camera":
        return replace(self, width=width, height=height)


@dataclass(frozen=True)
class StereoRig:
    """Center camera plus inter-pupillary distance; eye axes stay parallel."""

    center: Camera
    ipd: float      # mm

    def __post_init__(self):
        if self.ipd < 0:
            raise ValueError("ipd must be >= 0")

    def eye_cameras(self) -> tuple[Camera, Camera]:
        """(left, right): translated by -/+ ipd/2 along `right`, no toe-in."""
        offset = self.center.right * (self.ipd / 2.0)
        left = replace(self.center, eye=self.center.eye - offset)
        right = replace(self.center, eye=self.center.eye + offset)
        return left, right
