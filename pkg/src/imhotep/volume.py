"""Scalar volume in Hounsfield units plus continuous reconstruction.

Voxels are stored as a C-contiguous int16 array indexed [z, y, x]
(x-fastest layout).  World positions are patient millimetres; the mapping
between world and fractional voxel index is

    world = origin + orientation @ (index * spacing)

where `orientation` columns are the direction cosines of the x/y/z grid
axes.  The interpolation domain is the box of voxel centers,
[0, nx-1] x [0, ny-1] x [0, nz-1] in index coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Volume:
    """3D scalar grid with spacing, origin and orientation."""

    voxels: np.ndarray          # int16, shape (nz, ny, nx)
    spacing: np.ndarray         # float64 (sx, sy, sz), mm
    origin: np.ndarray          # float64 (3,), patient mm of voxel (0,0,0)
    orientation: np.ndarray     # float64 (3,3), columns = grid axis directions

    def __post_init__(self):
        vox = np.ascontiguousarray(self.voxels, dtype=np.int16)
        spacing = np.asarray(self.spacing, dtype=np.float64).reshape(3)
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        orient = np.asarray(self.orientation, dtype=np.float64).reshape(3, 3)
        if vox.ndim != 3 or min(vox.shape) < 1:
            raise ValueError(f"voxel array must be 3D and non-empty, got shape {vox.shape}")
        if not np.all(spacing > 0):
            raise ValueError(f"spacing must be positive, got {spacing}")
        if not np.allclose(orient.T @ orient, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("orientation columns must be orthonormal")
        object.__setattr__(self, "voxels", vox)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "orientation", orient)

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz)."""
        nz, ny, nx = self.voxels.shape
        return nx, ny, nz

    @property
    def voxel_count(self) -> int:
        return int(self.voxels.size)

    def world_to_index(self, points: np.ndarray) -> np.ndarray:
        """Map world mm to fractional voxel indices (no bounds check)."""
        p = np.asarray(points, dtype=np.float64)
        rel = (p.reshape(-1, 3) - self.origin) @ self.orientation  # == orientation.T @ rel
        idx = rel / self.spacing
        return idx.reshape(p.shape)

    def index_to_world(self, indices: np.ndarray) -> np.ndarray:
        """Map fractional voxel indices to world mm."""
        i = np.asarray(indices, dtype=np.float64)
        rel = i.reshape(-1, 3) * self.spacing
        world = rel @ self.orientation.T + self.origin
        return world.reshape(i.shape)

    def corners_world(self) -> np.ndarray:
        """The 8 corners of the interpolation domain, world mm, shape (8, 3)."""
        nx, ny, nz = self.dims
        ix = np.array([0, nx - 1], dtype=np.float64)
        iy = np.array([0, ny - 1], dtype=np.float64)
        iz = np.array([0, nz - 1], dtype=np.float64)
        grid = np.stack(np.meshgrid(ix, iy, iz, indexing="ij"), axis=-1).reshape(8, 3)
        return self.index_to_world(grid)

    def scaled(self, scale: float, offset: np.ndarray) -> "Volume":
        """The same grid placed at `scale * world + offset` (uniform similarity)."""
        return Volume(
            voxels=self.voxels,
            spacing=self.spacing * scale,
            origin=self.origin * scale + np.asarray(offset, dtype=np.float64),
            orientation=self.orientation,
        )


@dataclass(frozen=True)
class GradientSample:
    """World-space scalar gradient in HU/mm."""

    g: np.ndarray          # float64 (3,)
    magnitude: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64).reshape(3)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "magnitude", float(self.magnitude))


def _interp_weights(idx: np.ndarray, n: tuple[int, int, int]):
    """Lower cell corner and per-axis fractions for trilinear interpolation."""
    nx, ny, nz = n
    dims = np.array([nx, ny, nz], dtype=np.float64)
    i0 = np.floor(idx).astype(np.int64)
    # At the exact upper face, step back one cell so i0+1 stays valid.
    i0 = np.minimum(i0, (dims - 2).astype(np.int64))
    i0 = np.maximum(i0, 0)
    frac = idx - i0
    i1 = np.minimum(i0 + 1, (dims - 1).astype(np.int64))
    return i0, i1, frac


def sample_trilinear(volume: Volume, points: np.ndarray):
    """Trilinear sample of the volume at world-mm positions.

    Accepts a single (3,) point or an (N, 3) batch; returns a float or an
    (N,) float64 array.  Raises OutOfBounds if any point leaves the domain
    of voxel centers; rays must be clipped by the caller.
    """
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    idx = volume.world_to_index(p).reshape(-1, 3)
    nx, ny, nz = volume.dims
    hi = np.array([nx - 1, ny - 1, nz - 1], dtype=np.float64)
    if np.any(idx < -1e-9) or np.any(idx > hi + 1e-9):
        raise OutOfBounds(f"sample position outside volume domain (dims {volume.dims})")
    idx = np.clip(idx, 0.0, hi)
    i0, i1, f = _interp_weights(idx, (nx, ny, nz))
    vox = volume.voxels
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    x1, y1, z1 = i1[:, 0], i1[:, 1], i1[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]

    c000 = vox[z0, y0, x0].astype(np.float64)
    c100 = vox[z0, y0, x1].astype(np.float64)
    c010 = vox[z0, y1, x0].astype(np.float64)
    c110 = vox[z0, y1, x1].astype(np.float64)
    c001 = vox[z1, y0, x0].astype(np.float64)
    c101 = vox[z1, y0, x1].astype(np.float64)
    c011 = vox[z1, y1, x0].astype(np.float64)
    c111 = vox[z1, y1, x1].astype(np.float64)

    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    return float(out[0]) if single else out


def gradient_central(volume: Volume, points: np.ndarray):
    """Central-difference gradient of the trilinear field, world HU/mm.

    Probes sit one voxel spacing away along each grid axis, so every point
    must be at least one voxel inside the domain boundary.  Returns a
    GradientSample for a single point, or (g array (N,3), magnitudes (N,))
    for a batch.
    """
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    idx = volume.world_to_index(p).reshape(-1, 3)
    nx, ny, nz = volume.dims
    hi = np.array([nx - 2, ny - 2, nz - 2], dtype=np.float64)
    if np.any(idx < 1 - 1e-9) or np.any(idx > hi + 1e-9):
        raise OutOfBounds("gradient probe leaves the volume (needs one-voxel margin)")

    grid_g = np.empty_like(idx)
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = 1.0
        plus = volume.index_to_world(idx + step)
        minus = volume.index_to_world(idx - step)
        diff = sample_trilinear(volume, plus) - sample_trilinear(volume, minus)
        grid_g[:, axis] = diff / (2.0 * volume.spacing[axis])
    world_g = grid_g @ volume.orientation.T
    mags = np.sqrt(np.sum(world_g * world_g, axis=1))
    if single:
        return GradientSample(g=world_g[0], magnitude=float(mags[0]))
    return world_g, mags
