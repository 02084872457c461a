"""Whole-frame rendering: meshes, volume, and stereo pairs.

Compositing order per eye: opaque meshes (depth tested), then the volume
ray-marched per pixel up to the opaque depth and composited over the
opaque color, then translucent meshes blended last.  Every stage is a pure
function of the scene snapshot, so frames are bitwise reproducible for any
worker count.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import numba

from ._kernels import EARLY_EXIT_ALPHA, march_image
from .camera import Camera, StereoRig
from .framebuffer import Framebuffer
from .mesh import Appearance, TriangleMesh
from .raster import raster_opaque_pass, raster_translucent_pass, split_by_opacity
from .shading import LightingParams
from .transfer import TransferFunction
from .volume import Volume

# numba's thread count is process-global state; hold while rendering.
_RENDER_LOCK = threading.Lock()

_MAX_THREADS = numba.config.NUMBA_NUM_THREADS


def identity_transform() -> np.ndarray:
    return np.eye(4, dtype=np.float64)


def similarity_transform(scale: float, offset) -> np.ndarray:
    m = np.eye(4, dtype=np.float64)
    m[:3, :3] *= scale
    m[:3, 3] = np.asarray(offset, dtype=np.float64)
    return m


@dataclass(frozen=True)
class MeshInstance:
    mesh: TriangleMesh
    appearance: Appearance
    transform: np.ndarray = field(default_factory=identity_transform)
    opacity_override: float | None = None

    @property
    def effective_opacity(self) -> float:
        if self.opacity_override is not None:
            return self.opacity_override
        return self.appearance.opacity


@dataclass(frozen=True)
class RenderScene:
    """Immutable snapshot handed to the renderer."""

    meshes: tuple[MeshInstance, ...] = ()
    volume: Volume | None = None
    transfer: TransferFunction | None = None
    volume_transform: np.ndarray = field(default_factory=identity_transform)
    lighting: LightingParams = field(default_factory=LightingParams)

    def __post_init__(self):
        if self.volume is not None and self.transfer is None:
            raise ValueError("a scene with a volume needs a transfer function")
        object.__setattr__(self, "meshes", tuple(self.meshes))


@dataclass(frozen=True)
class RenderSettings:
    step: float | None = None       # volume mm; default min(spacing)/2
    workers: int = 1
    opacity_correction: bool = True

    def resolve_step(self, volume: Volume | None) -> float:
        if self.step is not None:
            if not self.step > 0:
                raise ValueError("step must be positive")
            return float(self.step)
        if volume is None:
            return 1.0
        return float(volume.spacing.min()) / 2.0


def _uniform_similarity(transform: np.ndarray) -> tuple[float, np.ndarray]:
    m = np.asarray(transform, dtype=np.float64)
    scale = m[0, 0]
    if not np.allclose(m[:3, :3], scale * np.eye(3), atol=1e-9) or scale <= 0:
        raise ValueError("volume placement must be a uniform scale plus translation")
    if not np.allclose(m[3], (0, 0, 0, 1)):
        raise ValueError("volume transform must be affine")
    return float(scale), m[:3, 3].copy()


def _march_volume(scene: RenderScene, cam: Camera, settings: RenderSettings,
                  depth_z: np.ndarray) -> np.ndarray:
    volume = scene.volume
    tf = scene.transfer
    lp = scene.lighting
    scale, offset = _uniform_similarity(scene.volume_transform)
    eye_vol = (cam.eye - offset) / scale
    step = settings.resolve_step(volume)
    minv = np.ascontiguousarray((volume.orientation / volume.spacing).T)

    out = np.empty((cam.height, cam.width, 4), dtype=np.float64)
    march_image(
        volume.voxels,
        minv,
        volume.origin,
        volume.spacing,
        np.ascontiguousarray(volume.orientation),
        eye_vol,
        cam.right, cam.up, cam.forward,
        cam.tan_half_fov, cam.aspect,
        cam.width, cam.height,
        depth_z,
        scale,
        cam.near,
        tf.values, tf.rgba,
        tf.reference_step, step,
        lp.ka, lp.kd, lp.ks, lp.shininess, lp.gradient_epsilon,
        settings.opacity_correction,
        EARLY_EXIT_ALPHA,
        out,
    )
    return out


def render_view(scene: RenderScene, cam: Camera,
                settings: RenderSettings | None = None) -> Framebuffer:
    """Render one eye: rasterize, march the volume, blend translucents."""
    settings = settings or RenderSettings()
    with _RENDER_LOCK:
        numba.set_num_threads(max(1, min(int(settings.workers), _MAX_THREADS)))
        fb = Framebuffer.empty(cam.width, cam.height)
        instances = [
            (inst.mesh, inst.appearance, inst.transform, inst.effective_opacity)
            for inst in scene.meshes
        ]
        opaque, translucent = split_by_opacity(instances)
        raster_opaque_pass(fb, opaque, cam, scene.lighting)
        if scene.volume is not None:
            vol_rgba = _march_volume(scene, cam, settings, fb.depth)
            fb.color = vol_rgba + (1.0 - vol_rgba[:, :, 3:4]) * fb.color
        raster_translucent_pass(fb, translucent, cam, scene.lighting)
    return fb


def render_frame(scene: RenderScene, rig: StereoRig,
                 settings: RenderSettings | None = None) -> tuple[Framebuffer, Framebuffer]:
    """Render the stereo pair (left, right); ipd == 0 gives identical eyes."""
    left_cam, right_cam = rig.eye_cameras()
    return render_view(scene, left_cam, settings), render_view(scene, right_cam, settings)
