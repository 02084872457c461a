"""Headless surgical-visualization engine.

Loads patient-specific data (CT series, segmented organ meshes, textual
records), renders stereo views by per-pixel volume ray casting plus mesh
rasterization, organizes content into a three-workspace virtual room, and
streams interactive sessions to thin viewers.
"""

from .camera import Camera, StereoRig
from .dicom import DicomDataset, assemble_series, parse_dicom_file
from .errors import ImhotepError
from .framebuffer import Framebuffer
from .mesh import Appearance, TriangleMesh, load_mesh, load_mesh_file
from .patient import PatientData, PatientRecord, load_patient_directory
from .protocol import FramePacket, WireMessage, encode_frame
from .raycast import composite_front_to_back, raymarch_pixel
from .render import (
    MeshInstance,
    RenderScene,
    RenderSettings,
    render_frame,
    render_view,
)
from .raster import rasterize_meshes
from .runtime import EventBus, Runtime, TaskExecutor
from .scene import (
    Annotation,
    CurvedScreen,
    RoomLayout,
    Scene,
    ViewPreset,
    apply_view,
    fit_to_workspace,
    place_labels,
    ray_mesh_pick,
    ray_screen_intersect,
    screen_uv_to_world,
    standard_views,
)
from .service import Service, ServiceConfig, serve
from .session import Session, SessionConfig
from .shading import LightingParams, shade_blinn_phong
from .transfer import TransferFunction, default_ct_preset, opacity_correct, tf_eval
from .volume import GradientSample, Volume, gradient_central, sample_trilinear

__version__ = "0.1.0"
