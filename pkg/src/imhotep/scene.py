"""The virtual room: 3D workspace, curved 2D screen, annotations and views.

Room geometry lives in metres with z up; rendering and patient data use
millimetres, and the scene owns the uniform transform that places patient
content (mm) inside the room (internally room-mm for cameras).  The screen
is a vertical cylinder section around the user; slot rectangles on it are
addressed in normalized (u, v).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Camera
from .errors import EmptyScene, UnknownMesh, UnknownPreset
from .mesh import Appearance, TriangleMesh
from .render import MeshInstance, RenderScene, identity_transform, similarity_transform
from .shading import LightingParams
from .transfer import TransferFunction, default_ct_preset
from .volume import Volume

M_TO_MM = 1000.0

BASE_LABEL_FACTOR = 0.075       # initial label distance, fraction of workspace size
PUSH_LABEL_FACTOR = 0.025       # per-pass push for the higher id of an overlapping pair
MAX_LABEL_PASSES = 100


# --- screen geometry ---

@dataclass(frozen=True)
class ScreenSlot:
    slot_id: str
    kind: str                   # "record" | "labs" | "notes" | "image" | custom
    u0: float
    v0: float
    u1: float
    v1: float

    def __post_init__(self):
        if not (0 <= self.u0 < self.u1 <= 1 and 0 <= self.v0 < self.v1 <= 1):
            raise ValueError(f"slot {self.slot_id}: rectangle must be inside [0,1]^2")

    def contains(self, u: float, v: float) -> bool:
        return self.u0 <= u <= self.u1 and self.v0 <= v <= self.v1

    def overlaps(self, other: "ScreenSlot") -> bool:
        return not (self.u1 <= other.u0 or other.u1 <= self.u0
                    or self.v1 <= other.v0 or other.v1 <= self.v0)


@dataclass(frozen=True)
class CurvedScreen:
    """Vertical cylinder section surrounding the user."""

    center: np.ndarray          # (3,) m, cylinder axis base
    radius: float               # m
    angular_span: float         # radians, (0, 2*pi]
    v_min: float                # m above center height
    v_max: float
    forward: np.ndarray         # (2,) unit, horizontal mid-screen direction
    slots: tuple[ScreenSlot, ...] = ()

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        fwd = np.asarray(self.forward, dtype=np.float64).reshape(2)
        n = np.linalg.norm(fwd)
        if n < 1e-12:
            raise ValueError("screen forward must be a nonzero 2-vector")
        if not self.radius > 0:
            raise ValueError("screen radius must be positive")
        if not (0 < self.angular_span <= 2 * math.pi):
            raise ValueError("angular span must lie in (0, 2*pi]")
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")
        slots = tuple(self.slots)
        for i, a in enumerate(slots):
            for b in slots[i + 1:]:
                if a.overlaps(b):
                    raise ValueError(f"slots {a.slot_id} and {b.slot_id} overlap")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "forward", fwd / n)
        object.__setattr__(self, "slots", slots)

    def slot_at(self, u: float, v: float) -> ScreenSlot | None:
        for slot in self.slots:
            if slot.contains(u, v):
                return slot
        return None


def screen_uv_to_world(screen: CurvedScreen, u: float, v: float) -> np.ndarray:
    """Map screen coordinates (u, v) in [0,1]^2 to a room-space point (m).

    u sweeps the angular span (0.5 is straight along `forward`), v sweeps
    the height range.  Out-of-range input is a caller bug, not a clamp.
    """
    assert 0.0 <= u <= 1.0 and 0.0 <= v <= 1.0, "screen (u, v) out of range"
    theta = (u - 0.5) * screen.angular_span
    fx, fy = screen.forward
    dx = math.cos(theta) * fx - math.sin(theta) * fy
    dy = math.sin(theta) * fx + math.cos(theta) * fy
    height = screen.center[2] + screen.v_min + v * (screen.v_max - screen.v_min)
    return np.array([
        screen.center[0] + screen.radius * dx,
        screen.center[1] + screen.radius * dy,
        height,
    ])


def ray_screen_intersect(screen: CurvedScreen, ray) -> tuple[float, float] | None:
    """Nearest positive intersection of a room-space ray with the screen.

    Returns (u, v) or None for a miss.  The ray is (origin m, unit dir).
    """
    origin = np.asarray(ray[0], dtype=np.float64).reshape(3)
    direction = np.asarray(ray[1], dtype=np.float64).reshape(3)
    ox = origin[0] - screen.center[0]
    oy = origin[1] - screen.center[1]
    dx, dy = direction[0], direction[1]
    a = dx * dx + dy * dy
    if a < 1e-15:
        return None
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - screen.radius * screen.radius
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
        if t <= 1e-12:
            continue
        p = origin + t * direction
        v = (p[2] - screen.center[2] - screen.v_min) / (screen.v_max - screen.v_min)
        if not (0.0 <= v <= 1.0):
            continue
        wx = (p[0] - screen.center[0]) / screen.radius
        wy = (p[1] - screen.center[1]) / screen.radius
        fx, fy = screen.forward
        theta = math.atan2(fx * wy - fy * wx, fx * wx + fy * wy)
        u = theta / screen.angular_span + 0.5
        if not (0.0 <= u <= 1.0):
            continue
        return u, v
    return None


# --- room ---

def default_screen_slots() -> tuple[ScreenSlot, ...]:
    return (
        ScreenSlot("patient.record", "record", 0.02, 0.55, 0.16, 0.97),
        ScreenSlot("patient.labs", "labs", 0.02, 0.05, 0.16, 0.50),
        ScreenSlot("patient.notes", "notes", 0.84, 0.55, 0.98, 0.97),
        ScreenSlot("image.0", "image", 0.20, 0.52, 0.38, 0.95),
        ScreenSlot("image.1", "image", 0.41, 0.52, 0.59, 0.95),
        ScreenSlot("image.2", "image", 0.62, 0.52, 0.80, 0.95),
        ScreenSlot("image.3", "image", 0.20, 0.05, 0.38, 0.48),
        ScreenSlot("image.4", "image", 0.41, 0.05, 0.59, 0.48),
        ScreenSlot("image.5", "image", 0.62, 0.05, 0.80, 0.48),
    )


@dataclass(frozen=True)
class RoomLayout:
    workspace_center: np.ndarray    # (3,) m
    workspace_size: float           # m, target bounding-cube edge
    user_position: np.ndarray       # (3,) m
    screen: CurvedScreen

    def __post_init__(self):
        center = np.asarray(self.workspace_center, dtype=np.float64).reshape(3)
        user = np.asarray(self.user_position, dtype=np.float64).reshape(3)
        if not self.workspace_size > 0:
            raise ValueError("workspace_size must be positive")
        if np.linalg.norm(user - center) <= 0:
            raise ValueError("the user platform must sit off the workspace center")
        object.__setattr__(self, "workspace_center", center)
        object.__setattr__(self, "user_position", user)

    @classmethod
    def default(cls) -> "RoomLayout":
        user = np.array([0.0, -2.5, 0.0])
        return cls(
            workspace_center=np.array([0.0, 0.0, 0.0]),
            workspace_size=2.0,
            user_position=user,
            screen=CurvedScreen(
                center=user,
                radius=4.0,
                angular_span=math.radians(210.0),
                v_min=0.5,
                v_max=2.9,
                forward=np.array([0.0, 1.0]),
                slots=default_screen_slots(),
            ),
        )

    def to_json_dict(self) -> dict:
        return {
            "workspace_center": self.workspace_center.tolist(),
            "workspace_size": self.workspace_size,
            "user_position": self.user_position.tolist(),
            "screen": {
                "center": self.screen.center.tolist(),
                "radius": self.screen.radius,
                "angular_span": self.screen.angular_span,
                "v_min": self.screen.v_min,
                "v_max": self.screen.v_max,
                "forward": self.screen.forward.tolist(),
                "slots": [
                    {"id": s.slot_id, "kind": s.kind,
                     "rect": [s.u0, s.v0, s.u1, s.v1]}
                    for s in self.screen.slots
                ],
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RoomLayout":
        sc = data["screen"]
        slots = tuple(
            ScreenSlot(s["id"], s["kind"], *s["rect"]) for s in sc.get("slots", [])
        )
        return cls(
            workspace_center=np.array(data["workspace_center"], dtype=np.float64),
            workspace_size=float(data["workspace_size"]),
            user_position=np.array(data["user_position"], dtype=np.float64),
            screen=CurvedScreen(
                center=np.array(sc["center"], dtype=np.float64),
                radius=float(sc["radius"]),
                angular_span=float(sc["angular_span"]),
                v_min=float(sc["v_min"]),
                v_max=float(sc["v_max"]),
                forward=np.array(sc["forward"], dtype=np.float64),
                slots=slots,
            ),
        )


# --- annotations ---

@dataclass
class Annotation:
    """Point marker in patient space with an outward label direction."""

    id: int
    anchor: np.ndarray          # (3,) patient mm
    normal: np.ndarray          # (3,) unit
    text: str
    label_distance: float = 0.0  # m, set by label placement

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64).reshape(3)
        normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        n = np.linalg.norm(normal)
        if abs(n - 1.0) > 1e-4:
            raise ValueError("annotation normal must be unit length")
        self.normal = normal


def annotations_from_json(items: list[dict]) -> list[Annotation]:
    return [
        Annotation(
            id=int(item["id"]),
            anchor=np.array(item["position"], dtype=np.float64),
            normal=np.array(item["normal"], dtype=np.float64),
            text=str(item.get("text", "")),
        )
        for item in items
    ]


def annotations_to_json(annotations) -> list[dict]:
    return [
        {"id": a.id, "position": a.anchor.tolist(), "normal": a.normal.tolist(),
         "text": a.text}
        for a in annotations
    ]


# --- view presets ---

def _quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a proper rotation matrix."""
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def _matrix_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class ViewPreset:
    """Named camera orientation; rows of the rotation are (right, up, -forward)."""

    name: str
    orientation: np.ndarray     # unit quaternion (w, x, y, z)

    def __post_init__(self):
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("preset quaternion must be unit norm")
        object.__setattr__(self, "orientation", q)

    @classmethod
    def from_axes(cls, name: str, forward, up) -> "ViewPreset":
        f = np.asarray(forward, dtype=np.float64)
        f = f / np.linalg.norm(f)
        u = np.asarray(up, dtype=np.float64)
        u = u - f * (u @ f)
        u = u / np.linalg.norm(u)
        r = np.cross(f, u)
        rot = np.stack([r, u, -f])
        return cls(name=name, orientation=_quat_from_matrix(rot))

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, up, forward) in patient/room coordinates."""
        rot = _matrix_from_quat(self.orientation)
        return rot[0], rot[1], -rot[2]


def standard_views() -> dict[str, ViewPreset]:
    """Anatomical presets over LPS axes (+x left, +y posterior, +z superior)."""
    return {
        "coronal": ViewPreset.from_axes("coronal", forward=(0, 1, 0), up=(0, 0, 1)),
        "sagittal": ViewPreset.from_axes("sagittal", forward=(1, 0, 0), up=(0, 0, 1)),
        "transverse": ViewPreset.from_axes("transverse", forward=(0, 0, -1), up=(0, 1, 0)),
    }


# --- fitting and views ---

def _content_bounds(meshes, volume: Volume | None):
    mins, maxs = [], []
    for mesh in meshes:
        lo, hi = mesh.bounds()
        mins.append(lo)
        maxs.append(hi)
    if volume is not None:
        corners = volume.corners_world()
        mins.append(corners.min(axis=0))
        maxs.append(corners.max(axis=0))
    if not mins:
        raise EmptyScene("no meshes and no volume")
    return np.min(mins, axis=0), np.max(maxs, axis=0)


def fit_to_workspace(meshes, volume: Volume | None, room: RoomLayout) -> np.ndarray:
    """Uniform scale + translation placing patient content (mm) at the
    workspace center (room mm).  No rotation: patient axes stay aligned
    with room axes."""
    lo, hi = _content_bounds(meshes, volume)
    extent = float(np.max(hi - lo))
    scale = (room.workspace_size * M_TO_MM) / extent if extent > 0 else 1.0
    center = (lo + hi) / 2.0
    target = room.workspace_center * M_TO_MM
    return similarity_transform(scale, target - scale * center)


def apply_view(room: RoomLayout, preset: ViewPreset, *, width: int = 960,
               height: int = 720, vertical_fov: float = math.pi / 2) -> Camera:
    """Camera orbiting the workspace center at 1.5x the workspace size."""
    right, up, forward = preset.axes()
    distance = 1.5 * room.workspace_size * M_TO_MM
    eye = room.workspace_center * M_TO_MM - forward * distance
    return Camera(
        eye=eye, forward=forward, up=up, right=right,
        vertical_fov=vertical_fov, width=width, height=height,
        near=10.0, far=distance * 20.0,
    )


# --- picking ---

@dataclass(frozen=True)
class PickHit:
    mesh_id: int
    point: np.ndarray           # world/room mm
    triangle_index: int
    t: float                    # mm along the ray


def _ray_mesh_mt(origin, direction, verts: np.ndarray, tris: np.ndarray):
    """Vectorized Moller-Trumbore; returns (t, triangle_index) or None."""
    v0 = verts[tris[:, 0]]
    e1 = verts[tris[:, 1]] - v0
    e2 = verts[tris[:, 2]] - v0
    dx, dy, dz = direction
    px = dy * e2[:, 2] - dz * e2[:, 1]
    py = dz * e2[:, 0] - dx * e2[:, 2]
    pz = dx * e2[:, 1] - dy * e2[:, 0]
    det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
    valid = np.abs(det) > 1e-12
    inv = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
    tvec = origin - v0
    u = (tvec[:, 0] * px + tvec[:, 1] * py + tvec[:, 2] * pz) * inv
    qx = tvec[:, 1] * e1[:, 2] - tvec[:, 2] * e1[:, 1]
    qy = tvec[:, 2] * e1[:, 0] - tvec[:, 0] * e1[:, 2]
    qz = tvec[:, 0] * e1[:, 1] - tvec[:, 1] * e1[:, 0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
    hit = valid & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-9)
    if not hit.any():
        return None
    t_masked = np.where(hit, t, np.inf)
    idx = int(np.argmin(t_masked))
    return float(t_masked[idx]), idx


def ray_mesh_pick(instances, ray) -> PickHit | None:
    """Nearest hit over (mesh_id, mesh, transform) triples.

    Ties resolve to the lower mesh id, then the lower triangle index.  The
    ray is (origin, unit dir) in the same space as the transforms' output.
    """
    origin = np.asarray(ray[0], dtype=np.float64).reshape(3)
    direction = np.asarray(ray[1], dtype=np.float64).reshape(3)
    best: tuple[float, int, int] | None = None
    for mesh_id, mesh, transform in instances:
        m = np.asarray(transform, dtype=np.float64)
        inv = np.linalg.inv(m)
        o_local = inv[:3, :3] @ origin + inv[:3, 3]
        d_local = inv[:3, :3] @ direction
        res = _ray_mesh_mt(o_local, d_local, mesh.vertices, mesh.triangles)
        if res is None:
            continue
        t, tri = res
        key = (t, mesh_id, tri)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    t, mesh_id, tri = best
    return PickHit(mesh_id=mesh_id, point=origin + t * direction,
                   triangle_index=tri, t=t)


# --- label placement ---

@dataclass(frozen=True)
class LabelPlacement:
    annotation_id: int
    label_distance: float                               # m
    rect: tuple[float, float, float, float] | None      # (x0, y0, x1, y1) px


@dataclass(frozen=True)
class PlacementResult:
    placements: tuple[LabelPlacement, ...]
    overflowed: bool


def _rects_overlap(a, b) -> bool:
    return not (a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1])


def place_labels(annotations, cam: Camera, sizes, *, workspace_size: float,
                 content_transform: np.ndarray | None = None) -> PlacementResult:
    """Push labels out along their anchor normals until none overlap.

    Labels start at 0.075 x workspace size along the normal; while any two
    projected rectangles overlap, the higher-id member of each overlapping
    pair moves out another 0.025 x workspace size, for at most 100 passes.
    The result is a pure function of (annotations, camera, sizes).  Labels
    projecting behind the near plane get no rectangle and never conflict.
    """
    transform = content_transform if content_transform is not None else identity_transform()
    linear = transform[:3, :3]
    offset = transform[:3, 3]
    items = sorted(annotations, key=lambda a: a.id)
    size_of = {a.id: sizes[i] for i, a in enumerate(items)} if not isinstance(sizes, dict) \
        else dict(sizes)
    distance = {a.id: BASE_LABEL_FACTOR * workspace_size for a in items}

    def project(a) -> tuple[float, float, float, float] | None:
        anchor_room = linear @ a.anchor + offset
        pos = anchor_room + distance[a.id] * M_TO_MM * a.normal
        px, py, z = cam.project(pos[None, :])[0]
        if z <= cam.near:
            return None
        w, h = size_of[a.id]
        return (px - w / 2.0, py - h / 2.0, px + w / 2.0, py + h / 2.0)

    overflowed = True
    rects: dict[int, tuple | None] = {}
    for _ in range(MAX_LABEL_PASSES):
        rects = {a.id: project(a) for a in items}
        pushed = set()
        for i, a in enumerate(items):
            ra = rects[a.id]
            if ra is None:
                continue
            for b in items[i + 1:]:
                rb = rects[b.id]
                if rb is not None and _rects_overlap(ra, rb):
                    pushed.add(max(a.id, b.id))
        if not pushed:
            overflowed = False
            break
        for aid in pushed:
            distance[aid] += PUSH_LABEL_FACTOR * workspace_size
    if overflowed:
        rects = {a.id: project(a) for a in items}
    placements = tuple(
        LabelPlacement(annotation_id=a.id, label_distance=distance[a.id], rect=rects[a.id])
        for a in items
    )
    return PlacementResult(placements=placements, overflowed=overflowed)


# --- organ state and the session scene ---

@dataclass
class OrganState:
    mesh_id: int
    visible: bool = True
    opacity_override: float | None = None

    def __post_init__(self):
        if self.opacity_override is not None and not (0 <= self.opacity_override <= 1):
            raise ValueError("opacity override must lie in [0, 1]")


class Scene:
    """Mutable per-session state; renders see immutable snapshots.

    Mutations must stay on the session's coordination context; the
    snapshot handed to the renderer shares no mutable state.
    """

    def __init__(self, room: RoomLayout | None = None):
        self.room = room or RoomLayout.default()
        self.views = standard_views()
        self.volume: Volume | None = None
        self.meshes: list[tuple[TriangleMesh, Appearance]] = []
        self.record = None
        self.annotations: list[Annotation] = []
        self.transfer: TransferFunction = default_ct_preset()
        self.organ_states: dict[int, OrganState] = {}
        self.content_transform = identity_transform()
        self.lighting = LightingParams()
        self.tool_state: dict[str, dict] = {}
        self.view_name = "coronal"
        self._orbit_yaw = 0.0
        self._orbit_pitch = 0.0
        self._orbit_distance = 1.5 * self.room.workspace_size * M_TO_MM
        self.loaded = False

    # -- content --

    def load_patient(self, data) -> None:
        """Install a loaded patient bundle and frame it in the workspace."""
        self.volume = data.volume
        self.meshes = list(data.meshes)
        self.record = data.record
        self.annotations = list(data.annotations)
        self.transfer = data.transfer
        self.organ_states = {
            i: OrganState(mesh_id=i) for i in range(len(self.meshes))
        }
        self.content_transform = fit_to_workspace(
            [m for m, _ in self.meshes], self.volume, self.room)
        self.loaded = True
        self.set_view(self.view_name)

    # -- camera --

    def set_view(self, name: str) -> None:
        preset = self.views.get(name)
        if preset is None:
            raise UnknownPreset(f"view preset {name!r}")
        _right, _up, forward = preset.axes()
        self._orbit_pitch = math.asin(max(-1.0, min(1.0, -forward[2])))
        self._orbit_yaw = math.atan2(forward[0], forward[1])
        self._orbit_distance = 1.5 * self.room.workspace_size * M_TO_MM
        self.view_name = name

    def orbit_by(self, yaw: float, pitch: float, zoom: float = 1.0) -> None:
        """Rotate around the workspace center and scale the orbit distance."""
        if not zoom > 0:
            raise ValueError("zoom factor must be positive")
        self._orbit_yaw = (self._orbit_yaw + yaw) % (2 * math.pi)
        half = math.pi / 2
        self._orbit_pitch = max(-half, min(half, self._orbit_pitch + pitch))
        self._orbit_distance = max(1.0, self._orbit_distance * zoom)

    def camera(self, width: int, height: int,
               vertical_fov: float = math.pi / 2) -> Camera:
        sin_y, cos_y = math.sin(self._orbit_yaw), math.cos(self._orbit_yaw)
        sin_p, cos_p = math.sin(self._orbit_pitch), math.cos(self._orbit_pitch)
        forward = np.array([cos_p * sin_y, cos_p * cos_y, -sin_p])
        up = np.array([sin_p * sin_y, sin_p * cos_y, cos_p])
        right = np.cross(forward, up)
        center = self.room.workspace_center * M_TO_MM
        eye = center - forward * self._orbit_distance
        return Camera(eye=eye, forward=forward, up=up, right=right,
                      vertical_fov=vertical_fov, width=width, height=height,
                      near=10.0, far=self._orbit_distance * 20.0)

    # -- organs --

    def _require_organ(self, mesh_id: int) -> OrganState:
        state = self.organ_states.get(mesh_id)
        if state is None:
            raise UnknownMesh(f"mesh id {mesh_id}")
        return state

    def organ_id_by_name(self, name: str) -> int:
        for i, (_, appearance) in enumerate(self.meshes):
            if appearance.name == name:
                return i
        raise UnknownMesh(f"mesh named {name!r}")

    def set_organ_opacity(self, mesh_id: int, alpha: float) -> None:
        if not (0 <= alpha <= 1):
            raise ValueError("alpha must lie in [0, 1]")
        self._require_organ(mesh_id).opacity_override = float(alpha)

    def set_organ_visible(self, mesh_id: int, visible: bool) -> None:
        self._require_organ(mesh_id).visible = bool(visible)

    # -- annotations --

    def add_annotation(self, position, normal, text: str) -> Annotation:
        next_id = max((a.id for a in self.annotations), default=0) + 1
        annotation = Annotation(id=next_id, anchor=np.asarray(position, dtype=np.float64),
                                normal=np.asarray(normal, dtype=np.float64), text=text)
        self.annotations.append(annotation)
        return annotation

    # -- picking --

    def pick(self, origin_mm, direction) -> dict:
        """Resolve a pointer ray (room mm) against organs, then the screen."""
        direction = np.asarray(direction, dtype=np.float64).reshape(3)
        n = np.linalg.norm(direction)
        if n < 1e-12:
            raise ValueError("pointer direction must be nonzero")
        direction = direction / n
        origin_mm = np.asarray(origin_mm, dtype=np.float64).reshape(3)
        instances = [
            (i, mesh, self.content_transform)
            for i, (mesh, _app) in enumerate(self.meshes)
            if self.organ_states[i].visible
        ]
        hit = ray_mesh_pick(instances, (origin_mm, direction))
        if hit is not None:
            inv = np.linalg.inv(self.content_transform)
            point_patient = inv[:3, :3] @ hit.point + inv[:3, 3]
            return {
                "kind": "mesh",
                "mesh": hit.mesh_id,
                "name": self.meshes[hit.mesh_id][1].name,
                "point": hit.point.tolist(),
                "point_patient": point_patient.tolist(),
                "triangle": hit.triangle_index,
                "distance_mm": hit.t,
            }
        uv = ray_screen_intersect(self.room.screen,
                                  (origin_mm / M_TO_MM, direction))
        if uv is not None:
            slot = self.room.screen.slot_at(*uv)
            return {
                "kind": "screen",
                "u": uv[0],
                "v": uv[1],
                "slot": slot.slot_id if slot else None,
            }
        return {"kind": "miss"}

    # -- snapshots --

    def render_scene(self) -> RenderScene:
        instances = []
        for i, (mesh, appearance) in enumerate(self.meshes):
            state = self.organ_states[i]
            if not state.visible:
                continue
            instances.append(MeshInstance(
                mesh=mesh,
                appearance=appearance,
                transform=self.content_transform,
                opacity_override=state.opacity_override,
            ))
        return RenderScene(
            meshes=tuple(instances),
            volume=self.volume,
            transfer=self.transfer if self.volume is not None else None,
            volume_transform=self.content_transform,
            lighting=self.lighting,
        )

    def slot_contents(self) -> list[dict]:
        by_slot = {}
        if self.record is not None:
            for image in self.record.images:
                by_slot.setdefault(image.slot_id, []).append(
                    {"image": image.path, "caption": image.caption})
        out = []
        for slot in self.room.screen.slots:
            entry = {"id": slot.slot_id, "kind": slot.kind, "content": None}
            if slot.kind == "record" and self.record is not None:
                entry["content"] = {"record": True}
            elif slot.kind == "labs" and self.record is not None:
                entry["content"] = {"labs": len(self.record.labs)}
            elif slot.kind == "notes" and self.record is not None and self.record.notes_html:
                entry["content"] = {"notes_html": self.record.notes_html}
            elif slot.slot_id in by_slot:
                entry["content"] = by_slot[slot.slot_id][0]
            out.append(entry)
        return out

    def summary(self) -> dict:
        record = self.record
        return {
            "loaded": self.loaded,
            "view": self.view_name,
            "camera": {
                "yaw": self._orbit_yaw,
                "pitch": self._orbit_pitch,
                "distance_mm": self._orbit_distance,
                "center_mm": (self.room.workspace_center * M_TO_MM).tolist(),
                "vertical_fov": math.pi / 2,
            },
            "organs": [
                {
                    "id": i,
                    "name": appearance.name,
                    "color": list(appearance.color),
                    "opacity": (self.organ_states[i].opacity_override
                                if self.organ_states[i].opacity_override is not None
                                else appearance.opacity),
                    "visible": self.organ_states[i].visible,
                }
                for i, (_, appearance) in enumerate(self.meshes)
            ],
            "annotations": [
                {"id": a.id, "position": a.anchor.tolist(),
                 "normal": a.normal.tolist(), "text": a.text}
                for a in self.annotations
            ],
            "slots": self.slot_contents(),
            "record": None if record is None else {
                "name": record.name,
                "age": record.age,
                "sex": record.sex,
                "diagnosis": record.diagnosis,
                "notes_html": record.notes_html,
                "labs": [
                    {"name": lab.name, "value": lab.value, "unit": lab.unit,
                     "timestamp": lab.timestamp}
                    for lab in record.labs
                ],
                "images": [
                    {"file": img.path, "caption": img.caption, "slot": img.slot_id}
                    for img in record.images
                ],
            },
            "has_volume": self.volume is not None,
            "transfer": self.transfer.to_json_dict(),
        }
