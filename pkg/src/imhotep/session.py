"""Per-connection session: command dispatch, rendering, notifications.

One session owns one scene.  `handle_message` and `pump` must only be
called from the session's coordination context (the connection thread);
background loads publish onto the session bus and surface as notifications
on the next pump.  Every state-changing command renders one new frame
(one packet, or a left/right pair sharing a sequence number when stereo
is on); replies always echo the request id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import protocol
from .camera import StereoRig
from .errors import ImhotepError, UnknownMesh, UnknownPreset
from .patient import load_patient_directory
from .protocol import ProtocolError, WireMessage, bad_payload
from .render import RenderSettings, render_frame, render_view
from .runtime import Runtime, TaskCompletion
from .scene import RoomLayout, Scene
from .transfer import TransferFunction

PATIENT_LOADED_TOPIC = "patient.loaded"
FRAME_RENDERED_TOPIC = "frame.rendered"
ANNOTATION_ADDED_TOPIC = "annotation.added"

AUTOLOAD_REQUEST_ID = 0


@dataclass(frozen=True)
class SessionConfig:
    width: int = 640
    height: int = 480
    frame_format: int = protocol.FORMAT_PNG
    workers: int = 1
    step: float | None = None
    default_ipd_mm: float = 64.0


class Session:
    """State machine translating wire commands into scene operations."""

    def __init__(self, config: SessionConfig | None = None,
                 room: RoomLayout | None = None):
        self.config = config or SessionConfig()
        self.scene = Scene(room=room)
        self.runtime = Runtime()
        self.stereo_enabled = False
        self.ipd_mm = self.config.default_ipd_mm
        self.frame_sequence = 0
        self.closed = False
        self._pending_loads: dict[int, int] = {}   # task id -> request id
        self._pump_out: list[str | bytes] = []
        self.runtime.bus.subscribe(PATIENT_LOADED_TOPIC, self._on_patient_loaded)

    # -- lifecycle --

    def close(self) -> None:
        self.closed = True
        self.runtime.close(wait=False)

    def start_patient_load(self, path: str, request_id: int) -> None:
        handle = self.runtime.executor.submit_task(
            lambda: load_patient_directory(path, self.scene.room),
            PATIENT_LOADED_TOPIC,
        )
        self._pending_loads[handle.id] = request_id

    def pump(self) -> list[str | bytes]:
        """Deliver queued events; returns notifications and frames to send."""
        self.runtime.bus.pump_events()
        out = self._pump_out
        self._pump_out = []
        return out

    # -- event handlers (run inside pump) --

    def _on_patient_loaded(self, completion: TaskCompletion) -> None:
        request_id = self._pending_loads.pop(completion.task_id, AUTOLOAD_REQUEST_ID)
        if self.closed:
            return
        if not completion.ok:
            self._pump_out.append(protocol.error_reply(
                request_id, "load_failed", str(completion.error)))
            return
        self.scene.load_patient(completion.value)
        self._pump_out.append(protocol.reply(
            request_id, "patient_loaded", self.scene.summary()))
        self._pump_out.extend(self._render_packets())

    # -- rendering --

    def _render_packets(self) -> list[bytes]:
        if not self.scene.loaded:
            return []
        self.frame_sequence += 1
        seq = self.frame_sequence
        settings = RenderSettings(step=self.config.step, workers=self.config.workers)
        cam = self.scene.camera(self.config.width, self.config.height)
        snapshot = self.scene.render_scene()
        packets = []
        if self.stereo_enabled:
            rig = StereoRig(center=cam, ipd=self.ipd_mm)
            left, right = render_frame(snapshot, rig, settings)
            packets.append(protocol.encode_frame(
                left, protocol.EYE_LEFT, seq, self.config.frame_format).encode())
            packets.append(protocol.encode_frame(
                right, protocol.EYE_RIGHT, seq, self.config.frame_format).encode())
        else:
            fb = render_view(snapshot, cam, settings)
            packets.append(protocol.encode_frame(
                fb, protocol.EYE_MONO, seq, self.config.frame_format).encode())
        self.runtime.bus.publish(FRAME_RENDERED_TOPIC, seq)
        return packets

    def _require_loaded(self) -> None:
        if not self.scene.loaded:
            raise ProtocolError("not_loaded", "no patient loaded yet")

    # -- command dispatch --

    def handle_message(self, text: str) -> list[str | bytes]:
        """Process one wire command; returns replies in send order."""
        try:
            msg = WireMessage.parse(text)
        except ProtocolError as exc:
            return [protocol.error_reply(0, exc.code, exc.detail, exc.field)]
        handler = getattr(self, f"_cmd_{msg.type}", None)
        if handler is None:
            return [protocol.error_reply(
                msg.id, "unknown_type", f"unknown command type {msg.type!r}")]
        try:
            return handler(msg)
        except ProtocolError as exc:
            return [protocol.error_reply(msg.id, exc.code, exc.detail, exc.field)]
        except ImhotepError as exc:
            return [protocol.error_reply(msg.id, "bad_payload", str(exc))]

    # Individual commands.  Each returns the full reply list.

    def _cmd_load_patient(self, msg: WireMessage):
        path = protocol.need_str(msg.payload, "path")
        self.start_patient_load(path, msg.id)
        return [protocol.ack(msg.id, {"loading": path})]

    def _cmd_set_view(self, msg: WireMessage):
        view = protocol.need_str(msg.payload, "view")
        try:
            self.scene.set_view(view)
        except UnknownPreset as exc:
            raise bad_payload(str(exc), field="view") from None
        return [protocol.ack(msg.id, {"view": view}), *self._render_packets()]

    def _cmd_orbit(self, msg: WireMessage):
        yaw = protocol.need_number(msg.payload, "yaw")
        pitch = protocol.need_number(msg.payload, "pitch")
        zoom = protocol.need_number(msg.payload, "zoom")
        if zoom <= 0:
            raise bad_payload("zoom must be positive", field="zoom")
        self.scene.orbit_by(yaw, pitch, zoom)
        return [protocol.ack(msg.id), *self._render_packets()]

    def _cmd_set_transfer_function(self, msg: WireMessage):
        points = protocol.need(msg.payload, "points")
        ref_step = protocol.need_number(msg.payload, "reference_step_mm")
        try:
            tf = TransferFunction.from_json_dict(
                {"reference_step_mm": ref_step, "points": points})
        except (KeyError, TypeError, ValueError) as exc:
            raise bad_payload(f"invalid transfer function: {exc}", field="points") from None
        self.scene.transfer = tf
        return [protocol.ack(msg.id), *self._render_packets()]

    def _resolve_mesh_id(self, payload: dict) -> int:
        mesh = protocol.need(payload, "mesh")
        if isinstance(mesh, bool) or not isinstance(mesh, (int, str)):
            raise bad_payload("field 'mesh' must be an id or a name", field="mesh")
        try:
            if isinstance(mesh, str):
                return self.scene.organ_id_by_name(mesh)
            self.scene._require_organ(mesh)
            return mesh
        except UnknownMesh as exc:
            raise bad_payload(str(exc), field="mesh") from None

    def _cmd_set_organ_opacity(self, msg: WireMessage):
        mesh_id = self._resolve_mesh_id(msg.payload)
        alpha = protocol.need_number(msg.payload, "alpha")
        if not (0 <= alpha <= 1):
            raise bad_payload("alpha must lie in [0, 1]", field="alpha")
        self.scene.set_organ_opacity(mesh_id, alpha)
        return [protocol.ack(msg.id, {"mesh": mesh_id, "alpha": alpha}),
                *self._render_packets()]

    def _cmd_set_organ_visible(self, msg: WireMessage):
        mesh_id = self._resolve_mesh_id(msg.payload)
        visible = protocol.need_bool(msg.payload, "visible")
        self.scene.set_organ_visible(mesh_id, visible)
        return [protocol.ack(msg.id), *self._render_packets()]

    def _cmd_set_stereo(self, msg: WireMessage):
        enabled = protocol.need_bool(msg.payload, "enabled")
        if "ipd_mm" in msg.payload:
            ipd = protocol.need_number(msg.payload, "ipd_mm")
            if ipd < 0:
                raise bad_payload("ipd_mm must be >= 0", field="ipd_mm")
            self.ipd_mm = ipd
        self.stereo_enabled = enabled
        return [protocol.ack(msg.id, {"enabled": enabled, "ipd_mm": self.ipd_mm}),
                *self._render_packets()]

    def _cmd_add_annotation(self, msg: WireMessage):
        position = protocol.need_vec3(msg.payload, "position")
        normal = protocol.need_vec3(msg.payload, "normal")
        text = protocol.need_str(msg.payload, "text")
        norm = float(np.linalg.norm(normal))
        if norm < 1e-12:
            raise bad_payload("normal must be nonzero", field="normal")
        annotation = self.scene.add_annotation(
            position, [c / norm for c in normal], text)
        self.runtime.bus.publish(ANNOTATION_ADDED_TOPIC, annotation.id)
        return [protocol.ack(msg.id, {"annotation_id": annotation.id}),
                *self._render_packets()]

    def _cmd_pointer_ray(self, msg: WireMessage):
        origin = protocol.need_vec3(msg.payload, "origin")
        direction = protocol.need_vec3(msg.payload, "dir")
        self._require_loaded()
        if float(np.linalg.norm(direction)) < 1e-12:
            raise bad_payload("dir must be nonzero", field="dir")
        result = self.scene.pick(origin, direction)
        return [protocol.reply(msg.id, "pick_result", result)]

    def _cmd_request_frame(self, msg: WireMessage):
        self._require_loaded()
        return [protocol.ack(msg.id), *self._render_packets()]

    def _cmd_get_scene(self, msg: WireMessage):
        payload = self.scene.summary()
        payload["stereo"] = {"enabled": self.stereo_enabled, "ipd_mm": self.ipd_mm}
        return [protocol.reply(msg.id, "scene", payload)]
