"""Live WebSocket service: connection lifecycle and session isolation."""

from __future__ import annotations

import json
import time

import pytest
from websockets.sync.client import connect

from imhotep.errors import BindFailure
from imhotep.protocol import FORMAT_RAW, FramePacket
from imhotep.service import Service, ServiceConfig
from imhotep.session import SessionConfig


@pytest.fixture(scope="module")
def service():
    svc = Service(ServiceConfig(
        port=0, session=SessionConfig(width=32, height=24, frame_format=FORMAT_RAW)))
    svc.start()
    yield svc
    svc.stop()


def _send(sock, msg_id, msg_type, **payload):
    sock.send(json.dumps({"id": msg_id, "type": msg_type, "payload": payload}))


def _recv_until(sock, predicate, timeout=30.0):
    deadline = time.time() + timeout
    collected = []
    while time.time() < deadline:
        try:
            msg = sock.recv(timeout=0.5)
        except TimeoutError:
            continue
        item = json.loads(msg) if isinstance(msg, str) else FramePacket.decode(msg)
        collected.append(item)
        if predicate(item):
            return collected
    raise AssertionError(f"condition not met; got {collected!r}")


def test_connect_load_get_scene_matches_manifest(service, patient_dir):
    with connect(f"ws://127.0.0.1:{service.port}") as sock:
        _send(sock, 1, "load_patient", path=str(patient_dir))
        _recv_until(sock, lambda m: isinstance(m, dict) and m["type"] == "patient_loaded")
        _send(sock, 2, "get_scene")
        replies = _recv_until(sock, lambda m: isinstance(m, dict) and m["type"] == "scene")
        scene = replies[-1]["payload"]
        assert [o["name"] for o in scene["organs"]] == ["Liver", "Tumor", "Hepatic Vein"]
        assert scene["has_volume"] is True


def test_two_clients_have_independent_scenes(service, patient_dir):
    with connect(f"ws://127.0.0.1:{service.port}") as a, \
         connect(f"ws://127.0.0.1:{service.port}") as b:
        for sock in (a, b):
            _send(sock, 1, "load_patient", path=str(patient_dir))
            _recv_until(sock, lambda m: isinstance(m, dict) and m["type"] == "patient_loaded")
        _send(a, 2, "set_organ_opacity", mesh="Liver", alpha=0.25)
        _recv_until(a, lambda m: isinstance(m, dict) and m["type"] == "ack")
        _send(b, 2, "get_scene")
        replies = _recv_until(b, lambda m: isinstance(m, dict) and m["type"] == "scene")
        liver = replies[-1]["payload"]["organs"][0]
        assert liver["opacity"] == 1.0      # a's override never leaks into b


def test_abrupt_disconnect_during_load_keeps_service_up(service, patient_dir):
    sock = connect(f"ws://127.0.0.1:{service.port}")
    _send(sock, 1, "load_patient", path=str(patient_dir))
    sock.close()                            # drop before the load completes
    time.sleep(0.2)
    with connect(f"ws://127.0.0.1:{service.port}") as again:
        _send(again, 1, "get_scene")
        replies = _recv_until(again, lambda m: isinstance(m, dict) and m["type"] == "scene")
        assert replies[-1]["payload"]["loaded"] is False


def test_bind_failure_on_taken_port(service):
    with pytest.raises(BindFailure):
        Service(ServiceConfig(port=service.port))


def test_autoload_patient_on_connect(patient_dir):
    svc = Service(ServiceConfig(
        port=0, patient_path=str(patient_dir),
        session=SessionConfig(width=16, height=12, frame_format=FORMAT_RAW)))
    svc.start()
    try:
        with connect(f"ws://127.0.0.1:{svc.port}") as sock:
            replies = _recv_until(
                sock, lambda m: isinstance(m, dict) and m["type"] == "patient_loaded")
            assert replies[-1]["id"] == 0   # autoload pseudo-request id
            _recv_until(sock, lambda m: isinstance(m, FramePacket))
    finally:
        svc.stop()
