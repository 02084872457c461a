"""Session command handling without sockets."""

from __future__ import annotations

import json
import time

import pytest

from imhotep.protocol import FORMAT_RAW, FramePacket
from imhotep.session import Session, SessionConfig


def _cmd(msg_id, msg_type, **payload) -> str:
    return json.dumps({"id": msg_id, "type": msg_type, "payload": payload})


def _texts(replies):
    return [json.loads(r) for r in replies if isinstance(r, str)]


def _packets(replies):
    return [FramePacket.decode(r) for r in replies if isinstance(r, bytes)]


@pytest.fixture()
def session(patient_dir):
    s = Session(SessionConfig(width=48, height=36, frame_format=FORMAT_RAW))
    yield s
    s.close()


def _load(session, patient_dir, request_id=1):
    replies = session.handle_message(_cmd(request_id, "load_patient",
                                          path=str(patient_dir)))
    assert _texts(replies)[0]["type"] == "ack"
    deadline = time.time() + 30
    outbound = []
    while not outbound:
        assert time.time() < deadline
        outbound = session.pump()
        time.sleep(0.005)
    return outbound


def test_load_patient_acks_then_notifies_with_frame(session, patient_dir):
    outbound = _load(session, patient_dir, request_id=5)
    texts = _texts(outbound)
    packets = _packets(outbound)
    assert texts[0]["type"] == "patient_loaded"
    assert texts[0]["id"] == 5                       # echoes the load request
    assert [o["name"] for o in texts[0]["payload"]["organs"]] == \
        ["Liver", "Tumor", "Hepatic Vein"]
    assert len(packets) == 1 and packets[0].eye == 0


def test_render_before_load_is_not_loaded_error(session):
    replies = session.handle_message(_cmd(1, "request_frame"))
    err = _texts(replies)[0]
    assert err["type"] == "error"
    assert err["payload"]["code"] == "not_loaded"
    replies = session.handle_message(_cmd(2, "pointer_ray",
                                          origin=[0, 0, 0], dir=[0, 1, 0]))
    assert _texts(replies)[0]["payload"]["code"] == "not_loaded"


def test_unknown_type_preserves_session(session, patient_dir):
    replies = session.handle_message(json.dumps({"id": 2, "type": "bogus"}))
    err = _texts(replies)[0]
    assert err["type"] == "error" and err["id"] == 2
    assert "bogus" in err["payload"]["detail"]
    # The session still works afterwards.
    _load(session, patient_dir)
    assert _texts(session.handle_message(_cmd(3, "get_scene")))[0]["type"] == "scene"


def test_set_view_acks_and_renders_one_mono_frame(session, patient_dir):
    _load(session, patient_dir)
    replies = session.handle_message(_cmd(7, "set_view", view="coronal"))
    texts = _texts(replies)
    packets = _packets(replies)
    assert texts[0]["type"] == "ack" and texts[0]["id"] == 7
    assert len(packets) == 1
    assert packets[0].eye == 0
    assert packets[0].width == 48 and packets[0].height == 36


def test_stereo_frames_share_sequence(session, patient_dir):
    _load(session, patient_dir)
    replies = session.handle_message(_cmd(8, "set_stereo", enabled=True, ipd_mm=64))
    first_pair = _packets(replies)
    assert [p.eye for p in first_pair] == [1, 2]
    assert first_pair[0].sequence == first_pair[1].sequence
    replies = session.handle_message(_cmd(9, "request_frame"))
    second_pair = _packets(replies)
    assert [p.eye for p in second_pair] == [1, 2]
    assert second_pair[0].sequence == second_pair[1].sequence
    assert second_pair[0].sequence > first_pair[0].sequence


def test_sequence_strictly_increases(session, patient_dir):
    _load(session, patient_dir)
    seqs = []
    for k, view in enumerate(("coronal", "sagittal", "transverse")):
        replies = session.handle_message(_cmd(10 + k, "set_view", view=view))
        seqs.extend(p.sequence for p in _packets(replies))
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == len(seqs)


def test_bad_payload_names_field(session):
    replies = session.handle_message(_cmd(1, "set_view", wrong="x"))
    err = _texts(replies)[0]
    assert err["payload"]["code"] == "bad_payload"
    assert err["payload"]["field"] == "view"


def test_set_organ_opacity_by_name_then_get_scene(session, patient_dir):
    _load(session, patient_dir)
    replies = session.handle_message(
        _cmd(11, "set_organ_opacity", mesh="Liver", alpha=0.3))
    assert _texts(replies)[0]["type"] == "ack"
    assert len(_packets(replies)) == 1
    scene_reply = _texts(session.handle_message(_cmd(12, "get_scene")))[0]
    liver = scene_reply["payload"]["organs"][0]
    assert liver["name"] == "Liver" and liver["opacity"] == 0.3


def test_add_annotation_returns_id_and_renders(session, patient_dir):
    _load(session, patient_dir)
    replies = session.handle_message(
        _cmd(13, "add_annotation", position=[1.0, 2.0, 3.0],
             normal=[0, 0, 2], text="margin"))
    ack = _texts(replies)[0]
    assert ack["payload"]["annotation_id"] == 3     # fixture ships 1 and 2
    assert len(_packets(replies)) == 1
    scene_reply = _texts(session.handle_message(_cmd(14, "get_scene")))[0]
    assert len(scene_reply["payload"]["annotations"]) == 3


def test_pointer_ray_hits_an_organ(session, patient_dir):
    _load(session, patient_dir)
    # Fire from the coronal camera position straight at the workspace center.
    cam = session.scene.camera(48, 36)
    replies = session.handle_message(
        _cmd(15, "pointer_ray", origin=list(cam.eye), dir=list(cam.forward)))
    result = _texts(replies)[0]
    assert result["type"] == "pick_result"
    assert result["payload"]["kind"] == "mesh"
    assert result["payload"]["name"] in ("Liver", "Tumor", "Hepatic Vein")


def test_pointer_ray_miss_and_screen(session, patient_dir):
    _load(session, patient_dir)
    room = session.scene.room
    user_mm = (room.user_position + [0, 0, 1.5]) * 1000.0
    # Away from both organs and screen: straight up.
    replies = session.handle_message(
        _cmd(16, "pointer_ray", origin=list(user_mm), dir=[0, 0, 1]))
    assert _texts(replies)[0]["payload"]["kind"] == "miss"
    # Toward the screen: forward from the user position.
    replies = session.handle_message(
        _cmd(17, "pointer_ray", origin=list(user_mm), dir=[0, 1, 0.]))
    payload = _texts(replies)[0]["payload"]
    assert payload["kind"] in ("screen", "mesh")


def test_state_changing_before_load_acks_without_frame(session):
    replies = session.handle_message(_cmd(1, "set_view", view="sagittal"))
    assert _texts(replies)[0]["type"] == "ack"
    assert _packets(replies) == []


def test_load_failure_notifies_error(session, tmp_path):
    replies = session.handle_message(_cmd(21, "load_patient",
                                          path=str(tmp_path / "nope")))
    assert _texts(replies)[0]["type"] == "ack"
    deadline = time.time() + 10
    outbound = []
    while not outbound:
        assert time.time() < deadline
        outbound = session.pump()
        time.sleep(0.005)
    err = _texts(outbound)[0]
    assert err["type"] == "error" and err["id"] == 21
    assert err["payload"]["code"] == "load_failed"
