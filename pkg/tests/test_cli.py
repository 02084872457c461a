"""CLI: deterministic batch rendering and directory validation."""

from __future__ import annotations

import hashlib

import pytest

from imhotep.cli import run


def _sha(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_render_twice_byte_identical(patient_dir, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        code = run(["render", "--patient", str(patient_dir), "--view", "coronal",
                    "--out", str(out), "--size", "64x48", "--step", "4.0"])
        assert code == 0
    assert _sha(out_a.with_suffix(".png")) == _sha(out_b.with_suffix(".png"))


def test_render_worker_count_does_not_change_output(patient_dir, tmp_path):
    hashes = []
    for workers in ("1", "8"):
        out = tmp_path / f"w{workers}"
        code = run(["render", "--patient", str(patient_dir), "--out", str(out),
                    "--size", "64x48", "--step", "4.0", "--workers", workers])
        assert code == 0
        hashes.append(_sha(out.with_suffix(".png")))
    assert hashes[0] == hashes[1]


def test_render_stereo_writes_eye_pair(patient_dir, tmp_path):
    out = tmp_path / "pair"
    code = run(["render", "--patient", str(patient_dir), "--out", str(out),
                "--stereo", "--ipd", "64", "--size", "48x36", "--step", "4.0"])
    assert code == 0
    assert (tmp_path / "pair_left.png").exists()
    assert (tmp_path / "pair_right.png").exists()


def test_render_missing_patient_is_data_error(tmp_path):
    code = run(["render", "--patient", str(tmp_path / "void"),
                "--out", str(tmp_path / "x")])
    assert code == 1


def test_bad_arguments_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        run(["render", "--patient"])
    assert info.value.code == 2


def test_validate_clean_fixture(patient_dir, capsys):
    assert run(["validate", str(patient_dir)]) == 0
    out = capsys.readouterr().out
    assert "valid" in out


def test_validate_names_corrupt_dicom(fresh_patient_dir, capsys):
    bad = fresh_patient_dir / "dicom" / "slice_002.dcm"
    bad.write_bytes(b"\x00" * 64)
    assert run(["validate", str(fresh_patient_dir)]) == 1
    out = capsys.readouterr().out
    assert "slice_002.dcm" in out and "ERROR" in out


def test_validate_names_broken_mesh(fresh_patient_dir, capsys):
    (fresh_patient_dir / "meshes" / "organ_1.obj").write_text("f 1 2 3 4\n")
    assert run(["validate", str(fresh_patient_dir)]) == 1
    assert "organ_1.obj" in capsys.readouterr().out


def test_env_override_for_workers(patient_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("IMHOTEP_WORKERS", "2")
    out = tmp_path / "env"
    assert run(["render", "--patient", str(patient_dir), "--out", str(out),
                "--size", "32x24", "--step", "4.0"]) == 0
    assert out.with_suffix(".png").exists()
