"""Patient directory loading.

Expected layout under one patient directory:

    patient.json          textual record (optional)
    dicom/                one file per CT slice (optional)
    meshes/meshes.json    manifest: [{"file", "name", "color", "opacity"}]
    meshes/*.obj          indexed-triangle text meshes
    annotations.json      point markers (optional)
    transfer.json         transfer function (optional, CT preset otherwise)
    images/               PNGs referenced from the record

Every loader is a pure function of the directory contents, so whole
patients can be loaded on any background worker and the resulting bundle
handed across contexts; nothing in it is mutated afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .dicom import assemble_series, parse_dicom_file
from .errors import ImhotepError, ManifestEntryUnreadable, ManifestMissing, PatientDirectoryError
from .mesh import Appearance, TriangleMesh, load_mesh_file
from .scene import Annotation, RoomLayout, annotations_from_json
from .transfer import TransferFunction, default_ct_preset
from .volume import Volume


@dataclass(frozen=True)
class LabResult:
    name: str
    value: str
    unit: str
    timestamp: str


@dataclass(frozen=True)
class RecordImage:
    path: str           # relative to the patient directory
    caption: str
    slot_id: str


@dataclass(frozen=True)
class PatientRecord:
    name: str = ""
    age: str = ""
    sex: str = ""
    diagnosis: str = ""
    notes_html: str = ""
    labs: tuple[LabResult, ...] = ()
    images: tuple[RecordImage, ...] = ()


class PatientData(NamedTuple):
    """Everything one patient directory contributes, loaded in one pass."""

    volume: Volume | None
    meshes: list[tuple[TriangleMesh, Appearance]]
    record: PatientRecord
    annotations: list[Annotation]
    transfer: TransferFunction


def _read_json(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_record(root: Path, room: RoomLayout) -> PatientRecord:
    path = root / "patient.json"
    if not path.exists():
        return PatientRecord()
    try:
        data = _read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise PatientDirectoryError(f"patient.json: {exc}") from None
    labs = tuple(
        LabResult(name=str(lab.get("name", "")), value=str(lab.get("value", "")),
                  unit=str(lab.get("unit", "")), timestamp=str(lab.get("timestamp", "")))
        for lab in data.get("labs", [])
    )
    slot_ids = {slot.slot_id for slot in room.screen.slots}
    images = []
    for img in data.get("images", []):
        rel = str(img["file"])
        slot = str(img.get("slot", ""))
        if slot not in slot_ids:
            raise PatientDirectoryError(
                f"patient.json image {rel!r} references unknown screen slot {slot!r}")
        if not (root / rel).exists():
            raise PatientDirectoryError(f"patient.json image file {rel!r} does not exist")
        images.append(RecordImage(path=rel, caption=str(img.get("caption", "")), slot_id=slot))
    return PatientRecord(
        name=str(data.get("name", "")),
        age=str(data.get("age", "")),
        sex=str(data.get("sex", "")),
        diagnosis=str(data.get("diagnosis", "")),
        notes_html=str(data.get("notes_html", "")),
        labs=labs,
        images=tuple(images),
    )


def _load_meshes(root: Path) -> list[tuple[TriangleMesh, Appearance]]:
    manifest_path = root / "meshes" / "meshes.json"
    if not manifest_path.exists():
        raise ManifestMissing(f"{manifest_path} not found")
    try:
        manifest = _read_json(manifest_path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestMissing(f"{manifest_path}: {exc}") from None
    if not isinstance(manifest, list):
        raise ManifestMissing(f"{manifest_path}: manifest must be a JSON array")
    out = []
    for entry in manifest:
        name = str(entry.get("name", entry.get("file", "?")))
        try:
            rel = str(entry["file"])
            appearance = Appearance(
                name=str(entry["name"]),
                color=tuple(float(c) for c in entry["color"]),
                opacity=float(entry["opacity"]),
            )
            mesh = load_mesh_file(root / "meshes" / rel)
        except FileNotFoundError:
            raise ManifestEntryUnreadable(name, "mesh file not found") from None
        except (KeyError, TypeError, ValueError, ImhotepError) as exc:
            raise ManifestEntryUnreadable(name, str(exc)) from None
        out.append((mesh, appearance))
    return out


def _load_volume(root: Path) -> Volume | None:
    dicom_dir = root / "dicom"
    if not dicom_dir.is_dir():
        return None
    files = sorted(p for p in dicom_dir.iterdir() if p.is_file())
    if not files:
        return None
    datasets = []
    for path in files:
        with open(path, "rb") as fh:
            datasets.append(parse_dicom_file(fh.read()))
    return assemble_series(datasets)


def _load_annotations(root: Path) -> list[Annotation]:
    path = root / "annotations.json"
    if not path.exists():
        return []
    try:
        return annotations_from_json(_read_json(path))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise PatientDirectoryError(f"annotations.json: {exc}") from None


def _load_transfer(root: Path) -> TransferFunction:
    path = root / "transfer.json"
    if not path.exists():
        return default_ct_preset()
    try:
        return TransferFunction.from_json_dict(_read_json(path))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise PatientDirectoryError(f"transfer.json: {exc}") from None


def load_patient_directory(path: str | Path, room: RoomLayout | None = None) -> PatientData:
    """Load one patient directory as a single aggregate result.

    The mesh manifest is required; volume, record, annotations and
    transfer function are optional and fall back to empty/default values.
    Returning one bundle lets callers schedule the whole load as a single
    background task.
    """
    root = Path(path)
    if not root.is_dir():
        raise PatientDirectoryError(f"{root} is not a directory")
    room = room or RoomLayout.default()
    return PatientData(
        volume=_load_volume(root),
        meshes=_load_meshes(root),
        record=_load_record(root, room),
        annotations=_load_annotations(root),
        transfer=_load_transfer(root),
    )
