"""Native DICOM parsing and CT series assembly.

Only the two uncompressed little-endian transfer syntaxes are accepted;
anything compressed is a hard error rather than a silent skip, which keeps
the parser deterministic and auditable.  Files may carry the standard
128-byte preamble plus "DICM" magic, or be headerless implicit-LE.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DicomError,
    InconsistentGeometry,
    NonUniformSpacing,
    SingleSlice,
    TruncatedFile,
    UnsupportedTransferSyntax,
)
from .volume import Volume

UID_IMPLICIT_LE = "1.2.840.10008.1.2"
UID_EXPLICIT_LE = "1.2.840.10008.1.2.1"

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_IMAGE_POSITION = (0x0020, 0x0032)
TAG_IMAGE_ORIENTATION = (0x0020, 0x0037)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

_ITEM = (0xFFFE, 0xE000)
_ITEM_DELIM = (0xFFFE, 0xE00D)
_SEQ_DELIM = (0xFFFE, 0xE0DD)
_UNDEFINED = 0xFFFFFFFF

# VRs whose explicit encoding uses 2 reserved bytes + 32-bit length.
_LONG_VRS = {b"OB", b"OW", b"OF", b"OD", b"OL", b"SQ", b"UC", b"UR", b"UT", b"UN"}

_REQUIRED_IMAGE_TAGS = {
    TAG_ROWS: "Rows",
    TAG_COLUMNS: "Columns",
    TAG_PIXEL_SPACING: "PixelSpacing",
    TAG_IMAGE_POSITION: "ImagePositionPatient",
    TAG_IMAGE_ORIENTATION: "ImageOrientationPatient",
    TAG_RESCALE_SLOPE: "RescaleSlope",
    TAG_RESCALE_INTERCEPT: "RescaleIntercept",
    TAG_BITS_ALLOCATED: "BitsAllocated",
}


class TransferSyntax(enum.Enum):
    IMPLICIT_LE = UID_IMPLICIT_LE
    EXPLICIT_LE = UID_EXPLICIT_LE


@dataclass
class DicomDataset:
    """Decoded top-level elements of one DICOM file."""

    tags: dict[tuple[int, int], bytes] = field(default_factory=dict)
    pixel_data: bytes = b""
    transfer_syntax: TransferSyntax = TransferSyntax.EXPLICIT_LE

    def raw(self, tag: tuple[int, int]) -> bytes:
        try:
            return self.tags[tag]
        except KeyError:
            raise DicomError(f"missing tag ({tag[0]:04X},{tag[1]:04X})") from None

    def uint(self, tag: tuple[int, int]) -> int:
        """Decode a binary US/UL value."""
        raw = self.raw(tag)
        if len(raw) == 2:
            return struct.unpack("<H", raw)[0]
        if len(raw) == 4:
            return struct.unpack("<I", raw)[0]
        raise DicomError(f"tag ({tag[0]:04X},{tag[1]:04X}) has unexpected length {len(raw)}")

    def text(self, tag: tuple[int, int]) -> str:
        return self.raw(tag).decode("ascii", errors="replace").strip("\x00 ")

    def floats(self, tag: tuple[int, int]) -> list[float]:
        """Decode a decimal-string value list (backslash separated)."""
        txt = self.text(tag)
        try:
            return [float(part) for part in txt.split("\\") if part != ""]
        except ValueError:
            raise DicomError(f"tag ({tag[0]:04X},{tag[1]:04X}) is not numeric: {txt!r}") from None

    def validate_image(self) -> None:
        """Require the geometric closure of tags plus a consistent pixel buffer."""
        for tag, name in _REQUIRED_IMAGE_TAGS.items():
            if tag not in self.tags:
                raise DicomError(f"image dataset missing required tag {name}")
        rows = self.uint(TAG_ROWS)
        cols = self.uint(TAG_COLUMNS)
        bits = self.uint(TAG_BITS_ALLOCATED)
        if bits % 8 != 0 or bits not in (8, 16):
            raise DicomError(f"unsupported BitsAllocated {bits}")
        expected = rows * cols * (bits // 8)
        if len(self.pixel_data) != expected:
            raise DicomError(
                f"pixel data length {len(self.pixel_data)} != Rows*Columns*bytes {expected}"
            )


class _Reader:
    """Cursor over the raw byte string with truncation checks."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedFile(f"need {n} bytes at offset {self.pos}, have {self.remaining()}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def peek_tag(self) -> tuple[int, int]:
        if self.pos + 4 > len(self.data):
            raise TruncatedFile("truncated tag")
        return struct.unpack_from("<HH", self.data, self.pos)


def _read_explicit_header(r: _Reader) -> tuple[tuple[int, int], bytes, int]:
    tag = (r.u16(), r.u16())
    if tag in (_ITEM, _ITEM_DELIM, _SEQ_DELIM):
        return tag, b"", r.u32()
    vr = r.take(2)
    if not (vr.isalpha() and vr.isupper()):
        raise DicomError(f"invalid VR {vr!r} at offset {r.pos - 2}")
    if vr in _LONG_VRS:
        r.take(2)
        length = r.u32()
    else:
        length = r.u16()
    return tag, vr, length


def _read_implicit_header(r: _Reader) -> tuple[tuple[int, int], bytes, int]:
    tag = (r.u16(), r.u16())
    return tag, b"", r.u32()


def _skip_undefined_sequence(r: _Reader, explicit: bool) -> None:
    """Advance past the items of an undefined-length sequence."""
    while True:
        tag = (r.u16(), r.u16())
        length = r.u32()
        if tag == _SEQ_DELIM:
            return
        if tag != _ITEM:
            raise DicomError(f"unexpected tag ({tag[0]:04X},{tag[1]:04X}) inside sequence")
        if length != _UNDEFINED:
            r.take(length)
            continue
        # Undefined-length item: walk its elements until the item delimiter.
        while True:
            if r.peek_tag() == _ITEM_DELIM:
                r.take(4)
                r.u32()
                break
            _read_element(r, explicit, into=None)


def _read_element(r: _Reader, explicit: bool, into: DicomDataset | None) -> None:
    """Read one data element, recording it on `into` when given."""
    tag, vr, length = (_read_explicit_header(r) if explicit else _read_implicit_header(r))
    if length == _UNDEFINED:
        if tag == TAG_PIXEL_DATA:
            raise UnsupportedTransferSyntax("encapsulated (compressed) pixel data")
        if vr not in (b"SQ", b"UN", b""):
            raise DicomError(f"undefined length on VR {vr!r}")
        _skip_undefined_sequence(r, explicit)
        if into is not None:
            into.tags[tag] = b""
        return
    value = r.take(length)
    if into is None:
        return
    if tag == TAG_PIXEL_DATA:
        into.pixel_data = value
    else:
        into.tags[tag] = value


def _parse_meta_group(r: _Reader) -> str:
    """Parse the explicit-LE file meta group; returns the transfer syntax UID."""
    uid = ""
    while r.remaining() >= 8 and r.peek_tag()[0] == 0x0002:
        tag, _vr, length = _read_explicit_header(r)
        if length == _UNDEFINED:
            raise DicomError("undefined length in file meta group")
        value = r.take(length)
        if tag == TAG_TRANSFER_SYNTAX:
            uid = value.decode("ascii", errors="replace").strip("\x00 ")
    return uid


def _parse_body(r: _Reader, syntax: TransferSyntax) -> DicomDataset:
    ds = DicomDataset(transfer_syntax=syntax)
    explicit = syntax is TransferSyntax.EXPLICIT_LE
    while r.remaining() > 0:
        if r.remaining() < 8:
            raise TruncatedFile("trailing bytes too short for an element header")
        _read_element(r, explicit, into=ds)
    return ds


def parse_dicom_file(data: bytes) -> DicomDataset:
    """Parse one DICOM file image into a flat top-level dataset.

    Accepts preamble+"DICM" files in implicit or explicit little-endian,
    or headerless implicit-LE as a fallback.  Compressed transfer
    syntaxes raise UnsupportedTransferSyntax.
    """
    if len(data) >= 132 and data[128:132] == b"DICM":
        r = _Reader(data, 132)
        uid = _parse_meta_group(r)
        if uid == UID_IMPLICIT_LE:
            syntax = TransferSyntax.IMPLICIT_LE
        elif uid in (UID_EXPLICIT_LE, ""):
            # Files written without a meta group UID default to explicit here.
            syntax = TransferSyntax.EXPLICIT_LE
        else:
            raise UnsupportedTransferSyntax(f"transfer syntax {uid}")
        return _parse_body(r, syntax)
    # Headerless fallback: the whole stream must parse as implicit-LE.
    try:
        return _parse_body(_Reader(data, 0), TransferSyntax.IMPLICIT_LE)
    except UnsupportedTransferSyntax:
        raise
    except DicomError as exc:
        raise BadMagic(f"no DICM magic and not implicit-LE ({exc})") from None


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _slice_raw_pixels(ds: DicomDataset) -> np.ndarray:
    rows = ds.uint(TAG_ROWS)
    cols = ds.uint(TAG_COLUMNS)
    bits = ds.uint(TAG_BITS_ALLOCATED)
    signed = False
    if TAG_PIXEL_REPRESENTATION in ds.tags:
        signed = ds.uint(TAG_PIXEL_REPRESENTATION) == 1
    if bits == 16:
        dtype = np.int16 if signed else np.uint16
    else:
        dtype = np.int8 if signed else np.uint8
    return np.frombuffer(ds.pixel_data, dtype=dtype).reshape(rows, cols)


def assemble_series(datasets: list[DicomDataset]) -> Volume:
    """Order slices along their shared normal and stack them into a Volume.

    The result is independent of the input ordering: slices are sorted by
    the projection of ImagePositionPatient onto the plane normal.  Voxels
    are rescaled to Hounsfield units (slope * raw + intercept, rounded
    half away from zero) and stored as int16.
    """
    if len(datasets) < 2:
        raise SingleSlice(f"need at least 2 slices, got {len(datasets)}")
    for ds in datasets:
        ds.validate_image()

    first = datasets[0]
    rows = first.uint(TAG_ROWS)
    cols = first.uint(TAG_COLUMNS)
    pixel_spacing = first.floats(TAG_PIXEL_SPACING)
    orientation6 = first.floats(TAG_IMAGE_ORIENTATION)
    if len(pixel_spacing) != 2 or len(orientation6) != 6:
        raise DicomError("PixelSpacing needs 2 values and ImageOrientationPatient needs 6")
    for ds in datasets[1:]:
        if ds.uint(TAG_ROWS) != rows or ds.uint(TAG_COLUMNS) != cols:
            raise InconsistentGeometry("slices disagree on Rows/Columns")
        if ds.floats(TAG_PIXEL_SPACING) != pixel_spacing:
            raise InconsistentGeometry("slices disagree on PixelSpacing")
        if ds.floats(TAG_IMAGE_ORIENTATION) != orientation6:
            raise InconsistentGeometry("slices disagree on ImageOrientationPatient")

    row_dir = np.array(orientation6[0:3], dtype=np.float64)
    col_dir = np.array(orientation6[3:6], dtype=np.float64)
    normal = np.cross(row_dir, col_dir)
    norm_len = np.linalg.norm(normal)
    if norm_len < 1e-9:
        raise InconsistentGeometry("orientation rows are parallel")
    normal /= norm_len

    positions = [np.array(ds.floats(TAG_IMAGE_POSITION), dtype=np.float64) for ds in datasets]
    if any(p.shape != (3,) for p in positions):
        raise DicomError("ImagePositionPatient needs 3 values")
    projections = np.array([float(p @ normal) for p in positions])
    order = np.argsort(projections, kind="stable")

    gaps = np.diff(projections[order])
    mean_gap = float(gaps.mean())
    if mean_gap <= 0:
        raise NonUniformSpacing("coincident or unordered slice positions")
    if np.any(np.abs(gaps - mean_gap) > 0.01 * mean_gap):
        raise NonUniformSpacing(
            f"slice gaps {gaps.tolist()} deviate more than 1% from mean {mean_gap:.6g}"
        )

    slabs = []
    for i in order:
        ds = datasets[int(i)]
        raw = _slice_raw_pixels(ds).astype(np.float64)
        slope = ds.floats(TAG_RESCALE_SLOPE)[0]
        intercept = ds.floats(TAG_RESCALE_INTERCEPT)[0]
        hu = _round_half_away(slope * raw + intercept)
        slabs.append(np.clip(hu, -32768, 32767).astype(np.int16))
    voxels = np.stack(slabs, axis=0)  # (nz, ny, nx)

    # PixelSpacing is (row spacing, column spacing) = (y, x).
    spacing = np.array([pixel_spacing[1], pixel_spacing[0], mean_gap], dtype=np.float64)
    orientation = np.column_stack([row_dir, col_dir, normal])
    origin = positions[int(order[0])]
    return Volume(voxels=voxels, spacing=spacing, origin=origin, orientation=orientation)
