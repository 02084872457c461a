"""Exception catalog for the engine.

Every error raised by the public API derives from ImhotepError so callers
(CLI, session service) can distinguish data problems from programming bugs.
"""

from __future__ import annotations


class ImhotepError(Exception):
    """Base class for all engine errors."""


# --- DICOM parsing and series assembly ---

class DicomError(ImhotepError):
    """Base class for DICOM file and series errors."""


class BadMagic(DicomError):
    """Input is neither preamble+DICM nor parseable headerless implicit-LE."""


class UnsupportedTransferSyntax(DicomError):
    """Transfer syntax other than implicit/explicit little-endian."""


class TruncatedFile(DicomError):
    """A declared element length runs past the end of the input."""


class InconsistentGeometry(DicomError):
    """Slices of one series disagree on in-plane geometry tags."""


class NonUniformSpacing(DicomError):
    """Inter-slice gaps differ by more than 1% of the mean gap."""


class SingleSlice(DicomError):
    """A series needs at least two slices to define slice spacing."""


# --- Mesh loading ---

class MeshError(ImhotepError):
    """Base class for mesh parsing errors."""


class MalformedLine(MeshError):
    """A line does not match the supported vertex/normal/face grammar."""


class IndexOutOfRange(MeshError):
    """A face references a vertex or normal that was never declared."""


class NonTriangleFace(MeshError):
    """Faces must have exactly three corners; quads are rejected."""


# --- Patient directory ---

class PatientDirectoryError(ImhotepError):
    """Base class for patient-directory layout errors."""


class ManifestMissing(PatientDirectoryError):
    """meshes/meshes.json is absent."""


class ManifestEntryUnreadable(PatientDirectoryError):
    """A manifest entry names a file that is absent or malformed."""

    def __init__(self, entry: str, reason: str):
        super().__init__(f"manifest entry {entry!r}: {reason}")
        self.entry = entry
        self.reason = reason


# --- Scalar-field sampling ---

class OutOfBounds(ImhotepError):
    """A sample position lies outside the volume's interpolation domain."""


# --- Rendering ---

class DegenerateTransform(ImhotepError):
    """A model matrix is not invertible."""


# --- Scene ---

class EmptyScene(ImhotepError):
    """No meshes and no volume: nothing to frame."""


class UnknownPreset(ImhotepError):
    """View preset name was never registered."""


class UnknownMesh(ImhotepError):
    """Mesh id does not exist in the scene."""


# --- Runtime ---

class ExecutorShutDown(ImhotepError):
    """Task submitted after the executor was shut down."""


# --- Service ---

class BindFailure(ImhotepError):
    """The service could not bind its address."""
