// Wire formats shared with the session service: JSON command envelopes
// over text frames, and binary frame packets with a 28-byte header
// (magic "IMFR", then little-endian u32 width, height, format, eye,
// sequence, payload length).

export const FORMAT_RAW = 0;
export const FORMAT_PNG = 1;

export const EYE_MONO = 0;
export const EYE_LEFT = 1;
export const EYE_RIGHT = 2;

export interface FramePacket {
  width: number;
  height: number;
  format: number;
  eye: number;
  sequence: number;
  payload: Uint8Array;
}

export interface Reply {
  id: number;
  type: string;
  payload: Record<string, unknown>;
}

export interface Organ {
  id: number;
  name: string;
  color: [number, number, number];
  opacity: number;
  visible: boolean;
}

export interface AnnotationInfo {
  id: number;
  position: [number, number, number];
  normal: [number, number, number];
  text: string;
}

export interface TransferPoint {
  value: number;
  rgba: [number, number, number, number];
}

export interface SlotInfo {
  id: string;
  kind: string;
  content: Record<string, unknown> | null;
}

export interface CameraState {
  yaw: number;
  pitch: number;
  distance_mm: number;
  center_mm: [number, number, number];
  vertical_fov: number;
}

export interface LabResult {
  name: string;
  value: string;
  unit: string;
  timestamp: string;
}

export interface PatientRecordInfo {
  name: string;
  age: string;
  sex: string;
  diagnosis: string;
  notes_html: string;
  labs: LabResult[];
  images: { file: string; caption: string; slot: string }[];
}

export interface SceneSummary {
  loaded: boolean;
  view: string;
  camera: CameraState;
  organs: Organ[];
  annotations: AnnotationInfo[];
  slots: SlotInfo[];
  record: PatientRecordInfo | null;
  has_volume: boolean;
  transfer: { reference_step_mm: number; points: TransferPoint[] };
  stereo?: { enabled: boolean; ipd_mm: number };
}

const MAGIC = 0x52464d49; // "IMFR" read as little-endian u32

export function decodeFramePacket(buffer: ArrayBuffer): FramePacket {
  if (buffer.byteLength < 28) {
    throw new Error(`frame packet too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new Error("bad frame packet magic");
  }
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const format = view.getUint32(12, true);
  const eye = view.getUint32(16, true);
  const sequence = view.getUint32(20, true);
  const length = view.getUint32(24, true);
  if (buffer.byteLength < 28 + length) {
    throw new Error("frame packet payload truncated");
  }
  return {
    width,
    height,
    format,
    eye,
    sequence,
    payload: new Uint8Array(buffer, 28, length),
  };
}

export function encodeCommand(
  id: number,
  type: string,
  payload: Record<string, unknown> = {},
): string {
  return JSON.stringify({ id, type, payload });
}

export function parseReply(text: string): Reply {
  const data = JSON.parse(text) as Record<string, unknown>;
  if (typeof data.id !== "number" || typeof data.type !== "string") {
    throw new Error("malformed reply envelope");
  }
  return {
    id: data.id,
    type: data.type,
    payload: (data.payload ?? {}) as Record<string, unknown>,
  };
}
