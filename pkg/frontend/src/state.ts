// Viewer-side state.  The server is the single source of truth: nothing
// here mutates scene data except in response to server replies, and
// frames display strictly in sequence order (stale arrivals are dropped).

import type {
  AnnotationInfo,
  CameraState,
  FramePacket,
  Organ,
  PatientRecordInfo,
  SceneSummary,
  SlotInfo,
  TransferPoint,
} from "./protocol.js";
import { EYE_LEFT, EYE_MONO, EYE_RIGHT } from "./protocol.js";

export type ConnectionStatus = "connecting" | "live" | "error" | "closed";

export interface DisplayedFrame {
  sequence: number;
  /** One packet for mono, [left, right] for stereo. */
  eyes: FramePacket[];
}

export type StateListener = (state: ViewerState) => void;

export class ViewerState {
  status: ConnectionStatus = "connecting";
  statusDetail = "";
  loaded = false;
  view = "coronal";
  camera: CameraState | null = null;
  organs: Organ[] = [];
  annotations: AnnotationInfo[] = [];
  slots: SlotInfo[] = [];
  record: PatientRecordInfo | null = null;
  transferPoints: TransferPoint[] = [];
  referenceStep = 1.0;
  stereoEnabled = false;
  ipdMm = 64;
  annotationDraft = "";
  selectedSlot: SlotInfo | null = null;
  lastPick: Record<string, unknown> | null = null;

  displayed: DisplayedFrame | null = null;
  repaintCount = 0;

  private pendingStereo = new Map<number, Map<number, FramePacket>>();
  private listeners: StateListener[] = [];

  get displayedSequence(): number {
    return this.displayed ? this.displayed.sequence : -1;
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  notify(): void {
    for (const listener of this.listeners) {
      listener(this);
    }
  }

  setStatus(status: ConnectionStatus, detail = ""): void {
    this.status = status;
    this.statusDetail = detail;
    this.notify();
  }

  applyScene(payload: SceneSummary): void {
    this.loaded = payload.loaded;
    this.view = payload.view;
    this.camera = payload.camera ?? null;
    this.organs = payload.organs;
    this.annotations = payload.annotations;
    this.slots = payload.slots;
    this.record = payload.record;
    this.transferPoints = payload.transfer.points.map((p) => ({
      value: p.value,
      rgba: [...p.rgba] as [number, number, number, number],
    }));
    this.referenceStep = payload.transfer.reference_step_mm;
    if (payload.stereo) {
      this.stereoEnabled = payload.stereo.enabled;
      this.ipdMm = payload.stereo.ipd_mm;
    }
    this.notify();
  }

  /**
   * Feed one incoming packet; returns true when it (possibly with its
   * stereo partner) became the displayed frame.  Packets whose sequence
   * is not newer than the displayed frame are discarded, so display
   * order equals sequence order regardless of arrival order.
   */
  acceptFrame(packet: FramePacket): boolean {
    if (packet.sequence <= this.displayedSequence) {
      return false;
    }
    if (packet.eye === EYE_MONO) {
      this.display({ sequence: packet.sequence, eyes: [packet] });
      return true;
    }
    const pending = this.pendingStereo.get(packet.sequence) ?? new Map();
    pending.set(packet.eye, packet);
    this.pendingStereo.set(packet.sequence, pending);
    const left = pending.get(EYE_LEFT);
    const right = pending.get(EYE_RIGHT);
    if (left && right) {
      this.pendingStereo.delete(packet.sequence);
      this.display({ sequence: packet.sequence, eyes: [left, right] });
      return true;
    }
    return false;
  }

  private display(frame: DisplayedFrame): void {
    this.displayed = frame;
    this.repaintCount += 1;
    for (const seq of [...this.pendingStereo.keys()]) {
      if (seq <= frame.sequence) {
        this.pendingStereo.delete(seq);
      }
    }
    this.notify();
  }

  /** Editor points sorted and strictly increasing, ready to send. */
  normalizedTransferPoints(): TransferPoint[] {
    const sorted = [...this.transferPoints].sort((a, b) => a.value - b.value);
    const out: TransferPoint[] = [];
    for (const point of sorted) {
      if (out.length === 0 || point.value > out[out.length - 1].value) {
        out.push(point);
      }
    }
    return out;
  }
}
