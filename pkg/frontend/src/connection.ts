// Session connection: opens the socket, syncs state via get_scene, routes
// replies and frame packets, and retries after failures.  Every command
// helper sends exactly one wire message.

import {
  decodeFramePacket,
  encodeCommand,
  parseReply,
  type Reply,
  type SceneSummary,
  type TransferPoint,
} from "./protocol.js";
import type { PointerRay } from "./interaction.js";
import type { ViewerState } from "./state.js";

export interface SocketLike {
  binaryType: string;
  onopen: ((event: unknown) => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: ((event: unknown) => void) | null;
  onerror: ((event: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionOptions {
  socketFactory?: SocketFactory;
  reconnectDelayMs?: number;
  /** Debounce window for transfer-function edits. */
  transferDebounceMs?: number;
  onPick?: (payload: Record<string, unknown>) => void;
}

export class ViewerConnection {
  readonly state: ViewerState;
  sentCount = 0;

  private readonly url: string;
  private readonly factory: SocketFactory;
  private readonly reconnectDelayMs: number;
  private readonly transferDebounceMs: number;
  private readonly onPick?: (payload: Record<string, unknown>) => void;
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, string>();
  private transferTimer: ReturnType<typeof setTimeout> | null = null;
  private closedByUser = false;

  constructor(url: string, state: ViewerState, options: ConnectionOptions = {}) {
    this.url = url;
    this.state = state;
    this.factory =
      options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.reconnectDelayMs = options.reconnectDelayMs ?? 2000;
    this.transferDebounceMs = options.transferDebounceMs ?? 250;
    this.onPick = options.onPick;
  }

  connect(): void {
    this.closedByUser = false;
    this.state.setStatus("connecting");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch (error) {
      this.handleFailure(`connection failed: ${String(error)}`);
      return;
    }
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.state.setStatus("live");
      this.getScene(); // re-sync on every (re)connect
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onerror = () => {
      // onclose follows; the detail is rarely useful cross-browser.
    };
    socket.onclose = () => {
      if (!this.closedByUser) {
        this.handleFailure("connection lost");
      }
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.transferTimer !== null) {
      clearTimeout(this.transferTimer);
      this.transferTimer = null;
    }
    this.socket?.close();
    this.state.setStatus("closed");
  }

  private handleFailure(detail: string): void {
    this.state.setStatus("error", detail);
    if (!this.closedByUser && this.reconnectDelayMs > 0) {
      setTimeout(() => {
        if (!this.closedByUser) {
          this.connect();
        }
      }, this.reconnectDelayMs);
    }
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      this.handleReply(parseReply(data));
      return;
    }
    if (data instanceof ArrayBuffer) {
      this.state.acceptFrame(decodeFramePacket(data));
      return;
    }
    // Some socket implementations hand Buffers or typed arrays.
    const anyData = data as { buffer?: ArrayBuffer; byteOffset?: number; byteLength?: number };
    if (anyData && anyData.buffer instanceof ArrayBuffer) {
      const slice = anyData.buffer.slice(
        anyData.byteOffset ?? 0,
        (anyData.byteOffset ?? 0) + (anyData.byteLength ?? anyData.buffer.byteLength),
      );
      this.state.acceptFrame(decodeFramePacket(slice));
    }
  }

  private handleReply(reply: Reply): void {
    this.pending.delete(reply.id);
    switch (reply.type) {
      case "scene":
      case "patient_loaded":
        this.state.applyScene(reply.payload as unknown as SceneSummary);
        break;
      case "pick_result":
        this.state.lastPick = reply.payload;
        this.onPick?.(reply.payload);
        this.state.notify();
        break;
      case "error":
        this.state.statusDetail = String(reply.payload.detail ?? "server error");
        this.state.notify();
        break;
      case "ack":
      default:
        break;
    }
  }

  /** Send one command; returns its request id. */
  send(type: string, payload: Record<string, unknown> = {}): number {
    if (!this.socket) {
      throw new Error("not connected");
    }
    const id = this.nextId++;
    this.pending.set(id, type);
    this.socket.send(encodeCommand(id, type, payload));
    this.sentCount += 1;
    return id;
  }

  // -- command helpers (one message each) --

  getScene(): number {
    return this.send("get_scene");
  }

  loadPatient(path: string): number {
    return this.send("load_patient", { path });
  }

  setView(view: string): number {
    return this.send("set_view", { view });
  }

  orbit(yaw: number, pitch: number, zoom: number): number {
    return this.send("orbit", { yaw, pitch, zoom });
  }

  setOrganOpacity(mesh: number | string, alpha: number): number {
    return this.send("set_organ_opacity", { mesh, alpha });
  }

  setOrganVisible(mesh: number | string, visible: boolean): number {
    return this.send("set_organ_visible", { mesh, visible });
  }

  setStereo(enabled: boolean, ipdMm: number): number {
    return this.send("set_stereo", { enabled, ipd_mm: ipdMm });
  }

  addAnnotation(
    position: [number, number, number],
    normal: [number, number, number],
    text: string,
  ): number {
    return this.send("add_annotation", { position, normal, text });
  }

  pointerRay(ray: PointerRay): number {
    return this.send("pointer_ray", { origin: ray.origin, dir: ray.dir });
  }

  requestFrame(): number {
    return this.send("request_frame");
  }

  setTransferFunction(points: TransferPoint[], referenceStepMm: number): number {
    return this.send("set_transfer_function", {
      points,
      reference_step_mm: referenceStepMm,
    });
  }

  /** Editor keystrokes collapse into one message per quiet period. */
  sendTransferFunctionDebounced(): void {
    if (this.transferTimer !== null) {
      clearTimeout(this.transferTimer);
    }
    this.transferTimer = setTimeout(() => {
      this.transferTimer = null;
      const points = this.state.normalizedTransferPoints();
      if (points.length >= 2) {
        this.setTransferFunction(points, this.state.referenceStep);
      }
    }, this.transferDebounceMs);
  }
}
