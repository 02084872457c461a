// Side panels: status, views, stereo, organs, transfer editor,
// annotations, and the 2D-screen record content.  Each control sends
// exactly one command per completed user action (sliders on "change",
// transfer edits debounced by the connection).

import type { ViewerConnection } from "./connection.js";
import type { SlotInfo } from "./protocol.js";
import type { ViewerState } from "./state.js";

const VIEWS = ["coronal", "sagittal", "transverse"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class Panels {
  readonly root: HTMLElement;
  private readonly connection: ViewerConnection;
  private readonly status: HTMLElement;
  private readonly organList: HTMLElement;
  private readonly annotationList: HTMLElement;
  private readonly transferList: HTMLElement;
  private readonly slotPanel: HTMLElement;
  private readonly annotationInput: HTMLInputElement;

  constructor(root: HTMLElement, connection: ViewerConnection) {
    this.root = root;
    this.connection = connection;

    this.status = el("div", "status-banner", "connecting…");
    root.appendChild(this.status);

    const viewBox = el("section", "panel views");
    viewBox.appendChild(el("h3", undefined, "View"));
    for (const view of VIEWS) {
      const button = el("button", "view-button", view);
      button.dataset.view = view;
      button.addEventListener("click", () => this.connection.setView(view));
      viewBox.appendChild(button);
    }
    const stereoLabel = el("label", "stereo-toggle");
    const stereoBox = el("input") as HTMLInputElement;
    stereoBox.type = "checkbox";
    stereoBox.className = "stereo-checkbox";
    const ipd = el("input") as HTMLInputElement;
    ipd.type = "number";
    ipd.className = "ipd-input";
    ipd.value = "64";
    ipd.min = "0";
    const sendStereo = () =>
      this.connection.setStereo(stereoBox.checked, Number(ipd.value));
    stereoBox.addEventListener("change", sendStereo);
    ipd.addEventListener("change", sendStereo);
    stereoLabel.append(stereoBox, "stereo, ipd mm ", ipd);
    viewBox.appendChild(stereoLabel);
    root.appendChild(viewBox);

    const organBox = el("section", "panel organs");
    organBox.appendChild(el("h3", undefined, "Organs"));
    this.organList = el("div", "organ-list");
    organBox.appendChild(this.organList);
    root.appendChild(organBox);

    const transferBox = el("section", "panel transfer");
    transferBox.appendChild(el("h3", undefined, "Transfer function"));
    this.transferList = el("div", "transfer-list");
    transferBox.appendChild(this.transferList);
    const addPoint = el("button", "transfer-add", "add point");
    addPoint.addEventListener("click", () => {
      const state = this.connection.state;
      const last = state.transferPoints[state.transferPoints.length - 1];
      state.transferPoints.push({
        value: last ? last.value + 100 : 0,
        rgba: [1, 1, 1, 0.5],
      });
      state.notify();
      this.connection.sendTransferFunctionDebounced();
    });
    transferBox.appendChild(addPoint);
    root.appendChild(transferBox);

    const annBox = el("section", "panel annotations");
    annBox.appendChild(el("h3", undefined, "Annotations"));
    this.annotationList = el("ul", "annotation-list");
    annBox.appendChild(this.annotationList);
    this.annotationInput = el("input", "annotation-draft") as HTMLInputElement;
    this.annotationInput.placeholder = "label text, then click the model";
    this.annotationInput.addEventListener("input", () => {
      this.connection.state.annotationDraft = this.annotationInput.value;
    });
    annBox.appendChild(this.annotationInput);
    root.appendChild(annBox);

    this.slotPanel = el("section", "panel slots");
    this.slotPanel.appendChild(el("h3", undefined, "2D screen"));
    root.appendChild(this.slotPanel);
  }

  render(state: ViewerState): void {
    this.status.textContent =
      state.status === "live"
        ? state.loaded
          ? `live — ${state.view}`
          : "live — waiting for patient data"
        : `${state.status}${state.statusDetail ? ": " + state.statusDetail : ""}`;
    this.status.dataset.status = state.status;

    this.renderOrgans(state);
    this.renderTransfer(state);
    this.renderAnnotations(state);
    this.renderSlots(state);
  }

  private renderOrgans(state: ViewerState): void {
    this.organList.replaceChildren();
    for (const organ of state.organs) {
      const row = el("div", "organ-row");
      row.dataset.organId = String(organ.id);
      const swatch = el("span", "organ-swatch");
      swatch.style.backgroundColor = `rgb(${organ.color
        .map((c) => Math.round(c * 255))
        .join(",")})`;
      const visible = el("input") as HTMLInputElement;
      visible.type = "checkbox";
      visible.className = "organ-visible";
      visible.checked = organ.visible;
      visible.addEventListener("change", () =>
        this.connection.setOrganVisible(organ.id, visible.checked),
      );
      const name = el("span", "organ-name", organ.name);
      const slider = el("input", "organ-opacity") as HTMLInputElement;
      slider.type = "range";
      slider.min = "0";
      slider.max = "1";
      slider.step = "0.05";
      slider.value = String(organ.opacity);
      slider.addEventListener("change", () =>
        this.connection.setOrganOpacity(organ.id, Number(slider.value)),
      );
      row.append(visible, swatch, name, slider);
      this.organList.appendChild(row);
    }
  }

  private renderTransfer(state: ViewerState): void {
    this.transferList.replaceChildren();
    state.transferPoints.forEach((point, index) => {
      const row = el("div", "transfer-row");
      const value = el("input", "tf-value") as HTMLInputElement;
      value.type = "number";
      value.value = String(point.value);
      value.addEventListener("input", () => {
        point.value = Number(value.value);
        this.connection.sendTransferFunctionDebounced();
      });
      row.appendChild(value);
      (["r", "g", "b", "a"] as const).forEach((channel, c) => {
        const input = el("input", `tf-${channel}`) as HTMLInputElement;
        input.type = "number";
        input.min = "0";
        input.max = "1";
        input.step = "0.05";
        input.value = String(point.rgba[c]);
        input.addEventListener("input", () => {
          point.rgba[c] = Math.max(0, Math.min(1, Number(input.value)));
          this.connection.sendTransferFunctionDebounced();
        });
        row.appendChild(input);
      });
      const remove = el("button", "tf-remove", "×");
      remove.addEventListener("click", () => {
        state.transferPoints.splice(index, 1);
        state.notify();
        this.connection.sendTransferFunctionDebounced();
      });
      row.appendChild(remove);
      this.transferList.appendChild(row);
    });
  }

  private renderAnnotations(state: ViewerState): void {
    this.annotationList.replaceChildren();
    for (const annotation of state.annotations) {
      this.annotationList.appendChild(
        el("li", "annotation-item", `#${annotation.id} ${annotation.text}`),
      );
    }
  }

  private renderSlots(state: ViewerState): void {
    const keep = this.slotPanel.querySelector("h3");
    this.slotPanel.replaceChildren(...(keep ? [keep] : []));
    for (const slot of state.slots) {
      const card = el("div", "slot-card");
      card.dataset.slotId = slot.id;
      card.appendChild(el("h4", undefined, slot.id));
      card.appendChild(this.slotContent(slot, state));
      this.slotPanel.appendChild(card);
    }
  }

  private slotContent(slot: SlotInfo, state: ViewerState): HTMLElement {
    const body = el("div", "slot-body");
    if (!slot.content) {
      body.classList.add("slot-empty");
      body.textContent = "—";
      return body;
    }
    if (slot.kind === "record" && state.record) {
      const r = state.record;
      body.append(
        el("div", undefined, `${r.name} (${r.age}, ${r.sex})`),
        el("div", "slot-diagnosis", r.diagnosis),
      );
    } else if (slot.kind === "labs" && state.record) {
      const table = el("table", "labs-table");
      for (const lab of state.record.labs) {
        const tr = el("tr");
        tr.append(
          el("td", undefined, lab.name),
          el("td", undefined, `${lab.value} ${lab.unit}`),
        );
        table.appendChild(tr);
      }
      body.appendChild(table);
    } else if (slot.kind === "notes") {
      // Record notes are HTML by contract (colored text, formatting).
      const div = el("div", "notes-html");
      div.innerHTML = String(slot.content.notes_html ?? "");
      body.appendChild(div);
    } else if (slot.kind === "image") {
      body.append(
        el("div", "slot-caption", String(slot.content.caption ?? "")),
        el("div", "slot-file", String(slot.content.image ?? "")),
      );
    }
    return body;
  }
}
