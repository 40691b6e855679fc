// DOM wiring for the play UI: prototype buttons with editable labels, a
// variability slider, frame/segmentation panes, the action timeline with
// rewind-by-replay, and a policy-mode loop. Keyboard keys 1..K fire the
// matching prototype.

import { PlayApi, PlayClient } from "../api/client";
import { SessionController, SessionViewState } from "../state/session";

export interface AppOptions {
  serverUrl: string;
  checkpointId: string;
  document?: Document;
  client?: PlayApi;
}

export class PlayApp {
  readonly client: PlayApi;
  readonly controller: SessionController;
  private doc: Document;
  private root: HTMLElement;
  private framePane!: HTMLImageElement;
  private segPane!: HTMLImageElement;
  private timelineList!: HTMLOListElement;
  private statusLine!: HTMLElement;
  private prototypeBar!: HTMLElement;
  private variabilitySlider!: HTMLInputElement;
  private labels: Record<string, string> = {};
  private k = 0;
  private dZ = 0;
  private policyTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private options: AppOptions) {
    this.doc = options.document ?? document;
    this.client = options.client ?? new PlayClient(options.serverUrl);
    this.controller = new SessionController(this.client);
    this.root = this.doc.getElementById("app") ?? this.doc.body;
  }

  async boot(seedFrameB64: string): Promise<void> {
    this.renderSkeleton();
    const codebook = await this.client.getCodebook(this.options.checkpointId);
    this.k = codebook.k;
    this.dZ = codebook.d_z;
    this.labels = codebook.labels;
    this.renderPrototypeButtons();
    this.controller.subscribe((state) => this.onState(state));
    this.doc.addEventListener("keydown", (ev) => this.onKey(ev as KeyboardEvent));
    await this.controller.create({
      mode: "user",
      checkpoint_id: this.options.checkpointId,
      seed: 0,
      seed_frame_b64: seedFrameB64,
    });
  }

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <header><h1>slot world play</h1><span id="status"></span></header>
      <main>
        <section class="panes">
          <figure><img id="frame" alt="predicted frame" /><figcaption>prediction</figcaption></figure>
          <figure><img id="segmentation" alt="slot segmentation" /><figcaption>slots</figcaption></figure>
        </section>
        <section class="controls">
          <div id="prototypes"></div>
          <label>variability
            <input id="variability" type="range" min="0" max="2" step="0.05" value="0" />
          </label>
          <button id="policy-toggle">policy mode</button>
        </section>
        <section class="timeline"><h2>timeline</h2><ol id="timeline"></ol></section>
      </main>`;
    this.framePane = this.doc.getElementById("frame") as HTMLImageElement;
    this.segPane = this.doc.getElementById("segmentation") as HTMLImageElement;
    this.timelineList = this.doc.getElementById("timeline") as HTMLOListElement;
    this.statusLine = this.doc.getElementById("status") as HTMLElement;
    this.prototypeBar = this.doc.getElementById("prototypes") as HTMLElement;
    this.variabilitySlider = this.doc.getElementById("variability") as HTMLInputElement;
    const toggle = this.doc.getElementById("policy-toggle") as HTMLButtonElement;
    toggle.addEventListener("click", () => this.togglePolicy());
  }

  private renderPrototypeButtons(): void {
    this.prototypeBar.innerHTML = "";
    for (let kIdx = 0; kIdx < this.k; kIdx++) {
      const button = this.doc.createElement("button");
      button.className = "prototype";
      button.dataset.proto = String(kIdx);
      button.textContent = this.labelFor(kIdx);
      button.addEventListener("click", () => void this.fire(kIdx));
      const edit = this.doc.createElement("span");
      edit.className = "edit";
      edit.textContent = "✎";
      edit.addEventListener("click", (ev) => {
        ev.stopPropagation();
        void this.editLabel(kIdx);
      });
      button.appendChild(edit);
      this.prototypeBar.appendChild(button);
    }
  }

  labelFor(kIdx: number): string {
    const label = this.labels[String(kIdx)];
    return label ? `${kIdx + 1}: ${label}` : `${kIdx + 1}: prototype ${kIdx}`;
  }

  private async editLabel(kIdx: number): Promise<void> {
    const current = this.labels[String(kIdx)] ?? "";
    const next = this.doc.defaultView?.prompt?.(`label for prototype ${kIdx}`, current);
    if (next == null || next === current) {
      return;
    }
    const resp = await this.client.putLabels(this.options.checkpointId, { [String(kIdx)]: next });
    this.labels = resp.labels;
    this.renderPrototypeButtons();
  }

  variabilityVector(): number[] | undefined {
    const magnitude = Number(this.variabilitySlider.value);
    if (magnitude === 0) {
      return undefined;
    }
    // A fixed unit direction scaled by the slider; the server clamps the norm.
    const eps = new Array(this.dZ).fill(0);
    eps[0] = magnitude;
    return eps;
  }

  async fire(kIdx: number): Promise<void> {
    if (this.controller.state.busy) {
      return; // input disabled while a step is in flight
    }
    await this.controller.step(kIdx, this.variabilityVector());
  }

  private onKey(ev: KeyboardEvent): void {
    const num = Number(ev.key);
    if (Number.isInteger(num) && num >= 1 && num <= this.k) {
      void this.fire(num - 1);
    }
  }

  private togglePolicy(): void {
    if (this.policyTimer !== null) {
      clearInterval(this.policyTimer);
      this.policyTimer = null;
      return;
    }
    this.policyTimer = setInterval(() => {
      if (!this.controller.state.busy) {
        void this.controller.policyStep().catch(() => this.togglePolicy());
      }
    }, 250);
  }

  private onState(state: SessionViewState): void {
    if (state.frame) {
      this.framePane.src = `data:image/png;base64,${state.frame.frameB64}`;
      this.segPane.src = `data:image/png;base64,${state.frame.segmentationB64}`;
    }
    this.statusLine.textContent = state.busy
      ? "stepping..."
      : state.error
        ? `error: ${state.error}`
        : `step ${state.stepIndex}`;
    for (const button of Array.from(this.prototypeBar.querySelectorAll("button"))) {
      (button as HTMLButtonElement).disabled = state.busy;
    }
    this.timelineList.innerHTML = "";
    state.timeline.forEach((entry, i) => {
      const item = this.doc.createElement("li");
      item.textContent = `step ${entry.step}: ${this.labelFor(entry.prototypeIndex)} (|eps| ${entry.epsNorm.toFixed(2)})`;
      const rewind = this.doc.createElement("button");
      rewind.textContent = "rewind here";
      rewind.addEventListener("click", () => void this.controller.rewind(i + 1));
      item.appendChild(rewind);
      this.timelineList.appendChild(item);
    });
  }
}
