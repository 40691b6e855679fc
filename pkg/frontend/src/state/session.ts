// Session controller: owns the step loop, the action timeline, and
// rewind-by-replay. The server is the sole authority over rollout state; the
// controller never synthesizes frames, it only displays server responses
// (every displayed frame's hash is recorded for the bookkeeping invariant).

import {
  ActionLogEntry,
  CreateSessionRequest,
  PlayApi,
  StepResponse,
} from "../api/client";

export interface TimelineEntry {
  step: number;
  prototypeIndex: number;
  epsNorm: number;
}

export interface DisplayedFrame {
  frameB64: string;
  segmentationB64: string;
  stepIndex: number;
}

export type SessionListener = (state: SessionViewState) => void;

export interface SessionViewState {
  sessionId: string | null;
  stepIndex: number;
  busy: boolean;
  timeline: TimelineEntry[];
  frame: DisplayedFrame | null;
  error: string | null;
}

async function sha256Hex(text: string): Promise<string> {
  const data = new TextEncoder().encode(text);
  const digest = await crypto.subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

function epsNorm(variability: number[]): number {
  return Math.sqrt(variability.reduce((acc, v) => acc + v * v, 0));
}

export class SessionController {
  private sessionId: string | null = null;
  private createRequest: CreateSessionRequest | null = null;
  private busy = false;
  private timeline: TimelineEntry[] = [];
  private actionLog: { prototype_index: number; variability: number[] }[] = [];
  private frame: DisplayedFrame | null = null;
  private error: string | null = null;
  private listeners: SessionListener[] = [];
  /** Hashes of every frame payload this controller has displayed. */
  readonly displayedHashes: string[] = [];
  /** Hashes of every frame payload received from the server. */
  readonly serverHashes: string[] = [];

  constructor(private client: PlayApi) {}

  subscribe(listener: SessionListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  get state(): SessionViewState {
    return {
      sessionId: this.sessionId,
      stepIndex: this.frame?.stepIndex ?? 0,
      busy: this.busy,
      timeline: [...this.timeline],
      frame: this.frame,
      error: this.error,
    };
  }

  private emit(): void {
    const snapshot = this.state;
    for (const listener of this.listeners) {
      listener(snapshot);
    }
  }

  private async display(frameB64: string, segmentationB64: string, stepIndex: number): Promise<void> {
    const hash = await sha256Hex(frameB64);
    this.serverHashes.push(hash);
    this.displayedHashes.push(hash);
    this.frame = { frameB64, segmentationB64, stepIndex };
  }

  async create(request: CreateSessionRequest): Promise<void> {
    if (this.busy) {
      throw new Error("a request is already in flight");
    }
    this.busy = true;
    this.error = null;
    this.emit();
    try {
      if (this.sessionId !== null) {
        await this.client.deleteSession(this.sessionId).catch(() => undefined);
      }
      const resp = await this.client.createSession(request);
      this.sessionId = resp.session_id;
      this.createRequest = request;
      this.timeline = [];
      this.actionLog = [];
      await this.display(resp.frame_b64, resp.segmentation_b64, resp.step_index);
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** One prototype step; further input is rejected until the frame arrives. */
  async step(prototypeIndex: number, variability?: number[]): Promise<StepResponse> {
    if (this.sessionId === null) {
      throw new Error("no session");
    }
    if (this.busy) {
      throw new Error("step already in flight");
    }
    this.busy = true;
    this.error = null;
    this.emit();
    try {
      const resp = await this.client.step(this.sessionId, {
        prototype_index: prototypeIndex,
        variability,
      });
      this.timeline.push({
        step: resp.step_index,
        prototypeIndex: resp.prototype_index,
        epsNorm: epsNorm(resp.variability),
      });
      this.actionLog.push({
        prototype_index: resp.prototype_index,
        variability: resp.variability,
      });
      await this.display(resp.frame_b64, resp.segmentation_b64, resp.step_index);
      return resp;
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Policy-mode step: the server picks the action. */
  async policyStep(): Promise<StepResponse> {
    if (this.sessionId === null) {
      throw new Error("no session");
    }
    if (this.busy) {
      throw new Error("step already in flight");
    }
    this.busy = true;
    this.emit();
    try {
      const resp = await this.client.step(this.sessionId, {});
      this.timeline.push({
        step: resp.step_index,
        prototypeIndex: resp.prototype_index,
        epsNorm: epsNorm(resp.variability),
      });
      this.actionLog.push({
        prototype_index: resp.prototype_index,
        variability: resp.variability,
      });
      await this.display(resp.frame_b64, resp.segmentation_b64, resp.step_index);
      return resp;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /**
   * Rewind to a timeline prefix by replaying it into a fresh session with the
   * original creation parameters (same seed, so the server reproduces the
   * identical frames). Returns the frames displayed during the replay.
   */
  async rewind(keepSteps: number): Promise<DisplayedFrame[]> {
    if (this.createRequest === null) {
      throw new Error("no session to rewind");
    }
    if (keepSteps < 0 || keepSteps > this.actionLog.length) {
      throw new Error(`rewind target ${keepSteps} out of range`);
    }
    const prefix = this.actionLog.slice(0, keepSteps);
    await this.create(this.createRequest);
    const frames: DisplayedFrame[] = [];
    for (const action of prefix) {
      await this.step(action.prototype_index, action.variability);
      if (this.frame) {
        frames.push(this.frame);
      }
    }
    return frames;
  }

  replayLog(): ActionLogEntry[] {
    return this.actionLog.map((a, i) => ({
      step: i,
      mode: "user",
      prototype_index: a.prototype_index,
      variability: a.variability,
    }));
  }
}
