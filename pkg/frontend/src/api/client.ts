// Typed client for the play service HTTP/JSON API.
// All rollout state is server-authoritative; this module only ships requests
// and parses responses.

export interface CodebookSummary {
  k: number;
  d_z: number;
  usage: number[];
}

export interface CreateSessionResponse {
  session_id: string;
  mode: string;
  checkpoint_id: string;
  step_index: number;
  codebook: CodebookSummary;
  frame_b64: string;
  segmentation_b64: string;
}

export interface StepResponse {
  step_index: number;
  prototype_index: number;
  variability: number[];
  frame_b64: string;
  segmentation_b64: string;
  compute_ms: number;
}

export interface SessionDescriptor {
  session_id: string;
  mode: string;
  checkpoint_id: string;
  step_index: number;
  created_at: number;
  updated_at: number;
  action_log: ActionLogEntry[];
}

export interface ActionLogEntry {
  step: number;
  mode: string;
  prototype_index: number;
  variability: number[];
}

export interface CodebookResponse {
  k: number;
  d_z: number;
  prototypes: number[][];
  usage_counts: number[];
  labels: Record<string, string>;
}

export interface CreateSessionRequest {
  mode: "user" | "policy" | "reference";
  checkpoint_id: string;
  seed?: number;
  seed_frame_b64?: string;
  episode?: { dataset_dir: string; episode_id: number; n_seed_frames?: number };
}

export interface StepRequest {
  prototype_index?: number;
  variability?: number[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface PlayApi {
  createSession(req: CreateSessionRequest): Promise<CreateSessionResponse>;
  step(sessionId: string, req: StepRequest): Promise<StepResponse>;
  describe(sessionId: string): Promise<SessionDescriptor>;
  deleteSession(sessionId: string): Promise<void>;
  getCodebook(checkpointId: string): Promise<CodebookResponse>;
  putLabels(checkpointId: string, labels: Record<string, string>): Promise<{ labels: Record<string, string> }>;
  getPalette(): Promise<{ palette: number[][] }>;
}

type FetchLike = typeof fetch;

export class PlayClient implements PlayApi {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (resp.status === 204) {
      return undefined as T;
    }
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, payload.code ?? "unknown", payload.message ?? resp.statusText);
    }
    return payload as T;
  }

  createSession(req: CreateSessionRequest): Promise<CreateSessionResponse> {
    return this.request("POST", "/v1/sessions", req);
  }

  step(sessionId: string, req: StepRequest): Promise<StepResponse> {
    return this.request("POST", `/v1/sessions/${sessionId}/step`, req);
  }

  describe(sessionId: string): Promise<SessionDescriptor> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/v1/sessions/${sessionId}`);
  }

  getCodebook(checkpointId: string): Promise<CodebookResponse> {
    return this.request("GET", `/v1/codebooks/${checkpointId}`);
  }

  putLabels(checkpointId: string, labels: Record<string, string>): Promise<{ labels: Record<string, string> }> {
    return this.request("PUT", `/v1/codebooks/${checkpointId}/labels`, { labels });
  }

  getPalette(): Promise<{ palette: number[][] }> {
    return this.request("GET", "/v1/palette");
  }
}
