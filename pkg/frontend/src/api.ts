/** Typed client for the annotation service HTTP API. */

export type Choice = "A" | "B";

export interface TripletQueryRef {
  i: number;
  j: number;
  k: number;
}

export interface Stimulus {
  t: number;
  rgb: [number, number, number];
  asset_id: string;
}

export interface DealtQuery {
  status: "ok";
  query: TripletQueryRef;
  stimuli: {
    reference: Stimulus;
    a: Stimulus;
    b: Stimulus;
  };
  lease_expires_in: number;
}

export interface NoWork {
  status: "no-work";
}

export type NextResponse = DealtQuery | NoWork;

export interface SubmitAck {
  status: "ok";
  w: -1 | 1;
  duplicate: boolean;
}

export interface Progress {
  task_id: string;
  n: number;
  total: number;
  answered: number;
  leased: number;
  unassigned: number;
  per_annotator: Record<string, number>;
}

export interface CreateTaskRequest {
  budget: number;
  seed: number;
  task_id?: string;
  lease_timeout?: number;
  signal?: { kind: string; n: number; seed?: number };
  manifest?: unknown[];
}

export interface CreatedTask {
  task_id: string;
  n: number;
  pool_size: number;
  lease_timeout: number;
}

/** Non-2xx service reply; status distinguishes conflict (409) from gone (410). */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service replied ${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) {
    return response;
  }
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") {
      detail = body.detail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(response.status, detail);
}

export class ServiceClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    return (await raiseForStatus(response)).json() as Promise<T>;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await raiseForStatus(response)).json() as Promise<T>;
  }

  createTask(request: CreateTaskRequest): Promise<CreatedTask> {
    return this.postJson("/tasks", request);
  }

  nextQuery(taskId: string, annotator: string): Promise<NextResponse> {
    const params = new URLSearchParams({ annotator });
    return this.getJson(`/tasks/${encodeURIComponent(taskId)}/next?${params}`);
  }

  submitResponse(
    taskId: string,
    annotator: string,
    query: TripletQueryRef,
    choice: Choice,
    latencyMs: number,
  ): Promise<SubmitAck> {
    return this.postJson(`/tasks/${encodeURIComponent(taskId)}/responses`, {
      annotator,
      query,
      choice,
      latency_ms: latencyMs,
    });
  }

  getProgress(taskId: string): Promise<Progress> {
    return this.getJson(`/tasks/${encodeURIComponent(taskId)}/progress`);
  }

  getAsset(assetId: string): Promise<Stimulus> {
    return this.getJson(`/assets/${encodeURIComponent(assetId)}?format=json`);
  }

  async exportLabels(taskId: string): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/tasks/${encodeURIComponent(taskId)}/export`,
    );
    return (await raiseForStatus(response)).text();
  }
}
