/** In-memory stand-in for the annotation service, faithful to its HTTP
 * contract: lease on next, canonical (j < k) normalization with w flip on
 * submit, idempotent duplicates, 409 on changed answers or missing leases,
 * 410 when another annotator answered first. */

import type { Choice, FetchLike, Stimulus, TripletQueryRef } from "../src/api.js";

export interface LogRecord {
  query: TripletQueryRef;
  annotator: string;
  choice: Choice;
  w: -1 | 1;
  latency_ms: number | null;
}

interface PoolEntry {
  query: TripletQueryRef;
  stimuli: { reference: Stimulus; a: Stimulus; b: Stimulus };
  status: "unassigned" | "leased" | "answered";
  leasedBy: string | null;
  answeredBy: string | null;
  w: -1 | 1 | null;
}

function makeStimulus(t: number): Stimulus {
  return { t, rgb: [0, (t * 12) % 256, 40], asset_id: `fake-t${String(t).padStart(5, "0")}` };
}

export function makePool(count: number): TripletQueryRef[] {
  // distinct canonical queries over a small index range
  const queries: TripletQueryRef[] = [];
  outer: for (let i = 1; i <= 10; i++) {
    for (let j = 1; j <= 10; j++) {
      for (let k = j + 1; k <= 10; k++) {
        if (i !== j && i !== k) {
          queries.push({ i, j, k });
          if (queries.length === count) {
            break outer;
          }
        }
      }
    }
  }
  return queries;
}

export class FakeService {
  readonly entries: PoolEntry[];
  readonly log: LogRecord[] = [];
  failNextRequests = 0; // simulate network failures for the next N calls
  private readonly taskId: string;

  constructor(taskId: string, queries: TripletQueryRef[]) {
    this.taskId = taskId;
    this.entries = queries.map((query) => ({
      query,
      stimuli: {
        reference: makeStimulus(query.i),
        a: makeStimulus(query.j),
        b: makeStimulus(query.k),
      },
      status: "unassigned",
      leasedBy: null,
      answeredBy: null,
      w: null,
    }));
  }

  /** Answer an entry out-of-band, as if another annotator got there first. */
  answerDirectly(index: number, annotator: string, w: -1 | 1): void {
    const entry = this.entries[index];
    entry.status = "answered";
    entry.answeredBy = annotator;
    entry.w = w;
    entry.leasedBy = null;
  }

  get answered(): number {
    return this.entries.filter((e) => e.status === "answered").length;
  }

  readonly fetch: FetchLike = async (url, init) => {
    if (this.failNextRequests > 0) {
      this.failNextRequests -= 1;
      throw new TypeError("fetch failed");
    }
    const parsed = new URL(url, "http://fake.test");
    const path = parsed.pathname;
    if (path === `/tasks/${this.taskId}/next`) {
      return this.next(parsed.searchParams.get("annotator") ?? "");
    }
    if (path === `/tasks/${this.taskId}/responses` && init?.method === "POST") {
      return this.submit(JSON.parse(String(init.body)));
    }
    if (path === `/tasks/${this.taskId}/progress`) {
      return this.progress();
    }
    return json(404, { detail: `unknown path ${path}` });
  };

  private next(annotator: string): Response {
    const mine = this.entries.find((e) => e.status === "leased" && e.leasedBy === annotator);
    const entry = mine ?? this.entries.find((e) => e.status === "unassigned");
    if (!entry) {
      return json(200, { status: "no-work" });
    }
    entry.status = "leased";
    entry.leasedBy = annotator;
    return json(200, {
      status: "ok",
      query: entry.query,
      stimuli: entry.stimuli,
      lease_expires_in: 120,
    });
  }

  private submit(body: {
    annotator: string;
    query: TripletQueryRef;
    choice: Choice;
    latency_ms?: number | null;
  }): Response {
    let { i, j, k } = body.query;
    let w: -1 | 1 = body.choice === "A" ? -1 : 1;
    if (j > k) {
      [j, k] = [k, j];
      w = -w as -1 | 1;
    }
    const entry = this.entries.find(
      (e) => e.query.i === i && e.query.j === j && e.query.k === k,
    );
    if (!entry) {
      return json(404, { detail: "unknown query" });
    }
    if (entry.status === "answered") {
      if (entry.answeredBy === body.annotator) {
        if (entry.w === w) {
          return json(200, { status: "ok", w, duplicate: true });
        }
        return json(409, { detail: "answer already recorded with the other choice" });
      }
      return json(410, { detail: "query answered by another annotator" });
    }
    if (entry.leasedBy !== body.annotator) {
      return json(409, { detail: "query is not leased to this annotator" });
    }
    entry.status = "answered";
    entry.answeredBy = body.annotator;
    entry.w = w;
    entry.leasedBy = null;
    this.log.push({
      query: { i, j, k },
      annotator: body.annotator,
      choice: body.choice,
      w,
      latency_ms: body.latency_ms ?? null,
    });
    return json(200, { status: "ok", w, duplicate: false });
  }

  private progress(): Response {
    const answered = this.answered;
    const leased = this.entries.filter((e) => e.status === "leased").length;
    return json(200, {
      task_id: this.taskId,
      n: 10,
      total: this.entries.length,
      answered,
      leased,
      unassigned: this.entries.length - answered - leased,
      per_annotator: {},
    });
  }
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}
