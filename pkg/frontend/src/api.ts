// Typed client for the service's /v1 JSON API. All server traffic in the
// frontend goes through one ApiClient instance so tests can count and
// stub requests by injecting a fetch function.

export interface ImtFields {
  instrument: string;
  mute: string;
  technique: string;
  pitch: string;
  dynamics: string;
}

export interface Stimulus {
  id: string;
  canonical: boolean;
  audio_url: string;
  imt: ImtFields;
}

export interface AnnotationPayload {
  subject: string;
  colors: Record<string, string>;
}

export interface JobInfo {
  job_id: string;
  subject: string;
  status: "queued" | "running" | "done" | "failed";
  metric_id: string | null;
  error: string | null;
  report: Record<string, unknown> | null;
}

export interface QueryResult {
  clip_id: string;
  distance: number;
  imt: ImtFields;
}

export interface QueryResponse {
  query_id: string;
  metric: string;
  results: QueryResult[];
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raiseForStatus(res: Response): Promise<Response> {
  if (res.ok) return res;
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getStimuli(): Promise<Stimulus[]> {
    const res = await raiseForStatus(await this.fetchFn(`${this.base}/v1/stimuli`));
    return (await res.json()).stimuli as Stimulus[];
  }

  audioUrl(id: string): string {
    return `${this.base}/v1/audio/${encodeURIComponent(id)}`;
  }

  async submitAnnotation(payload: AnnotationPayload): Promise<{ version: string }> {
    const res = await raiseForStatus(
      await this.fetchFn(`${this.base}/v1/annotations`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    return res.json();
  }

  async retrain(subject: string): Promise<JobInfo> {
    const res = await raiseForStatus(
      await this.fetchFn(`${this.base}/v1/retrain/${encodeURIComponent(subject)}`, {
        method: "POST",
      }),
    );
    return res.json();
  }

  async getJob(jobId: string): Promise<JobInfo> {
    const res = await raiseForStatus(
      await this.fetchFn(`${this.base}/v1/jobs/${encodeURIComponent(jobId)}`),
    );
    return res.json();
  }

  async getMetrics(): Promise<string[]> {
    const res = await raiseForStatus(await this.fetchFn(`${this.base}/v1/metrics`));
    return (await res.json()).metrics as string[];
  }

  async queryById(id: string, metric: string, r: number): Promise<QueryResponse> {
    const res = await raiseForStatus(
      await this.fetchFn(`${this.base}/v1/query`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ id, metric, r }),
      }),
    );
    return res.json();
  }

  async queryByFile(file: Blob, metric: string, r: number): Promise<QueryResponse> {
    const form = new FormData();
    form.append("file", file, "query.wav");
    form.append("metric", metric);
    form.append("r", String(r));
    const res = await raiseForStatus(
      await this.fetchFn(`${this.base}/v1/query`, { method: "POST", body: form }),
    );
    return res.json();
  }
}
