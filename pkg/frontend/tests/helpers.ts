// Shared test doubles: an in-memory /v1 server behind a fetch stub, and
// a canned stimulus list.

import type { FetchLike, ImtFields, Stimulus } from "../src/api.js";

export function imt(instrument: string, pitch: string): ImtFields {
  return { instrument, mute: "", technique: "ord", pitch, dynamics: "mf" };
}

export function makeStimuli(n: number): Stimulus[] {
  return Array.from({ length: n }, (_, i) => {
    const id = `Vn-ord-C${(i % 8) + 1}-mf-${i}`;
    return { id, canonical: false, audio_url: `/v1/audio/${id}`, imt: imt("Vn", "C4") };
  });
}

export interface LoggedRequest {
  url: string;
  method: string;
  body?: unknown;
}

export interface FakeServer {
  fetchFn: FetchLike;
  log: LoggedRequest[];
  annotations: Record<string, unknown>[];
}

// Minimal stateful stand-in for the real service: stores annotations,
// answers queries by clip id with a fixed ranking, and treats any WAV
// upload whose bytes name a stored clip as a query for that clip
// (the real service retrieves the uploaded clip's own neighborhood, so
// the uploaded clip comes back ranked first).
// jsdom's Blob has no .text(); go through FileReader.
function blobText(blob: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => reject(reader.error);
    reader.readAsText(blob);
  });
}

export function fakeServer(stimuli: Stimulus[]): FakeServer {
  const log: LoggedRequest[] = [];
  const annotations: Record<string, unknown>[] = [];
  const ids = stimuli.map((s) => s.id);

  const json = (status: number, body: unknown): Response =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });

  const ranking = (queryId: string, r: number) => {
    const others = ids.filter((i) => i !== queryId);
    return others.slice(0, r).map((clip_id, k) => ({
      clip_id,
      distance: 0.1 * (k + 1),
      imt: stimuli.find((s) => s.id === clip_id)!.imt,
    }));
  };

  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    let body: unknown;
    if (typeof init?.body === "string") body = JSON.parse(init.body);
    else if (init?.body instanceof FormData) {
      const file = init.body.get("file") as Blob | null;
      body = {
        uploaded: file ? await blobText(file) : null,
        metric: init.body.get("metric"),
        r: Number(init.body.get("r")),
      };
    }
    log.push({ url, method, body });

    if (url.endsWith("/v1/stimuli")) return json(200, { stimuli });
    if (url.includes("/v1/audio/")) return new Response(new Blob(["RIFF"]));
    if (url.endsWith("/v1/metrics")) {
      return json(200, { metrics: ["identity", "consensus"] });
    }
    if (url.endsWith("/v1/annotations")) {
      const payload = body as { subject: string; colors: Record<string, string> };
      const missing = ids.filter((i) => !(i in payload.colors));
      if (missing.length > 0) {
        return json(400, { detail: `missing stimuli: ${missing.join(", ")}` });
      }
      annotations.push(payload);
      return json(201, {
        version: `${payload.subject}/v${String(annotations.length).padStart(4, "0")}`,
      });
    }
    if (url.includes("/v1/retrain/")) {
      const subject = decodeURIComponent(url.split("/").pop()!);
      return json(202, {
        job_id: "job-1", subject, status: "queued",
        metric_id: null, error: null, report: null,
      });
    }
    if (url.endsWith("/v1/query")) {
      const q = body as { id?: string; uploaded?: string; metric: string; r: number };
      const queryId = q.id ?? (ids.includes(q.uploaded ?? "") ? q.uploaded! : "");
      if (q.id && !ids.includes(q.id)) {
        return json(404, { detail: `unknown clip: ${q.id}` });
      }
      const results = q.id
        ? ranking(q.id, q.r)
        : [
            // uploaded copy of a stored clip: that clip ranks first
            { clip_id: queryId, distance: 0.0, imt: stimuli[0].imt },
            ...ranking(queryId, q.r - 1),
          ];
      return json(200, { query_id: q.id ?? "", metric: q.metric, results });
    }
    return json(404, { detail: `no route: ${url}` });
  };

  return { fetchFn, log, annotations };
}
