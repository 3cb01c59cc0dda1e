// Query-by-example panel: run a ranked search by stored clip id or
// uploaded WAV, play results, and feed any result back in as the next
// query (the search-refinement loop). Every result row carries the
// parsed name fields so a hit is identifiable without listening.

import type { ApiClient, QueryResponse } from "./api.js";
import { HoverPlayer } from "./audio.js";

export interface QueryPanelState {
  metric: string;
  r: number;
  lastResponse: QueryResponse | null;
  error: string | null;
}

export class QueryPanel {
  state: QueryPanelState = {
    metric: "identity",
    r: 5,
    lastResponse: null,
    error: null,
  };

  constructor(
    private api: ApiClient,
    private player: HoverPlayer = new HoverPlayer(),
    private onChange: (state: QueryPanelState) => void = () => {},
  ) {}

  setMetric(metric: string): void {
    this.state.metric = metric;
  }

  setR(r: number): void {
    if (!Number.isInteger(r) || r < 1) throw new Error("r must be a positive integer");
    this.state.r = r;
  }

  async queryById(id: string): Promise<QueryResponse | null> {
    return this.run(() => this.api.queryById(id, this.state.metric, this.state.r));
  }

  async queryByFile(file: Blob): Promise<QueryResponse | null> {
    return this.run(() => this.api.queryByFile(file, this.state.metric, this.state.r));
  }

  // "Use as next query": exactly one new API call, with the selected
  // result's clip id as the stored-clip query.
  async useResultAsQuery(rank: number): Promise<QueryResponse | null> {
    const resp = this.state.lastResponse;
    if (!resp || rank < 0 || rank >= resp.results.length) {
      throw new Error(`no result at rank ${rank}`);
    }
    return this.queryById(resp.results[rank].clip_id);
  }

  playResult(rank: number): void {
    const resp = this.state.lastResponse;
    if (!resp || rank < 0 || rank >= resp.results.length) return;
    this.player.hover(this.api.audioUrl(resp.results[rank].clip_id));
  }

  async retrain(subject: string): Promise<string> {
    const job = await this.api.retrain(subject);
    return job.job_id;
  }

  private async run(
    request: () => Promise<QueryResponse>,
  ): Promise<QueryResponse | null> {
    try {
      const resp = await request();
      this.state.lastResponse = resp;
      this.state.error = null;
      this.onChange(this.state);
      return resp;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
      this.onChange(this.state);
      return null;
    }
  }
}

// Minimal DOM rendering of the current results; re-run by the caller on
// each onChange.
export function renderResults(container: HTMLElement, panel: QueryPanel): void {
  container.replaceChildren();
  const { lastResponse, error } = panel.state;
  if (error) {
    const div = document.createElement("div");
    div.className = "query-error";
    div.textContent = `${error} — retry?`;
    container.appendChild(div);
    return;
  }
  if (!lastResponse) return;
  lastResponse.results.forEach((res, rank) => {
    const row = document.createElement("div");
    row.className = "result-row";
    row.dataset.clipId = res.clip_id;
    const imt = res.imt;
    row.textContent =
      `#${rank + 1} ${res.clip_id} d=${res.distance.toFixed(3)} ` +
      `[${imt.instrument}${imt.mute ? "+" + imt.mute : ""} ${imt.technique}` +
      ` ${imt.pitch} ${imt.dynamics}]`;
    const play = document.createElement("button");
    play.className = "play";
    play.textContent = "play";
    play.addEventListener("click", () => panel.playResult(rank));
    const reuse = document.createElement("button");
    reuse.className = "requery";
    reuse.textContent = "use as query";
    reuse.addEventListener("click", () => void panel.useResultAsQuery(rank));
    row.append(" ", play, " ", reuse);
    container.appendChild(row);
  });
}
