// Application entry point: wires the board and query panel to the DOM.
// Served alongside the API, so the client base URL is empty (same origin).

import { ApiClient, ApiError } from "./api.js";
import { applyAnnotation, boardPartition } from "./board.js";
import { BoardView, markAudioError, renderBoard, uncoloredCount } from "./board_view.js";
import { HoverPlayer } from "./audio.js";
import { QueryPanel, renderResults } from "./query_panel.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export async function start(api = new ApiClient()): Promise<void> {
  const status = byId<HTMLElement>("status");
  let view: BoardView;

  const boardPlayer = new HoverPlayer(undefined, (url) => {
    const id = decodeURIComponent(url.split("/").pop() ?? "");
    markAudioError(view, id);
  });

  let stimuli;
  try {
    stimuli = await api.getStimuli();
  } catch (err) {
    status.textContent =
      err instanceof ApiError && err.status === 503
        ? "service has no stimuli loaded yet"
        : `failed to load stimuli: ${err}`;
    return;
  }
  view = renderBoard(byId("board"), stimuli, api, boardPlayer);
  status.textContent = `${stimuli.length} stimuli loaded`;

  byId<HTMLButtonElement>("submit").addEventListener("click", async () => {
    const subject = byId<HTMLInputElement>("subject").value.trim();
    if (!subject) {
      status.textContent = "enter a subject id first";
      return;
    }
    try {
      const out = await view.submit(subject, () => {
        const n = uncoloredCount(view);
        return window.confirm(
          `${n} dot(s) are still grey; submit them as one shared cluster?`,
        );
      });
      status.textContent = out
        ? `annotation stored as ${out.version} ` +
          `(${boardPartition(view.state).size} clusters)`
        : "submission cancelled";
    } catch (err) {
      status.textContent =
        err instanceof ApiError ? `rejected: ${err.detail}` : `failed: ${err}`;
    }
  });

  byId<HTMLButtonElement>("reload-annotation").addEventListener("click", () => {
    // Restore the last submitted colors (kept client-side per session).
    const raw = sessionStorage.getItem("last-annotation");
    if (raw) {
      applyAnnotation(view.state, JSON.parse(raw));
      view.refresh();
    }
  });

  const panel = new QueryPanel(api, new HoverPlayer(), () =>
    renderResults(byId("results"), panel),
  );
  const metricSelect = byId<HTMLSelectElement>("metric");
  for (const m of await api.getMetrics()) {
    const opt = document.createElement("option");
    opt.value = opt.textContent = m;
    metricSelect.appendChild(opt);
  }
  metricSelect.addEventListener("change", () => {
    panel.setMetric(metricSelect.value);
    const last = panel.state.lastResponse;
    if (last) void panel.queryById(last.query_id || last.results[0].clip_id);
  });

  byId<HTMLButtonElement>("run-query").addEventListener("click", () => {
    const id = byId<HTMLInputElement>("query-id").value.trim();
    const upload = byId<HTMLInputElement>("query-file").files?.[0];
    panel.setR(Number(byId<HTMLInputElement>("query-r").value) || 5);
    if (upload) void panel.queryByFile(upload);
    else if (id) void panel.queryById(id);
    else status.textContent = "pick a clip id or a WAV file to query";
  });

  byId<HTMLButtonElement>("retrain").addEventListener("click", async () => {
    const subject = byId<HTMLInputElement>("subject").value.trim() || "consensus";
    try {
      const jobId = await panel.retrain(subject);
      status.textContent = `retrain started: job ${jobId}`;
    } catch (err) {
      status.textContent =
        err instanceof ApiError ? `retrain rejected: ${err.detail}` : `${err}`;
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("board")) {
  void start();
}
