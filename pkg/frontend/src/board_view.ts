// DOM layer for the free-sorting board: grey dots at seeded-random
// positions, hover playback, drag to reposition, click to cycle color.

import type { ApiClient, Stimulus } from "./api.js";
import {
  BoardState,
  createBoard,
  cycleColor,
  moveDot,
  serializeBoard,
  uncoloredIds,
} from "./board.js";
import { HoverPlayer } from "./audio.js";

// One fixed hue per palette token; grey marks an unassigned dot.
export function colorCss(token: string): string {
  if (token === "grey") return "#9e9e9e";
  const idx = Number(token.slice(1));
  return `hsl(${Math.round((360 * idx) / 20)}, 70%, 55%)`;
}

export interface BoardView {
  state: BoardState;
  element: HTMLElement;
  refresh(): void;
  submit(subject: string, confirm: () => boolean): Promise<{ version: string } | null>;
}

const DRAG_THRESHOLD_PX = 3;

export function renderBoard(
  container: HTMLElement,
  stimuli: Stimulus[],
  api: ApiClient,
  player: HoverPlayer = new HoverPlayer(),
  seed = 1,
): BoardView {
  const state = createBoard(stimuli, seed);
  container.classList.add("board");
  container.replaceChildren();

  const dotEls = new Map<string, HTMLElement>();
  for (const s of stimuli) {
    const el = document.createElement("div");
    el.className = "dot";
    el.dataset.id = s.id;
    el.title = s.id;
    el.addEventListener("mouseenter", () => player.hover(api.audioUrl(s.id)));
    el.addEventListener("mouseleave", () => player.leave());
    el.addEventListener("click", () => {
      cycleColor(state, s.id);
      refresh();
    });
    attachDrag(el, container, state, s.id, () => refresh());
    container.appendChild(el);
    dotEls.set(s.id, el);
  }

  function refresh(): void {
    for (const [id, el] of dotEls.entries()) {
      const dot = state.dots.get(id)!;
      el.style.left = `${(dot.x * 100).toFixed(2)}%`;
      el.style.top = `${(dot.y * 100).toFixed(2)}%`;
      el.style.background = colorCss(dot.color);
      el.dataset.color = dot.color;
    }
  }
  refresh();

  async function submit(subject: string, confirm: () => boolean) {
    const payload = serializeBoard(state, subject, confirm);
    if (payload === null) return null; // user declined; nothing sent
    const out = await api.submitAnnotation(payload);
    state.dirty = false;
    return out;
  }

  return { state, element: container, refresh, submit };
}

// Badge a dot whose audio failed to load; the board stays usable.
export function markAudioError(view: BoardView, id: string): void {
  const el = view.element.querySelector<HTMLElement>(`[data-id="${id}"]`);
  if (el) el.classList.add("audio-error");
}

export function uncoloredCount(view: BoardView): number {
  return uncoloredIds(view.state).length;
}

function attachDrag(
  el: HTMLElement,
  container: HTMLElement,
  state: BoardState,
  id: string,
  onMove: () => void,
): void {
  el.addEventListener("mousedown", (down: MouseEvent) => {
    down.preventDefault();
    let moved = false;
    const onMouseMove = (ev: MouseEvent) => {
      const rect = container.getBoundingClientRect();
      if (
        Math.abs(ev.clientX - down.clientX) < DRAG_THRESHOLD_PX &&
        Math.abs(ev.clientY - down.clientY) < DRAG_THRESHOLD_PX &&
        !moved
      ) {
        return;
      }
      moved = true;
      const w = rect.width || 1;
      const h = rect.height || 1;
      moveDot(state, id, (ev.clientX - rect.left) / w, (ev.clientY - rect.top) / h);
      onMove();
    };
    const onMouseUp = () => {
      document.removeEventListener("mousemove", onMouseMove);
      document.removeEventListener("mouseup", onMouseUp);
    };
    document.addEventListener("mousemove", onMouseMove);
    document.addEventListener("mouseup", onMouseUp);
  });
}
