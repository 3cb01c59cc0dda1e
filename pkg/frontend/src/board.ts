// Free-sorting board state. Stimuli appear as dots at seeded-random
// positions; the user expresses a partition purely through colors, so
// the serialized annotation is invariant to dot positions. Color tokens
// are stable across sessions ("c00".."c19") to keep resubmission diffs
// meaningful.

import type { AnnotationPayload, Stimulus } from "./api.js";

export const PALETTE_SIZE = 20;
export const PALETTE: readonly string[] = Array.from(
  { length: PALETTE_SIZE },
  (_, i) => `c${String(i).padStart(2, "0")}`,
);
export const UNCOLORED = "grey";

export interface Dot {
  id: string;
  x: number; // viewport fractions in [0, 1]
  y: number;
  color: string; // palette token or UNCOLORED
}

export interface BoardState {
  dots: Map<string, Dot>;
  dirty: boolean;
}

// Deterministic 32-bit PRNG so "distributed uniformly at random" is
// reproducible for a given seed (and in tests).
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function createBoard(stimuli: Stimulus[], seed = 1): BoardState {
  const rand = mulberry32(seed);
  const dots = new Map<string, Dot>();
  for (const s of stimuli) {
    dots.set(s.id, { id: s.id, x: rand(), y: rand(), color: UNCOLORED });
  }
  return { dots, dirty: false };
}

function requireDot(state: BoardState, id: string): Dot {
  const dot = state.dots.get(id);
  if (!dot) throw new Error(`unknown stimulus: ${id}`);
  return dot;
}

export function moveDot(state: BoardState, id: string, x: number, y: number): void {
  const dot = requireDot(state, id);
  dot.x = Math.min(1, Math.max(0, x));
  dot.y = Math.min(1, Math.max(0, y));
  // Positions are presentation only; moving a dot does not dirty the
  // annotation.
}

export function setColor(state: BoardState, id: string, color: string): void {
  if (color !== UNCOLORED && !PALETTE.includes(color)) {
    throw new Error(`not a palette token: ${color}`);
  }
  requireDot(state, id).color = color;
  state.dirty = true;
}

export function cycleColor(state: BoardState, id: string): void {
  const dot = requireDot(state, id);
  const idx = PALETTE.indexOf(dot.color);
  setColor(state, id, PALETTE[(idx + 1) % PALETTE.length]);
}

export function uncoloredIds(state: BoardState): string[] {
  return [...state.dots.values()]
    .filter((d) => d.color === UNCOLORED)
    .map((d) => d.id);
}

// The partition the board currently expresses: color token -> member ids.
// Pure function of colors; positions never enter.
export function boardPartition(state: BoardState): Map<string, string[]> {
  const groups = new Map<string, string[]>();
  for (const dot of state.dots.values()) {
    const members = groups.get(dot.color) ?? [];
    members.push(dot.id);
    groups.set(dot.color, members);
  }
  for (const members of groups.values()) members.sort();
  return groups;
}

export function samePartition(
  a: Map<string, string[]>,
  b: Map<string, string[]>,
): boolean {
  const key = (groups: Map<string, string[]>) =>
    [...groups.values()]
      .map((m) => m.join("|"))
      .sort()
      .join(";");
  return key(a) === key(b);
}

// Serialize the board for POST /v1/annotations. Uncolored dots block
// submission unless the caller explicitly confirms treating grey as one
// shared cluster of its own.
export function serializeBoard(
  state: BoardState,
  subject: string,
  confirmUncolored: () => boolean,
): AnnotationPayload | null {
  if (uncoloredIds(state).length > 0 && !confirmUncolored()) {
    return null;
  }
  const colors: Record<string, string> = {};
  for (const id of [...state.dots.keys()].sort()) {
    colors[id] = state.dots.get(id)!.color;
  }
  return { subject, colors };
}

// Rebuild the color assignment from a previously submitted payload, e.g.
// after re-fetching one's own annotation. Positions are untouched.
export function applyAnnotation(state: BoardState, payload: AnnotationPayload): void {
  for (const [id, color] of Object.entries(payload.colors)) {
    const dot = state.dots.get(id);
    if (!dot) throw new Error(`annotation names unknown stimulus: ${id}`);
    dot.color = color;
  }
  state.dirty = false;
}
