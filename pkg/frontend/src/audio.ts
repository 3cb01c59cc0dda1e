// Hover playback with a 150 ms debounce and at most one in-flight audio
// element, so browsing the board does not cause request storms.

export const HOVER_DEBOUNCE_MS = 150;

export interface AudioLike {
  play(): Promise<void>;
  pause(): void;
  src: string;
}

export class HoverPlayer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private current: AudioLike | null = null;

  constructor(
    private makeAudio: (url: string) => AudioLike = (url) => new Audio(url),
    private onError: (url: string, err: unknown) => void = () => {},
  ) {}

  // Schedule playback; a newer hover within the debounce window replaces
  // the pending one.
  hover(url: string): void {
    this.cancel();
    this.timer = setTimeout(() => {
      this.timer = null;
      this.start(url);
    }, HOVER_DEBOUNCE_MS);
  }

  // Pointer left the dot: drop any pending request and stop playback.
  leave(): void {
    this.cancel();
    if (this.current) {
      this.current.pause();
      this.current = null;
    }
  }

  private cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private start(url: string): void {
    if (this.current) this.current.pause();
    const audio = this.makeAudio(url);
    this.current = audio;
    audio.play().catch((err) => {
      if (this.current === audio) this.current = null;
      this.onError(url, err);
    });
  }
}
