// Search orchestration: debounced slider input, one in-flight request,
// stale responses discarded by sequence number.

import { postSearch } from "./api.js";
import type { SearchQuery, SearchResponse } from "./types.js";
import { requestWeights, type WeightPanelState } from "./weights.js";

export const SLIDER_DEBOUNCE_MS = 250;

export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly delayMs: number) {}

  schedule(fn: () => void): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      fn();
    }, this.delayMs);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }
}

export interface ControllerEvents {
  onResults?: (response: SearchResponse) => void;
  onError?: (error: unknown) => void;
}

export class SearchController {
  readonly debouncer = new Debouncer(SLIDER_DEBOUNCE_MS);
  private sequence = 0;
  lastResponse: SearchResponse | null = null;
  query: SearchQuery | null = null;
  k = 9;

  constructor(
    private readonly base: string,
    private readonly events: ControllerEvents = {},
  ) {}

  /** Slider drags funnel through here; bursts collapse into one search. */
  queueSearch(state: WeightPanelState): void {
    this.debouncer.schedule(() => void this.searchNow(state));
  }

  async searchNow(state: WeightPanelState): Promise<SearchResponse | null> {
    const weights = requestWeights(state);
    if (weights === null || this.query === null) return null;
    const seq = ++this.sequence;
    try {
      const response = await postSearch(this.base, this.query, weights, this.k);
      if (seq !== this.sequence) return null; // superseded while in flight
      this.lastResponse = response;
      this.events.onResults?.(response);
      return response;
    } catch (error) {
      if (seq === this.sequence) this.events.onError?.(error);
      return null;
    }
  }
}
