// Pure view models. No re-ranking ever happens here: the grid shows the
// hits exactly in the order the server returned them.

import type { Kind, SearchHit, SearchResponse, SuggestionRow } from "./types.js";

export interface GridTile {
  id: number;
  thumbnail: string;
  distanceText: string;
  labelText: string;
}

export function gridTiles(
  response: SearchResponse,
  labelNames: Partial<Record<Kind, Map<number, string>>> = {},
): GridTile[] {
  return response.hits.map((hit) => ({
    id: hit.id,
    thumbnail: hit.thumbnail,
    distanceText: hit.distance.toFixed(4),
    labelText: describeLabels(hit, labelNames),
  }));
}

function describeLabels(
  hit: SearchHit,
  labelNames: Partial<Record<Kind, Map<number, string>>>,
): string {
  const parts: string[] = [];
  for (const [kind, ids] of Object.entries(hit.labels)) {
    const names = labelNames[kind as Kind];
    for (const id of ids ?? []) {
      parts.push(names?.get(id) ?? `${kind}:${id}`);
    }
  }
  return parts.join(", ");
}

export interface SuggestionBar {
  name: string;
  confidence: number;
  percentText: string;
}

/** Bars above the floor, preserving the server's descending order. */
export function suggestionBars(rows: SuggestionRow[], floor: number): SuggestionBar[] {
  return rows
    .filter((row) => row.confidence > floor)
    .map((row) => ({
      name: row.name,
      confidence: row.confidence,
      percentText: `${(row.confidence * 100).toFixed(1)}%`,
    }));
}

export function weightBadge(weights: Record<string, number>): string {
  return Object.entries(weights)
    .filter(([, w]) => w > 0)
    .map(([kind, w]) => `${kind} ${(w * 100).toFixed(0)}%`)
    .join(" / ");
}
