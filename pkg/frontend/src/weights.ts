// Weight-panel state: raw sliders in [0, 100], normalized weights derived.
//
// A slider at zero excludes its characteristic from the request entirely;
// the remaining sliders are normalized to sum to one before anything is
// sent, so the server and the panel always display the same numbers.

import type { Kind, Preset } from "./types.js";

export interface WeightPanelState {
  sliders: Record<string, number>;
  activePreset: string | null;
}

export function initialState(kinds: Kind[]): WeightPanelState {
  const sliders: Record<string, number> = {};
  for (const kind of kinds) sliders[kind] = 0;
  if (kinds.includes("color")) sliders["color"] = 50;
  if (kinds.includes("shape")) sliders["shape"] = 50;
  const positive = Object.values(sliders).some((v) => v > 0);
  if (!positive && kinds.length > 0) sliders[kinds[0]] = 100;
  return { sliders, activePreset: null };
}

export function setSlider(
  state: WeightPanelState,
  kind: string,
  value: number,
): WeightPanelState {
  const clamped = Math.min(100, Math.max(0, value));
  return {
    sliders: { ...state.sliders, [kind]: clamped },
    activePreset: null, // manual motion leaves the preset
  };
}

export function applyPreset(state: WeightPanelState, preset: Preset): WeightPanelState {
  const sliders: Record<string, number> = {};
  for (const kind of Object.keys(state.sliders)) sliders[kind] = 0;
  for (const [kind, weight] of Object.entries(preset.weights)) {
    sliders[kind] = (weight as number) * 100;
  }
  return { sliders, activePreset: preset.name };
}

/** Normalized weights over the positive sliders; zeros are excluded. */
export function requestWeights(state: WeightPanelState): Record<string, number> | null {
  const positive = Object.entries(state.sliders).filter(([, v]) => v > 0);
  const total = positive.reduce((acc, [, v]) => acc + v, 0);
  if (total <= 0) return null;
  const out: Record<string, number> = {};
  for (const [kind, value] of positive) out[kind] = value / total;
  return out;
}

/** Display weights including zero rows (zero stays zero). */
export function displayWeights(state: WeightPanelState): Record<string, number> {
  const normalized = requestWeights(state) ?? {};
  const out: Record<string, number> = {};
  for (const kind of Object.keys(state.sliders)) out[kind] = normalized[kind] ?? 0;
  return out;
}

export function searchEnabled(state: WeightPanelState): boolean {
  return requestWeights(state) !== null;
}

export function weightSum(weights: Record<string, number>): number {
  return Object.values(weights).reduce((a, b) => a + b, 0);
}
