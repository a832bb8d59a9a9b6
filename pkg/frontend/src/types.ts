// Payload shapes of the search service's JSON API.

export type Kind =
  | "figurative_main"
  | "figurative_sub"
  | "color"
  | "shape"
  | "text"
  | "sector"
  | "generic";

export interface SearchHit {
  id: number;
  distance: number;
  thumbnail: string;
  labels: Partial<Record<Kind, number[]>>;
}

export interface SearchResponse {
  weights: Partial<Record<Kind, number>>;
  k: number;
  truncated: boolean;
  hits: SearchHit[];
}

export interface SuggestionRow {
  label_id: number;
  name: string;
  confidence: number;
}

export interface ClassifyResponse {
  method: string;
  floor: number;
  results: Partial<Record<Kind, SuggestionRow[]>>;
}

export interface LabelInfo {
  id: number;
  name: string;
}

export interface LabelSpaceInfo {
  kind: Kind;
  labels: LabelInfo[];
}

export interface Preset {
  name: string;
  weights: Partial<Record<Kind, number>>;
}

export interface PresetsResponse {
  presets: Preset[];
  default_k: number;
  confidence_floor: number;
}

export interface HealthResponse {
  status: string;
  index_loaded: boolean;
  records: number;
  schema: Partial<Record<Kind, number>>;
}

export type SearchQuery = { logo_id: number } | { image_b64: string };
