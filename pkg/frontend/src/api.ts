// Thin fetch wrappers over the documented endpoints; nothing else.

import type {
  ClassifyResponse,
  HealthResponse,
  Kind,
  LabelSpaceInfo,
  PresetsResponse,
  SearchQuery,
  SearchResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, init);
  if (!response.ok) {
    let code = "http_error";
    let message = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      code = body?.error?.code ?? code;
      message = body?.error?.message ?? message;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

function post<T>(base: string, path: string, body: unknown): Promise<T> {
  return request<T>(base, path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export function getHealth(base: string): Promise<HealthResponse> {
  return request(base, "/health");
}

export function getLabels(base: string): Promise<{ spaces: LabelSpaceInfo[] }> {
  return request(base, "/labels");
}

export function getPresets(base: string): Promise<PresetsResponse> {
  return request(base, "/presets");
}

export function postSearch(
  base: string,
  query: SearchQuery,
  weights: Record<string, number>,
  k: number,
): Promise<SearchResponse> {
  return post(base, "/search", { ...query, weights, k });
}

export function postClassify(
  base: string,
  query: SearchQuery,
  kinds: Kind[],
  method: string,
  floor: number,
): Promise<ClassifyResponse> {
  return post(base, "/classify", { ...query, kinds, method, floor });
}
