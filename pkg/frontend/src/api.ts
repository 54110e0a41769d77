import type { HealthInfo, ModelInfo, QueryRequest, QueryResponse, TileMeta } from "./types";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function throwFromResponse(res: Response): Promise<never> {
  let code = "http_error";
  let message = `HTTP ${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") message = body.error;
    if (body && typeof body.code === "string") code = body.code;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, code, message);
}

/** Thin client for the retrieval service; every number shown in the UI comes
 * from these responses, never from client-side math. */
export class ExplorerClient {
  readonly baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async getModels(signal?: AbortSignal): Promise<ModelInfo[]> {
    const res = await fetch(`${this.baseUrl}/api/models`, { signal });
    if (!res.ok) await throwFromResponse(res);
    return res.json();
  }

  async postQuery(request: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
    const res = await fetch(`${this.baseUrl}/api/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
      signal,
    });
    if (!res.ok) await throwFromResponse(res);
    return res.json();
  }

  async getTile(cellId: string, signal?: AbortSignal): Promise<TileMeta> {
    const res = await fetch(`${this.baseUrl}/api/tile/${encodeURIComponent(cellId)}`, { signal });
    if (!res.ok) await throwFromResponse(res);
    return res.json();
  }

  async health(signal?: AbortSignal): Promise<HealthInfo> {
    const res = await fetch(`${this.baseUrl}/healthz`, { signal });
    if (!res.ok) await throwFromResponse(res);
    return res.json();
  }

  mapUrl(queryId: string): string {
    return `${this.baseUrl}/api/map/${queryId}.png`;
  }

  exportUrl(queryId: string): string {
    return `${this.baseUrl}/api/export/${queryId}.geojson`;
  }
}
