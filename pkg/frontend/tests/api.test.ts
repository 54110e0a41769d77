import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, ExplorerClient } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("ExplorerClient", () => {
  it("fetches models from the base url", async () => {
    const spy = vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse([]));
    const client = new ExplorerClient("http://svc:9000/");
    await client.getModels();
    expect(spy).toHaveBeenCalledWith("http://svc:9000/api/models", { signal: undefined });
  });

  it("posts query requests as JSON", async () => {
    const spy = vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse({ query_id: "q", results: [], map_ref: "", mask_size: 1, timing_ms: 1 }),
    );
    const client = new ExplorerClient();
    const request = {
      model_id: "farslip",
      modality: "text",
      payload: { text: "x" },
      k: 5,
      fraction: 0.025,
    };
    await client.postQuery(request);
    const [url, init] = spy.mock.calls[0]!;
    expect(url).toBe("/api/query");
    expect(init?.method).toBe("POST");
    expect(JSON.parse(init?.body as string)).toEqual(request);
  });

  it("surfaces service error bodies verbatim", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse({ error: "model nope is unknown", code: "unknown_model" }, 400),
    );
    const client = new ExplorerClient();
    const err = await client.getModels().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("unknown_model");
    expect(err.status).toBe(400);
    expect(err.message).toBe("model nope is unknown");
  });

  it("copes with non-json error bodies", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(new Response("boom", { status: 502 }));
    const err = await new ExplorerClient().getModels().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("http_error");
    expect(err.status).toBe(502);
  });

  it("builds export and map urls with the query id embedded", () => {
    const client = new ExplorerClient("http://svc");
    expect(client.mapUrl("abc123")).toBe("http://svc/api/map/abc123.png");
    expect(client.exportUrl("abc123")).toBe("http://svc/api/export/abc123.geojson");
  });
});
