// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import { renderGallery } from "../src/gallery";
import type { ResultTile } from "../src/types";

function results(n: number): ResultTile[] {
  return Array.from({ length: n }, (_, i) => ({
    cell_id: `R0C${i * 3}`,
    lat: 0.04,
    lon: -180 + i,
    score: 0.9 - i * 0.05,
    rank: i + 1,
  }));
}

describe("gallery rendering", () => {
  it("renders one item per result with rank, score, and coordinates", () => {
    const container = document.createElement("div");
    renderGallery(container, results(5), { onUseAsQuery: () => {} });
    const items = container.querySelectorAll(".gallery-item");
    expect(items).toHaveLength(5);
    const first = items[0]!;
    expect(first.querySelector(".rank")?.textContent).toBe("rank 1");
    expect(first.querySelector(".cell")?.textContent).toBe("R0C0");
    expect(first.querySelector(".score")?.textContent).toContain("0.9000");
    expect(first.querySelector(".coords")?.textContent).toContain("-180.000");
  });

  it("wires use-as-query to the tile's cell id", () => {
    const container = document.createElement("div");
    const onUseAsQuery = vi.fn();
    renderGallery(container, results(3), { onUseAsQuery });
    const buttons = container.querySelectorAll<HTMLButtonElement>(".use-as-query");
    buttons[1]!.click();
    expect(onUseAsQuery).toHaveBeenCalledWith("R0C3");
  });

  it("uses the thumbnail template when configured", () => {
    const container = document.createElement("div");
    renderGallery(container, results(1), { onUseAsQuery: () => {} }, {
      thumbnailTemplate: "https://thumbs.example/{cell_id}.png",
    });
    const img = container.querySelector<HTMLImageElement>(".gallery-thumb");
    expect(img?.src).toBe("https://thumbs.example/R0C0.png");
  });

  it("falls back to a rank pin without a template", () => {
    const container = document.createElement("div");
    renderGallery(container, results(1), { onUseAsQuery: () => {} });
    expect(container.querySelector(".gallery-thumb")).toBeNull();
    expect(container.querySelector(".gallery-pin")?.textContent).toBe("#1");
  });

  it("clears previous items on re-render", () => {
    const container = document.createElement("div");
    renderGallery(container, results(5), { onUseAsQuery: () => {} });
    renderGallery(container, results(2), { onUseAsQuery: () => {} });
    expect(container.querySelectorAll(".gallery-item")).toHaveLength(2);
  });
});
