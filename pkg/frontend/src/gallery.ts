import type { ResultTile } from "./types";

export interface GalleryHandlers {
  onUseAsQuery: (cellId: string) => void;
  onInspect?: (cellId: string) => void;
}

export interface GalleryOptions {
  /** Optional external thumbnail URL template, e.g. "https://tiles.example/{cell_id}.png".
   * The corpus stores embeddings only, so without this hook items render
   * coordinates, score, and a pin instead of imagery. */
  thumbnailTemplate?: string;
}

export function renderGallery(
  container: HTMLElement,
  results: ResultTile[],
  handlers: GalleryHandlers,
  options: GalleryOptions = {},
): void {
  container.replaceChildren();
  for (const tile of results) {
    const item = container.ownerDocument.createElement("div");
    item.className = "gallery-item";
    item.dataset.cellId = tile.cell_id;

    if (options.thumbnailTemplate) {
      const img = container.ownerDocument.createElement("img");
      img.className = "gallery-thumb";
      img.src = options.thumbnailTemplate.replaceAll("{cell_id}", tile.cell_id);
      img.alt = tile.cell_id;
      item.appendChild(img);
    } else {
      const pin = container.ownerDocument.createElement("div");
      pin.className = "gallery-pin";
      pin.textContent = `#${tile.rank}`;
      item.appendChild(pin);
    }

    const meta = container.ownerDocument.createElement("div");
    meta.className = "gallery-meta";
    meta.innerHTML =
      `<span class="rank">rank ${tile.rank}</span>` +
      `<span class="cell">${tile.cell_id}</span>` +
      `<span class="coords">${tile.lat.toFixed(3)}, ${tile.lon.toFixed(3)}</span>` +
      `<span class="score">score ${tile.score.toFixed(4)}</span>`;
    item.appendChild(meta);

    const reuse = container.ownerDocument.createElement("button");
    reuse.className = "use-as-query";
    reuse.type = "button";
    reuse.textContent = "use as query";
    reuse.addEventListener("click", () => handlers.onUseAsQuery(tile.cell_id));
    item.appendChild(reuse);

    if (handlers.onInspect) {
      const inspect = container.ownerDocument.createElement("button");
      inspect.className = "inspect";
      inspect.type = "button";
      inspect.textContent = "info";
      inspect.addEventListener("click", () => handlers.onInspect!(tile.cell_id));
      item.appendChild(inspect);
    }

    container.appendChild(item);
  }
}
