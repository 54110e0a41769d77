import { ApiError, ExplorerClient } from "./api";
import { renderGallery } from "./gallery";
import { drawMap } from "./map";
import { canvasToLonLat } from "./projection";
import {
  allowedModalities,
  buildQueryRequest,
  canSubmit,
  initialState,
  modelById,
  pickLocation,
  selectModel,
  setModality,
  setModels,
  useCellAsQuery,
  type UiState,
} from "./state";
import type { UiModality } from "./types";

export interface AppOptions {
  apiBaseUrl?: string;
  thumbnailTemplate?: string;
}

const MODALITY_LABELS: Record<UiModality, string> = {
  text: "Text",
  image_cell: "Tile",
  image_upload: "Upload",
  location: "Location",
};

export class ExplorerApp {
  readonly client: ExplorerClient;
  state: UiState = initialState();

  private root: HTMLElement;
  private thumbnailTemplate?: string;
  private inflight: AbortController | null = null;
  private overlay: HTMLImageElement | null = null;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.client = new ExplorerClient(options.apiBaseUrl ?? "");
    this.thumbnailTemplate = options.thumbnailTemplate;
  }

  async start(): Promise<void> {
    this.renderShell();
    try {
      const models = await this.client.getModels();
      this.state = setModels(this.state, models);
      this.syncControls();
    } catch (err) {
      this.showError(err);
    }
  }

  private el<T extends HTMLElement>(selector: string): T {
    const node = this.root.querySelector(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node as T;
  }

  private renderShell(): void {
    this.root.innerHTML = `
      <div class="panel controls">
        <h1>tile explorer</h1>
        <label class="field">model
          <select id="model-select"></select>
        </label>
        <div id="modality-tabs" class="tabs"></div>
        <div id="payload-area">
          <textarea id="prompt-input" rows="3"
            placeholder="a satellite image of ..."></textarea>
          <div id="cell-pick" class="pick-line">tile: <span id="picked-cell">none</span></div>
          <input id="image-input" type="file" accept="image/*" />
          <div id="location-pick" class="pick-line">
            location: <span id="picked-location">click the map</span>
          </div>
        </div>
        <label class="field">top-k
          <input id="k-input" type="number" min="1" step="1" value="5" />
        </label>
        <label class="field">fraction
          <input id="fraction-input" type="number" min="0.0001" max="1" step="0.005"
            value="0.025" />
        </label>
        <label class="field">overlay opacity
          <input id="opacity-input" type="range" min="0" max="1" step="0.05" value="0.85" />
        </label>
        <button id="submit-btn" type="button" disabled>search</button>
        <div id="error-box" class="error" hidden></div>
        <div class="exports">
          <a id="export-geojson" class="disabled">download geojson</a>
          <a id="export-map" class="disabled">download map png</a>
        </div>
        <div id="status-line" class="status"></div>
      </div>
      <div class="panel results">
        <canvas id="map-canvas" width="1024" height="512"></canvas>
        <div id="gallery" class="gallery"></div>
      </div>
    `;

    this.el<HTMLSelectElement>("#model-select").addEventListener("change", (e) => {
      this.state = selectModel(this.state, (e.target as HTMLSelectElement).value);
      this.syncControls();
    });
    this.el<HTMLTextAreaElement>("#prompt-input").addEventListener("input", (e) => {
      this.state = { ...this.state, prompt: (e.target as HTMLTextAreaElement).value };
      this.syncSubmit();
    });
    this.el<HTMLInputElement>("#k-input").addEventListener("input", (e) => {
      this.state = { ...this.state, k: Number((e.target as HTMLInputElement).value) };
      this.syncSubmit();
    });
    this.el<HTMLInputElement>("#fraction-input").addEventListener("input", (e) => {
      this.state = { ...this.state, fraction: Number((e.target as HTMLInputElement).value) };
      this.syncSubmit();
    });
    this.el<HTMLInputElement>("#opacity-input").addEventListener("input", (e) => {
      this.state = {
        ...this.state,
        overlayOpacity: Number((e.target as HTMLInputElement).value),
      };
      this.redrawMap();
    });
    this.el<HTMLInputElement>("#image-input").addEventListener("change", async (e) => {
      const file = (e.target as HTMLInputElement).files?.[0];
      if (!file) return;
      const buf = new Uint8Array(await file.arrayBuffer());
      let binary = "";
      buf.forEach((b) => (binary += String.fromCharCode(b)));
      this.state = { ...this.state, uploadedImageB64: btoa(binary) };
      this.syncSubmit();
    });
    this.el<HTMLButtonElement>("#submit-btn").addEventListener("click", () => {
      void this.submit();
    });

    const canvas = this.el<HTMLCanvasElement>("#map-canvas");
    canvas.addEventListener("click", (e) => {
      const rect = canvas.getBoundingClientRect();
      const x = ((e.clientX - rect.left) / rect.width) * canvas.width;
      const y = ((e.clientY - rect.top) / rect.height) * canvas.height;
      const pick = canvasToLonLat(x, y, canvas.width, canvas.height);
      if (!pick) return;
      const model = modelById(this.state, this.state.selectedModel);
      if (!model || !allowedModalities(model).includes("location")) return;
      this.state = pickLocation(this.state, pick);
      this.syncControls();
    });
    this.redrawMap();
  }

  private syncControls(): void {
    const select = this.el<HTMLSelectElement>("#model-select");
    select.replaceChildren(
      ...this.state.models.map((m) => {
        const option = this.root.ownerDocument.createElement("option");
        option.value = m.id;
        option.textContent = `${m.id} (${m.arch_label}, d=${m.dim})`;
        option.selected = m.id === this.state.selectedModel;
        return option;
      }),
    );

    const model = modelById(this.state, this.state.selectedModel);
    const tabs = this.el<HTMLDivElement>("#modality-tabs");
    tabs.replaceChildren(
      ...(Object.keys(MODALITY_LABELS) as UiModality[]).map((modality) => {
        const btn = this.root.ownerDocument.createElement("button");
        btn.type = "button";
        btn.className = "tab";
        btn.dataset.modality = modality;
        btn.textContent = MODALITY_LABELS[modality];
        const allowed = model ? allowedModalities(model).includes(modality) : false;
        btn.disabled = !allowed;
        if (modality === this.state.modality) btn.classList.add("active");
        btn.addEventListener("click", () => {
          this.state = setModality(this.state, modality);
          this.syncControls();
        });
        return btn;
      }),
    );

    this.el<HTMLTextAreaElement>("#prompt-input").style.display =
      this.state.modality === "text" ? "" : "none";
    this.el<HTMLDivElement>("#cell-pick").style.display =
      this.state.modality === "image_cell" ? "" : "none";
    this.el<HTMLInputElement>("#image-input").style.display =
      this.state.modality === "image_upload" ? "" : "none";
    this.el<HTMLDivElement>("#location-pick").style.display =
      this.state.modality === "location" ? "" : "none";

    this.el<HTMLSpanElement>("#picked-cell").textContent = this.state.pickedCell ?? "none";
    const loc = this.state.clickedLocation;
    this.el<HTMLSpanElement>("#picked-location").textContent = loc
      ? `${loc.lat.toFixed(3)}, ${loc.lon.toFixed(3)}`
      : "click the map";
    this.syncSubmit();
    this.redrawMap();
  }

  private syncSubmit(): void {
    this.el<HTMLButtonElement>("#submit-btn").disabled = !canSubmit(this.state);
  }

  private showError(err: unknown): void {
    const box = this.el<HTMLDivElement>("#error-box");
    if (err instanceof ApiError) {
      box.textContent = `${err.message} [${err.code}]`;
    } else if (err instanceof Error) {
      box.textContent = err.message;
    } else {
      box.textContent = String(err);
    }
    box.hidden = false;
  }

  async submit(): Promise<void> {
    const request = buildQueryRequest(this.state);
    if (!request) return;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.el<HTMLDivElement>("#error-box").hidden = true;
    this.el<HTMLDivElement>("#status-line").textContent = "searching...";
    try {
      const response = await this.client.postQuery(request, controller.signal);
      if (controller.signal.aborted) return;
      this.state = { ...this.state, lastResponse: response };
      this.el<HTMLDivElement>("#status-line").textContent =
        `${response.results.length} tiles, mask ${response.mask_size}, ` +
        `${response.timing_ms.toFixed(0)} ms`;
      await this.loadOverlay(response.query_id);
      this.renderResults();
    } catch (err) {
      if (controller.signal.aborted) return;
      this.el<HTMLDivElement>("#status-line").textContent = "";
      this.showError(err);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  private async loadOverlay(queryId: string): Promise<void> {
    const doc = this.root.ownerDocument;
    const img = doc.createElement("img");
    img.src = this.client.mapUrl(queryId);
    await new Promise<void>((resolve) => {
      img.onload = () => resolve();
      img.onerror = () => resolve(); // fall back to no overlay
    });
    this.overlay = img;
  }

  private renderResults(): void {
    const response = this.state.lastResponse;
    if (!response) return;
    renderGallery(
      this.el<HTMLDivElement>("#gallery"),
      response.results,
      {
        onUseAsQuery: (cellId) => {
          this.state = useCellAsQuery(this.state, cellId);
          this.syncControls();
          void this.submit();
        },
      },
      { thumbnailTemplate: this.thumbnailTemplate },
    );

    const geo = this.el<HTMLAnchorElement>("#export-geojson");
    geo.href = this.client.exportUrl(response.query_id);
    geo.download = `tileseek-${response.query_id}.geojson`;
    geo.classList.remove("disabled");
    const map = this.el<HTMLAnchorElement>("#export-map");
    map.href = this.client.mapUrl(response.query_id);
    map.download = `tileseek-${response.query_id}.png`;
    map.classList.remove("disabled");
    this.redrawMap();
  }

  private redrawMap(): void {
    const canvas = this.el<HTMLCanvasElement>("#map-canvas");
    if (typeof canvas.getContext !== "function") return; // jsdom: no canvas backend
    drawMap(canvas, {
      overlay: this.overlay,
      overlayOpacity: this.state.overlayOpacity,
      pins: this.state.lastResponse?.results ?? [],
      clicked: this.state.clickedLocation,
    });
  }
}
