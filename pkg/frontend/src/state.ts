import type { ModelInfo, QueryRequest, QueryResponse, UiModality } from "./types";

export interface LocationPick {
  lat: number;
  lon: number;
}

export interface UiState {
  models: ModelInfo[];
  selectedModel: string | null;
  modality: UiModality;
  prompt: string;
  pickedCell: string | null;
  clickedLocation: LocationPick | null;
  uploadedImageB64: string | null;
  k: number;
  fraction: number;
  lastResponse: QueryResponse | null;
  overlayOpacity: number;
}

export function initialState(): UiState {
  return {
    models: [],
    selectedModel: null,
    modality: "text",
    prompt: "",
    pickedCell: null,
    clickedLocation: null,
    uploadedImageB64: null,
    k: 5,
    fraction: 0.025,
    lastResponse: null,
    overlayOpacity: 0.85,
  };
}

const MODALITY_ORDER: UiModality[] = ["text", "image_cell", "image_upload", "location"];

/** Which query tabs a model offers, straight from its capability list. */
export function allowedModalities(model: ModelInfo): UiModality[] {
  const out: UiModality[] = [];
  if (model.modalities.includes("text")) out.push("text");
  if (model.modalities.includes("image")) out.push("image_cell", "image_upload");
  if (model.modalities.includes("location")) out.push("location");
  return MODALITY_ORDER.filter((m) => out.includes(m));
}

export function modelById(state: UiState, id: string | null): ModelInfo | null {
  return state.models.find((m) => m.id === id) ?? null;
}

export function setModels(state: UiState, models: ModelInfo[]): UiState {
  const next = { ...state, models };
  const first = models[0];
  if (!modelById(next, state.selectedModel) && first) {
    return selectModel(next, first.id);
  }
  return next;
}

export function selectModel(state: UiState, id: string): UiState {
  const next = { ...state, selectedModel: id };
  const model = modelById(next, id);
  if (model && !allowedModalities(model).includes(next.modality)) {
    const fallback = allowedModalities(model)[0];
    next.modality = fallback ?? "image_cell";
  }
  return next;
}

export function setModality(state: UiState, modality: UiModality): UiState {
  const model = modelById(state, state.selectedModel);
  if (model && !allowedModalities(model).includes(modality)) return state;
  return { ...state, modality };
}

export function pickLocation(state: UiState, pick: LocationPick | null): UiState {
  if (pick === null) return state; // clicks outside the map are ignored
  return { ...state, clickedLocation: pick, modality: "location" };
}

/** The gallery's "use as query" action: re-query by the tile's cell id. */
export function useCellAsQuery(state: UiState, cellId: string): UiState {
  return { ...state, pickedCell: cellId, modality: "image_cell" };
}

export function payloadReady(state: UiState): boolean {
  switch (state.modality) {
    case "text":
      return state.prompt.trim().length > 0;
    case "image_cell":
      return state.pickedCell !== null;
    case "image_upload":
      return state.uploadedImageB64 !== null;
    case "location":
      return state.clickedLocation !== null;
  }
}

export function canSubmit(state: UiState): boolean {
  const model = modelById(state, state.selectedModel);
  if (!model) return false;
  if (!allowedModalities(model).includes(state.modality)) return false;
  if (!Number.isInteger(state.k) || state.k < 1) return false;
  if (!(state.fraction > 0 && state.fraction <= 1)) return false;
  return payloadReady(state);
}

/** Build the POST /api/query body; null when the state cannot be submitted. */
export function buildQueryRequest(state: UiState): QueryRequest | null {
  if (!canSubmit(state) || !state.selectedModel) return null;
  const base = {
    model_id: state.selectedModel,
    modality: state.modality as string,
    k: state.k,
    fraction: state.fraction,
  };
  switch (state.modality) {
    case "text":
      return { ...base, payload: { text: state.prompt.trim() } };
    case "image_cell":
      return { ...base, payload: { cell_id: state.pickedCell! } };
    case "image_upload":
      return { ...base, payload: { image_b64: state.uploadedImageB64! } };
    case "location":
      return {
        ...base,
        payload: { lat: state.clickedLocation!.lat, lon: state.clickedLocation!.lon },
      };
  }
}
