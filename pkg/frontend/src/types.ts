export interface ModelInfo {
  id: string;
  arch_label: string;
  dim: number;
  dtype: "float32" | "float16";
  modalities: string[];
  input_size_px: number;
  input_bands: string;
}

export type UiModality = "text" | "image_cell" | "image_upload" | "location";

export interface QueryPayload {
  text?: string;
  cell_id?: string;
  image_b64?: string;
  lat?: number;
  lon?: number;
  values?: number[];
}

export interface QueryRequest {
  model_id: string;
  modality: string;
  payload: QueryPayload;
  k: number;
  fraction: number;
}

export interface ResultTile {
  cell_id: string;
  lat: number;
  lon: number;
  score: number;
  rank: number;
}

export interface QueryResponse {
  query_id: string;
  results: ResultTile[];
  map_ref: string;
  mask_size: number;
  timing_ms: number;
}

export interface TileMeta {
  cell_id: string;
  lat: number;
  lon: number;
  models_present: string[];
  source_product: string | null;
}

export interface HealthInfo {
  status: string;
  corpus: { cells: number; models: string[] };
  uptime_s: number;
}

export interface ApiErrorBody {
  error: string;
  code: string;
}
