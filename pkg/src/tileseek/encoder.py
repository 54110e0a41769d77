"""Query-modality resolution: text/image/location/raw into unit-norm vectors.

Real model inference stays behind a small HTTP contract (POST JSON ->
{"embedding": [...]}); deterministic mock encoders cover offline runs and
tests, and a nearest-tile proxy turns location queries into self-consistent
image queries with no encoder at all.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import requests

from . import rng
from .errors import (
    DimensionMismatchError,
    EncoderError,
    EncoderHTTPError,
    EncoderResponseError,
    EncoderTimeoutError,
    NonFiniteVectorError,
    UnknownCellError,
    UnsupportedModalityError,
)
from .grid import GeoPoint, GridCell
from .models import ModelInfo, Registry, supports, validate_vector
from .search import QueryVector, dequantize, l2_normalize

MODALITY_KINDS = ("text", "image_cell", "image_upload", "location", "raw")
LOCATION_MODES = ("remote", "mock", "nearest_tile_proxy")


@dataclass(frozen=True)
class QuerySpec:
    """One query: what modality, what payload, against which model."""

    modality: str
    payload: object
    model_id: str

    def __post_init__(self):
        if self.modality not in MODALITY_KINDS:
            raise UnsupportedModalityError(
                f"unknown modality {self.modality!r}; expected one of {MODALITY_KINDS}"
            )


@dataclass(frozen=True)
class EncoderEndpoint:
    """Where a remote encoder lives; base_url is the full POST target."""

    base_url: str
    model_id: str
    timeout_ms: int = 10_000
    auth_token: Optional[str] = None

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}")


@dataclass
class MockEncoderConfig:
    """Anchor field for the deterministic location encoder."""

    seed: int
    anchor_points: List[GeoPoint]
    anchor_vectors: np.ndarray  # (n_anchors, dim) float32, unit rows
    tau_km: float = 500.0
    earth_radius_km: float = 6378.137

    def __post_init__(self):
        if len(self.anchor_points) < 8:
            raise ValueError(f"need at least 8 anchors, got {len(self.anchor_points)}")
        if self.anchor_vectors.shape[0] != len(self.anchor_points):
            raise ValueError("anchor_vectors rows must match anchor_points")
        if self.tau_km <= 0:
            raise ValueError(f"tau_km must be positive, got {self.tau_km}")

    @property
    def dim(self) -> int:
        return self.anchor_vectors.shape[1]


def make_location_field(
    seed: int,
    dim: int,
    anchor_count: int = 64,
    tau_km: float = 500.0,
    bbox: Optional[Sequence[float]] = None,
) -> MockEncoderConfig:
    """Deterministic anchors: positions keyed by (seed, i), vectors by (seed, i, dim).

    Positions are area-uniform on the sphere, or within bbox when given.
    """
    anchor_count = max(8, int(anchor_count))
    if bbox is None:
        lat_lo, lat_hi, lon_lo, lon_hi = -90.0, 90.0, -180.0, 180.0
    else:
        lat_lo, lat_hi, lon_lo, lon_hi = bbox
    sin_lo, sin_hi = math.sin(math.radians(lat_lo)), math.sin(math.radians(lat_hi))
    points = []
    vectors = np.empty((anchor_count, dim), dtype=np.float32)
    for i in range(anchor_count):
        pos_state = rng.derive_state(b"tileseek-anchor-pos", rng.key_bytes(seed, i))
        u = rng.uniforms(pos_state, 2)
        lat = math.degrees(math.asin(sin_lo + (sin_hi - sin_lo) * u[0]))
        lon = lon_lo + (lon_hi - lon_lo) * u[1]
        points.append(GeoPoint(lat, lon))
        vec_state = rng.derive_state(b"tileseek-anchor-vec", rng.key_bytes(seed, i, dim))
        vectors[i] = rng.unit_vector(vec_state, dim)
    return MockEncoderConfig(seed, points, vectors, tau_km)


def mock_location_encoder(config: MockEncoderConfig, p: GeoPoint, dim: int) -> np.ndarray:
    """Kernel-weighted anchor blend: sum_i exp(-d_gc(p, a_i)/tau) * vec_i."""
    if dim != config.dim:
        raise DimensionMismatchError(config.dim, dim, context="mock location field")
    return location_field_batch(config, np.array([p.lat]), np.array([p.lon]))[0]


def location_field_batch(config: MockEncoderConfig, lats, lons) -> np.ndarray:
    """mock_location_encoder over m points at once; returns (m, dim) float32."""
    lat1 = np.radians(np.array([a.lat for a in config.anchor_points]))  # (a,)
    lon1 = np.radians(np.array([a.lon for a in config.anchor_points]))
    lat2 = np.radians(np.asarray(lats, dtype=np.float64))[:, None]  # (m, 1)
    lon2 = np.radians(np.asarray(lons, dtype=np.float64))[:, None]
    s = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    d_km = 2.0 * config.earth_radius_km * np.arcsin(np.minimum(1.0, np.sqrt(s)))
    weights = np.exp(-d_km / config.tau_km)  # (m, a)
    return (weights @ config.anchor_vectors.astype(np.float64)).astype(np.float32)


def mock_text_encoder(seed: int, dim: int, prompt: str) -> np.ndarray:
    """Deterministic normals keyed by (prompt, seed); normalized by the caller."""
    state = rng.derive_state(b"tileseek-text", rng.key_bytes(prompt, seed))
    return rng.standard_normals(state, dim).astype(np.float32)


def mock_image_encoder(seed: int, dim: int, data: bytes) -> np.ndarray:
    """Deterministic stand-in for uploaded-image embedding, keyed by the bytes."""
    state = rng.derive_state(b"tileseek-image", rng.key_bytes(data, seed))
    return rng.standard_normals(state, dim).astype(np.float32)


# ---------------------------------------------------------------------------
# Remote wire contract
# ---------------------------------------------------------------------------


def _post_embedding(endpoint: EncoderEndpoint, payload: dict, expected_dim: int) -> np.ndarray:
    headers = {"Content-Type": "application/json"}
    if endpoint.auth_token:
        headers["Authorization"] = f"Bearer {endpoint.auth_token}"
    try:
        resp = requests.post(
            endpoint.base_url,
            json=payload,
            headers=headers,
            timeout=endpoint.timeout_ms / 1000.0,
        )
    except requests.Timeout:
        raise EncoderTimeoutError(
            f"encoder at {endpoint.base_url} timed out after {endpoint.timeout_ms} ms"
        ) from None
    except requests.RequestException as e:
        raise EncoderError(f"encoder at {endpoint.base_url} unreachable: {e}") from e
    if resp.status_code >= 400:
        raise EncoderHTTPError(resp.status_code, resp.text, endpoint.base_url)
    try:
        body = resp.json()
    except (json.JSONDecodeError, ValueError) as e:
        raise EncoderResponseError(f"encoder returned non-JSON body: {e}") from e
    if not isinstance(body, dict) or "embedding" not in body:
        raise EncoderResponseError("encoder response missing 'embedding' field")
    emb = body["embedding"]
    if not isinstance(emb, list) or not all(isinstance(x, (int, float)) for x in emb):
        raise EncoderResponseError("'embedding' is not a flat list of numbers")
    arr = np.asarray(emb, dtype=np.float32)
    if arr.shape[0] != expected_dim:
        raise DimensionMismatchError(expected_dim, arr.shape[0], context=endpoint.model_id)
    finite = np.isfinite(arr)
    if not finite.all():
        raise NonFiniteVectorError(int(np.argmin(finite)))
    return arr


def encode_text_remote(endpoint: EncoderEndpoint, prompt: str, expected_dim: int) -> np.ndarray:
    return _post_embedding(
        endpoint, {"model": endpoint.model_id, "modality": "text", "text": prompt}, expected_dim
    )


def encode_image_remote(endpoint: EncoderEndpoint, data: bytes, expected_dim: int) -> np.ndarray:
    return _post_embedding(
        endpoint,
        {
            "model": endpoint.model_id,
            "modality": "image",
            "image_b64": base64.b64encode(data).decode("ascii"),
        },
        expected_dim,
    )


def encode_location_remote(endpoint: EncoderEndpoint, p: GeoPoint, expected_dim: int) -> np.ndarray:
    return _post_embedding(
        endpoint,
        {"model": endpoint.model_id, "modality": "location", "lat": p.lat, "lon": p.lon},
        expected_dim,
    )


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


@dataclass
class QueryResolver:
    """Routes QuerySpecs to encoders/corpus and returns unit-norm QueryVectors.

    mode: "mock" resolves everything offline; "remote" calls the encoder
    endpoint; "proxy" answers location queries from the nearest corpus tile
    and falls back to mock for text/image uploads.
    """

    corpus: object  # store.Corpus; duck-typed to keep this module corpus-agnostic
    registry: Registry
    mode: str = "mock"
    encoder_url: Optional[str] = None
    timeout_ms: int = 10_000
    auth_token: Optional[str] = None
    mock_seed: int = 0
    _fields: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("mock", "remote", "proxy"):
            raise ValueError(f"encoder mode must be mock|remote|proxy, got {self.mode!r}")
        if self.mode == "remote" and not self.encoder_url:
            raise ValueError("remote encoder mode requires encoder_url")

    def _endpoint(self, model: ModelInfo) -> EncoderEndpoint:
        return EncoderEndpoint(self.encoder_url, model.id, self.timeout_ms, self.auth_token)

    def _location_field(self, model: ModelInfo) -> MockEncoderConfig:
        if model.id not in self._fields:
            meta = {}
            manifest = getattr(self.corpus, "manifest", None)
            if manifest is not None and manifest.synth:
                meta = manifest.synth.get("mock_location") or {}
            self._fields[model.id] = make_location_field(
                seed=int(meta.get("seed", self.mock_seed)),
                dim=model.dim,
                anchor_count=int(meta.get("anchor_count", 64)),
                tau_km=float(meta.get("tau_km", 500.0)),
                bbox=meta.get("bbox"),
            )
        return self._fields[model.id]

    def resolve(self, spec: QuerySpec) -> QueryVector:
        model = self.registry.get(spec.model_id)
        modality = spec.modality

        if modality == "raw":
            raw = validate_vector(model, np.asarray(spec.payload, dtype=np.float32))
            return QueryVector(model.id, l2_normalize(raw))

        if modality == "image_cell":
            return self._resolve_image_cell(model, spec.payload)

        if modality == "image_upload":
            if not supports(model, "image"):
                raise UnsupportedModalityError(f"model {model.id} does not support image queries")
            data = bytes(spec.payload)
            if self.mode == "remote":
                raw = encode_image_remote(self._endpoint(model), data, model.dim)
            else:
                raw = mock_image_encoder(self.mock_seed, model.dim, data)
            return QueryVector(model.id, l2_normalize(raw))

        if modality == "text":
            if not supports(model, "text"):
                raise UnsupportedModalityError(f"model {model.id} does not support text queries")
            prompt = str(spec.payload)
            if self.mode == "remote":
                raw = encode_text_remote(self._endpoint(model), prompt, model.dim)
            else:
                raw = mock_text_encoder(self.mock_seed, model.dim, prompt)
            return QueryVector(model.id, l2_normalize(raw))

        # location
        if not supports(model, "location"):
            raise UnsupportedModalityError(f"model {model.id} does not support location queries")
        p = spec.payload if isinstance(spec.payload, GeoPoint) else GeoPoint(*spec.payload)
        location_mode = {"mock": "mock", "remote": "remote", "proxy": "nearest_tile_proxy"}[self.mode]
        raw = self.encode_location(model, p, location_mode)
        return QueryVector(model.id, l2_normalize(raw))

    def _resolve_image_cell(self, model: ModelInfo, payload) -> QueryVector:
        if not supports(model, "image"):
            raise UnsupportedModalityError(f"model {model.id} does not support image queries")
        cell = payload if isinstance(payload, GridCell) else None
        if cell is None:
            from .grid import parse_cell_id

            cell = parse_cell_id(str(payload))
        found, missing = self.corpus.lookup(model.id, [cell])
        if missing:
            raise UnknownCellError(f"cell {missing[0]} has no record for model {model.id}")
        stored = dequantize(found[0].vector) if found[0].vector.dtype == np.float16 else found[0].vector
        return QueryVector(model.id, l2_normalize(stored))

    def encode_location(self, model: ModelInfo, p: GeoPoint, mode: str) -> np.ndarray:
        """Raw (unnormalized) location embedding under the chosen mode."""
        if mode not in LOCATION_MODES:
            raise ValueError(f"location mode must be one of {LOCATION_MODES}, got {mode!r}")
        if mode == "remote":
            return encode_location_remote(self._endpoint(model), p, model.dim)
        if mode == "mock":
            return mock_location_encoder(self._location_field(model), p, model.dim)
        # nearest_tile_proxy: the stored image vector of the closest corpus cell
        cell, idx = self.corpus.nearest_cell(model.id, p)
        table = self.corpus.table(model.id)
        vec = table.block.vectors[idx]
        return dequantize(vec) if vec.dtype == np.float16 else np.asarray(vec, dtype=np.float32)
