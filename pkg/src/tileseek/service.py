"""HTTP JSON API: query resolution -> exact search -> similarity map -> export.

Every 4xx/5xx body is {"error": text, "code": token}; codes are stable and
listed in ERROR_CODES. The corpus is immutable after load; the only mutable
shared state is the LRU session cache, which is lock-protected.
"""

from __future__ import annotations

import secrets
import threading
import time
from collections import OrderedDict
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import search
from .encoder import MODALITY_KINDS, QueryResolver, QuerySpec
from .errors import (
    CellIdError,
    CorpusError,
    DimensionMismatchError,
    EncoderError,
    NonFiniteVectorError,
    RegistryError,
    UnknownCellError,
    UnsupportedModalityError,
    ZeroNormError,
)
from .grid import GeoPoint, cell_center, cell_id_string, parse_cell_id
from .mapview import RasterSpec, bin_arrays, export_geojson, render_png
from .models import Registry
from .store import Corpus

ERROR_CODES = (
    "invalid_request",
    "unknown_model",
    "unsupported_modality",
    "unknown_cell",
    "bad_cell_id",
    "dim_mismatch",
    "non_finite",
    "zero_norm",
    "encoder_failure",
    "corpus_not_loaded",
    "unknown_query",
    "internal",
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        assert code in ERROR_CODES, code
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ServiceConfig:
    corpus_manifest: Optional[str] = None
    registry_path: Optional[str] = None
    encoder_mode: str = "mock"
    encoder_url: Optional[str] = None
    mock_seed: int = 0
    cache_capacity: int = 256
    cache_ttl_s: float = 3600.0
    raster_width: int = 1440
    raster_height: int = 720
    cors_origins: List[str] = field(default_factory=list)


@dataclass
class CachedQuery:
    results: List[dict]
    png: bytes
    geojson: str
    mask_size: int
    model_id: str


class SessionCache:
    """LRU with TTL; safe under concurrent insert/evict/read."""

    def __init__(self, capacity: int = 256, ttl_s: float = 3600.0):
        self.capacity = capacity
        self.ttl_s = ttl_s
        self._entries: "OrderedDict[str, tuple]" = OrderedDict()
        self._lock = threading.Lock()

    def put(self, key: str, value: CachedQuery) -> None:
        with self._lock:
            self._entries[key] = (time.monotonic(), value)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def get(self, key: str) -> Optional[CachedQuery]:
        with self._lock:
            item = self._entries.get(key)
            if item is None:
                return None
            stamp, value = item
            if time.monotonic() - stamp > self.ttl_s:
                del self._entries[key]
                return None
            self._entries.move_to_end(key)
            return value

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _parse_query_payload(body: dict) -> QuerySpec:
    model_id = body.get("model_id")
    modality = body.get("modality")
    if not isinstance(model_id, str) or not model_id:
        raise ApiError(400, "invalid_request", "model_id must be a non-empty string")
    if modality not in MODALITY_KINDS:
        raise ApiError(
            400, "invalid_request", f"modality must be one of {list(MODALITY_KINDS)}"
        )
    payload = body.get("payload")
    if not isinstance(payload, dict):
        raise ApiError(400, "invalid_request", "payload must be an object")
    try:
        if modality == "text":
            value = payload["text"]
            if not isinstance(value, str) or not value.strip():
                raise ApiError(400, "invalid_request", "payload.text must be a non-empty string")
        elif modality == "image_cell":
            value = parse_cell_id(str(payload["cell_id"]))
        elif modality == "image_upload":
            import base64

            value = base64.b64decode(str(payload["image_b64"]), validate=True)
        elif modality == "location":
            value = GeoPoint(float(payload["lat"]), float(payload["lon"]))
        else:  # raw
            values = payload["values"]
            if not isinstance(values, list):
                raise ApiError(400, "invalid_request", "payload.values must be a list of numbers")
            value = values
    except ApiError:
        raise
    except CellIdError as e:
        raise ApiError(400, "bad_cell_id", str(e)) from None
    except KeyError as e:
        raise ApiError(
            400, "invalid_request", f"payload missing field {e.args[0]!r} for modality {modality}"
        ) from None
    except (TypeError, ValueError) as e:
        raise ApiError(400, "invalid_request", f"bad payload for modality {modality}: {e}") from None
    return QuerySpec(modality=modality, payload=value, model_id=model_id)


def _error_for(exc: Exception) -> ApiError:
    if isinstance(exc, RegistryError):
        return ApiError(400, "unknown_model", str(exc))
    if isinstance(exc, UnsupportedModalityError):
        return ApiError(400, "unsupported_modality", str(exc))
    if isinstance(exc, UnknownCellError):
        return ApiError(404, "unknown_cell", str(exc))
    if isinstance(exc, DimensionMismatchError):
        return ApiError(422, "dim_mismatch", str(exc))
    if isinstance(exc, NonFiniteVectorError):
        return ApiError(422, "non_finite", str(exc))
    if isinstance(exc, ZeroNormError):
        return ApiError(422, "zero_norm", str(exc))
    if isinstance(exc, EncoderError):
        return ApiError(502, "encoder_failure", str(exc))
    if isinstance(exc, CorpusError):
        return ApiError(503, "corpus_not_loaded", str(exc))
    return ApiError(500, "internal", str(exc))


def create_app(
    config: Optional[ServiceConfig] = None,
    corpus: Optional[Corpus] = None,
    registry: Optional[Registry] = None,
) -> FastAPI:
    """Build the service; pass a loaded corpus for tests, or a manifest path in
    config to load it on startup (healthz reports "loading" until done)."""
    config = config or ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state = app.state
        if state.corpus is None and config.corpus_manifest:
            def worker():
                try:
                    attach_corpus(Corpus.load(config.corpus_manifest))
                except Exception as e:  # surfaced via healthz and 503s
                    state.load_error = str(e)

            threading.Thread(target=worker, daemon=True).start()
        yield

    app = FastAPI(title="tileseek", docs_url=None, redoc_url=None, lifespan=lifespan)
    state = app.state
    state.config = config
    state.registry = registry or (
        Registry.from_manifest(config.registry_path) if config.registry_path else Registry.default()
    )
    state.corpus = corpus
    state.resolver = None
    state.cache = SessionCache(config.cache_capacity, config.cache_ttl_s)
    state.started_at = time.monotonic()
    state.raster_spec = RasterSpec(config.raster_width, config.raster_height)
    state.load_error = None

    def attach_corpus(c: Corpus) -> None:
        state.resolver = QueryResolver(
            corpus=c,
            registry=state.registry,
            mode=config.encoder_mode,
            encoder_url=config.encoder_url,
            mock_seed=config.mock_seed,
        )
        state.corpus = c

    if corpus is not None:
        attach_corpus(corpus)

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message, "code": exc.code})

    def require_corpus() -> Corpus:
        if state.corpus is None:
            detail = state.load_error or "corpus not loaded yet"
            raise ApiError(503, "corpus_not_loaded", detail)
        return state.corpus

    @app.get("/api/models")
    def get_models():
        return [m.to_dict() for m in state.registry]

    @app.post("/api/query")
    async def post_query(request: Request):
        started = time.perf_counter()
        corpus = require_corpus()
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "invalid_request", "body must be valid JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "invalid_request", "body must be a JSON object")
        qspec = _parse_query_payload(body)
        k = body.get("k", 5)
        fraction = body.get("fraction", 0.025)
        if not isinstance(k, int) or k < 1:
            raise ApiError(400, "invalid_request", "k must be an integer >= 1")
        if not isinstance(fraction, (int, float)) or not 0 < fraction <= 1:
            raise ApiError(400, "invalid_request", "fraction must be in (0, 1]")

        try:
            qvec = state.resolver.resolve(qspec)
            table = corpus.table(qspec.model_id)
            if len(table) == 0:
                raise CorpusError(f"corpus holds no records for {qspec.model_id}")
            scores = search.score_all(table.block, qvec)
        except Exception as e:
            raise _error_for(e) from e

        top = search.top_k_from_scores(table.block, scores, k)
        mask_size = search.fraction_k(float(fraction), len(table))
        raster = bin_arrays(table.lat, table.lon, scores, state.raster_spec, "max")
        png = render_png(raster)
        geojson = export_geojson(top, corpus.grid_spec, qspec.model_id)
        results = []
        for t in top:
            center = cell_center(corpus.grid_spec, t.cell)
            results.append(
                {
                    "cell_id": cell_id_string(t.cell),
                    "lat": center.lat,
                    "lon": center.lon,
                    "score": t.score,
                    "rank": t.rank,
                }
            )
        query_id = secrets.token_urlsafe(16)
        state.cache.put(
            query_id,
            CachedQuery(results=results, png=png, geojson=geojson, mask_size=mask_size,
                        model_id=qspec.model_id),
        )
        return {
            "query_id": query_id,
            "results": results,
            "map_ref": f"/api/map/{query_id}.png",
            "mask_size": mask_size,
            "timing_ms": (time.perf_counter() - started) * 1000.0,
        }

    def cached_or_404(query_id: str) -> CachedQuery:
        entry = state.cache.get(query_id)
        if entry is None:
            raise ApiError(404, "unknown_query", f"query {query_id} not cached (expired or unknown)")
        return entry

    @app.get("/api/map/{query_id}.png")
    def get_map(query_id: str):
        entry = cached_or_404(query_id)
        return Response(content=entry.png, media_type="image/png")

    @app.get("/api/export/{query_id}.geojson")
    def get_export(query_id: str):
        entry = cached_or_404(query_id)
        return Response(content=entry.geojson, media_type="application/geo+json")

    @app.get("/api/tile/{cell_id}")
    def get_tile(cell_id: str):
        corpus = require_corpus()
        try:
            cell = parse_cell_id(cell_id)
        except CellIdError as e:
            raise ApiError(400, "bad_cell_id", str(e)) from None
        models_present = []
        source_product = None
        for model_id in corpus.model_ids():
            table = corpus.table(model_id)
            i = table.index.get((cell.row, cell.col))
            if i is not None:
                models_present.append(model_id)
                if source_product is None:
                    source_product = table.products[i]
        if not models_present:
            raise ApiError(404, "unknown_cell", f"cell {cell_id} not present in corpus")
        center = cell_center(corpus.grid_spec, cell)
        return {
            "cell_id": cell_id_string(cell),
            "lat": center.lat,
            "lon": center.lon,
            "models_present": models_present,
            "source_product": source_product,
        }

    @app.get("/healthz")
    def healthz():
        loaded = state.corpus is not None
        body: Dict[str, object] = {
            "status": "ok" if loaded else "loading",
            "corpus": {
                "cells": state.corpus.cell_count() if loaded else 0,
                "models": state.corpus.model_ids() if loaded else [],
            },
            "uptime_s": time.monotonic() - state.started_at,
        }
        if state.load_error:
            body["status"] = "error"
            body["error"] = state.load_error
        return body

    return app
