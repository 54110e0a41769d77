"""Similarity rasters, threshold masks, PNG rendering, and GeoJSON export.

Projection is plain equirectangular: lon [-180, 180) maps to x [0, width),
lat (90, -90] maps to y [0, height) top-down. Rendering is byte-deterministic:
a fixed 256-entry colormap shipped as data, 8-bit RGBA, non-interlaced PNG,
zlib level 6, filter 0 on every scanline.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass
from importlib import resources
from typing import List, Sequence, Set, Tuple

import numpy as np

from .grid import GridCell, GridSpec, cell_center, cell_id_string
from .search import ScoredTile, fraction_k

AGGREGATORS = ("max", "mean")
BACKGROUNDS = ("transparent", "graticule")
PNG_COMPRESS_LEVEL = 6
GRATICULE_STEP_DEG = 30
GRATICULE_RGBA = (128, 128, 128, 64)
DEGENERATE_COLOR_INDEX = 128  # all-equal scores collapse to this table entry


@dataclass(frozen=True)
class RasterSpec:
    width: int = 1440
    height: int = 720

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster must be at least 1x1, got {self.width}x{self.height}")

    def pixel_of(self, lat: float, lon: float) -> Tuple[int, int]:
        """Pixel containing the point; poles and the date line clamp inward."""
        x = math.floor((lon + 180.0) / 360.0 * self.width)
        y = math.floor((90.0 - lat) / 180.0 * self.height)
        return (
            min(max(x, 0), self.width - 1),
            min(max(y, 0), self.height - 1),
        )


@dataclass
class SimilarityRaster:
    spec: RasterSpec
    score: np.ndarray  # float32 (height, width); NaN where count == 0
    count: np.ndarray  # uint32 (height, width)
    aggregator: str


@dataclass
class ThresholdMask:
    selected: List[GridCell]
    fraction: float
    source_query_id: str = ""

    def cell_set(self) -> Set[Tuple[int, int]]:
        return {(c.row, c.col) for c in self.selected}


def bin_arrays(
    lats: np.ndarray,
    lons: np.ndarray,
    scores: np.ndarray,
    spec: RasterSpec,
    aggregator: str = "max",
) -> SimilarityRaster:
    """Aggregate point scores into the raster; each point hits exactly one pixel."""
    if aggregator not in AGGREGATORS:
        raise ValueError(f"aggregator must be one of {AGGREGATORS}, got {aggregator!r}")
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    scores64 = np.asarray(scores, dtype=np.float64)
    x = np.clip(np.floor((lons + 180.0) / 360.0 * spec.width).astype(np.int64), 0, spec.width - 1)
    y = np.clip(np.floor((90.0 - lats) / 180.0 * spec.height).astype(np.int64), 0, spec.height - 1)
    flat = y * spec.width + x

    count = np.zeros(spec.height * spec.width, dtype=np.uint32)
    np.add.at(count, flat, 1)
    if aggregator == "max":
        acc = np.full(spec.height * spec.width, -np.inf, dtype=np.float64)
        np.maximum.at(acc, flat, scores64)
        out = np.where(count > 0, acc, np.nan)
    else:
        acc = np.zeros(spec.height * spec.width, dtype=np.float64)
        np.add.at(acc, flat, scores64)
        out = np.divide(acc, count, out=np.full_like(acc, np.nan), where=count > 0)
    return SimilarityRaster(
        spec=spec,
        score=out.astype(np.float32).reshape(spec.height, spec.width),
        count=count.reshape(spec.height, spec.width),
        aggregator=aggregator,
    )


def bin_scores(
    tiles: Sequence[ScoredTile],
    grid_spec: GridSpec,
    spec: RasterSpec,
    aggregator: str = "max",
) -> SimilarityRaster:
    """Bin scored tiles at their cell centers."""
    centers = [cell_center(grid_spec, t.cell) for t in tiles]
    return bin_arrays(
        np.array([c.lat for c in centers]),
        np.array([c.lon for c in centers]),
        np.array([t.score for t in tiles]),
        spec,
        aggregator,
    )


def threshold_mask(tiles: Sequence[ScoredTile], fraction: float, query_id: str = "") -> ThresholdMask:
    """Top-fraction selection over already-scored tiles, same k-rule as search."""
    if not tiles:
        raise ValueError("cannot threshold an empty tile list")
    k = fraction_k(fraction, len(tiles))
    ordered = sorted(tiles, key=lambda t: (-t.score, t.cell.row, t.cell.col))
    return ThresholdMask([t.cell for t in ordered[:k]], fraction, query_id)


# ---------------------------------------------------------------------------
# Colormap + PNG
# ---------------------------------------------------------------------------


def load_colormap(name: str = "viridis256") -> np.ndarray:
    """(256, 3) uint8 RGB table from the versioned data file."""
    doc = json.loads(resources.files("tileseek").joinpath(f"data/{name}.json").read_text())
    table = np.asarray(doc["rgb"], dtype=np.uint8)
    if table.shape != (256, 3):
        raise ValueError(f"colormap {name} has shape {table.shape}, expected (256, 3)")
    return table


def _rgba_image(raster: SimilarityRaster, colormap: str, background: str) -> np.ndarray:
    if background not in BACKGROUNDS:
        raise ValueError(f"background must be one of {BACKGROUNDS}, got {background!r}")
    table = load_colormap(colormap)
    h, w = raster.spec.height, raster.spec.width
    rgba = np.zeros((h, w, 4), dtype=np.uint8)

    if background == "graticule":
        xs = [raster.spec.pixel_of(0.0, lon)[0] for lon in range(-180, 180, GRATICULE_STEP_DEG)]
        ys = [raster.spec.pixel_of(lat, 0.0)[1] for lat in range(-60, 90, GRATICULE_STEP_DEG)]
        rgba[:, xs] = GRATICULE_RGBA
        rgba[ys, :] = GRATICULE_RGBA

    filled = raster.count > 0
    if filled.any():
        scores = raster.score[filled].astype(np.float64)
        lo, hi = float(scores.min()), float(scores.max())
        if hi > lo:
            norm = (scores - lo) / (hi - lo)
            # round half away from zero; norm is non-negative so floor(x + .5) works
            idx = np.clip(np.floor(norm * 255.0 + 0.5), 0, 255).astype(np.intp)
        else:
            idx = np.full(scores.shape, DEGENERATE_COLOR_INDEX, dtype=np.intp)
        rgba[filled, :3] = table[idx]
        rgba[filled, 3] = 255
    return rgba


def encode_png(rgba: np.ndarray) -> bytes:
    """Minimal deterministic PNG encoder: 8-bit RGBA, no interlace, filter 0."""
    if rgba.ndim != 3 or rgba.shape[2] != 4 or rgba.dtype != np.uint8:
        raise ValueError("expected (h, w, 4) uint8 image")
    h, w = rgba.shape[:2]

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 6, 0, 0, 0)  # bit depth 8, color type RGBA
    scanlines = bytearray()
    raw = rgba.tobytes()
    stride = w * 4
    for y in range(h):
        scanlines += b"\x00"  # filter type 0
        scanlines += raw[y * stride : (y + 1) * stride]
    idat = zlib.compress(bytes(scanlines), PNG_COMPRESS_LEVEL)
    return b"".join(
        [b"\x89PNG\r\n\x1a\n", chunk(b"IHDR", ihdr), chunk(b"IDAT", idat), chunk(b"IEND", b"")]
    )


def render_png(
    raster: SimilarityRaster, colormap: str = "viridis256", background: str = "transparent"
) -> bytes:
    """Colormapped raster as PNG bytes; identical input gives identical bytes."""
    return encode_png(_rgba_image(raster, colormap, background))


# ---------------------------------------------------------------------------
# GeoJSON export
# ---------------------------------------------------------------------------


def export_geojson(
    tiles: Sequence[ScoredTile], grid_spec: GridSpec, model_id: str = ""
) -> str:
    """FeatureCollection of cell-center Points, coordinates in (lon, lat) order."""
    features = []
    for t in tiles:
        center = cell_center(grid_spec, t.cell)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [center.lon, center.lat]},
                "properties": {
                    "cell_id": cell_id_string(t.cell),
                    "score": t.score,
                    "rank": t.rank,
                    "model_id": model_id,
                },
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features})
