"""Exact cosine similarity search with deterministic top-k / top-fraction.

Two scoring routes exist on purpose. `brute_force_oracle` is the reference:
a single full scan accumulating in float64, sorted stably by the tie rule.
The engine (`top_k`, `score_all`) works in float32 with chunked scans and
must match the oracle's ordering exactly; tests hold the two against each
other.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import CorpusError, DimensionMismatchError, ZeroNormError
from .grid import GridCell, round_half_away

SCAN_CHUNK = 8192  # rows dequantized per matmul; bounds transient float32 memory
F32_CACHE_LIMIT_BYTES = 256 * 1024 * 1024  # widen-once cache for small corpora


@dataclass(frozen=True)
class QueryVector:
    """Unit-norm float32 query bound to the model whose space it lives in."""

    model_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        norm = float(np.linalg.norm(v.astype(np.float64)))
        if abs(norm - 1.0) > 1e-5:
            raise ValueError(f"query vector norm {norm} is not within 1e-5 of 1")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ScoredTile:
    """One retrieved cell: cosine score and 1-based rank."""

    cell: GridCell
    score: float
    rank: int


@dataclass(frozen=True)
class SearchParams:
    """Selection sizes; ties always break by descending score then (row, col)."""

    k: int = 5
    fraction: float = 0.025

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")


@dataclass
class RecordBlock:
    """Columnar view of one model's corpus: row/col addresses plus vectors.

    Stored vectors need not be exactly unit norm (float16 rounding); scoring
    divides by the cached row norms so scores are true cosines.
    """

    rows: np.ndarray  # int32, shape (N,)
    cols: np.ndarray  # int32, shape (N,)
    vectors: np.ndarray  # float16 or float32, shape (N, dim)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int32)
        self.cols = np.asarray(self.cols, dtype=np.int32)
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.rows):
            raise ValueError("vectors must be (N, dim) aligned with rows/cols")
        self._norms = None
        self._f32 = None

    def __len__(self) -> int:
        return len(self.rows)

    def f32_chunk(self, start: int, stop: int, buf: "np.ndarray | None" = None) -> np.ndarray:
        """Float32 view/copy of a row slice; widens float16 storage on demand.

        Small corpora are widened once and cached; past F32_CACHE_LIMIT_BYTES
        every scan converts chunk by chunk into `buf` (when given) so repeated
        scans do not churn large allocations.
        """
        if self.vectors.dtype == np.float32:
            return self.vectors[start:stop]
        if self._f32 is None and self.vectors.nbytes * 2 <= F32_CACHE_LIMIT_BYTES:
            self._f32 = self.vectors.astype(np.float32)
        if self._f32 is not None:
            return self._f32[start:stop]
        chunk = self.vectors[start:stop]
        if buf is None:
            return chunk.astype(np.float32)
        out = buf[: len(chunk)]
        np.copyto(out, chunk)
        return out

    @property
    def norms(self) -> np.ndarray:
        """Float32 row norms; zero-norm rows map to +inf so they score 0."""
        if self._norms is None:
            n = np.empty(len(self), dtype=np.float32)
            for start in range(0, len(self), SCAN_CHUNK):
                chunk = self.vectors[start : start + SCAN_CHUNK].astype(np.float64)
                n[start : start + len(chunk)] = np.sqrt(np.einsum("ij,ij->i", chunk, chunk))
            self._norms = np.where(n <= 1e-12, np.float32(np.inf), n)
        return self._norms

    @classmethod
    def from_records(cls, records: Sequence) -> "RecordBlock":
        if not records:
            return cls(np.empty(0, np.int32), np.empty(0, np.int32), np.empty((0, 0), np.float32))
        rows = np.array([r.cell.row for r in records], dtype=np.int32)
        cols = np.array([r.cell.col for r in records], dtype=np.int32)
        vectors = np.stack([np.asarray(r.vector) for r in records])
        return cls(rows, cols, vectors)

    def cell_at(self, i: int) -> GridCell:
        return GridCell(int(self.rows[i]), int(self.cols[i]))


def dequantize(v: np.ndarray) -> np.ndarray:
    """Widen float16 storage to float32; every f16 value is exact in f32."""
    return np.asarray(v, dtype=np.float16).astype(np.float32)


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; rejects vectors too small to carry a direction."""
    arr = np.asarray(v, dtype=np.float32)
    norm = float(np.linalg.norm(arr.astype(np.float64)))
    if norm <= 1e-12:
        raise ZeroNormError(f"cannot normalize vector with norm {norm}")
    return (arr.astype(np.float64) / norm).astype(np.float32)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, clamped into [-1, 1]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.shape[0], b.shape[0], context="cosine")
    dot = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(1.0, max(-1.0, dot))


def _scan_buffer(block: RecordBlock) -> "np.ndarray | None":
    if block.vectors.dtype == np.float32 or block.vectors.nbytes * 2 <= F32_CACHE_LIMIT_BYTES:
        return None
    return np.empty((SCAN_CHUNK, block.vectors.shape[1]), dtype=np.float32)


def score_all(block: RecordBlock, q: QueryVector) -> np.ndarray:
    """Cosine of every record against the query, float32, clamped."""
    n = len(block)
    scores = np.empty(n, dtype=np.float32)
    qv = q.values
    norms = block.norms
    buf = _scan_buffer(block)
    for start in range(0, n, SCAN_CHUNK):
        stop = min(n, start + SCAN_CHUNK)
        scores[start:stop] = (block.f32_chunk(start, stop, buf) @ qv) / norms[start:stop]
    np.clip(scores, -1.0, 1.0, out=scores)
    return scores


def _ranked_order(block: RecordBlock, scores: np.ndarray) -> np.ndarray:
    # lexsort: last key is primary -> score desc, then row asc, then col asc
    return np.lexsort((block.cols, block.rows, -scores))


def _tiles_from_order(block: RecordBlock, scores: np.ndarray, order: np.ndarray) -> List[ScoredTile]:
    return [
        ScoredTile(block.cell_at(int(i)), float(scores[int(i)]), rank)
        for rank, i in enumerate(order, start=1)
    ]


def top_k_from_scores(block: RecordBlock, scores: np.ndarray, k: int) -> List[ScoredTile]:
    """Top-k selection over an existing score array, same tie rule as top_k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    order = _ranked_order(block, scores)[: min(k, len(block))]
    return _tiles_from_order(block, scores, order)


def top_k(block: RecordBlock, q: QueryVector, k: int) -> List[ScoredTile]:
    """The k best records under the tie rule; all of them when N < k."""
    if len(block) == 0:
        raise CorpusError("no records to search for this model")
    return top_k_from_scores(block, score_all(block, q), k)


def fraction_k(fraction: float, n: int) -> int:
    """Selection size for a top-fraction query: max(1, round(fraction * n))."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return max(1, int(round_half_away(fraction * n)))


def top_fraction(block: RecordBlock, q: QueryVector, fraction: float) -> List[ScoredTile]:
    """Highest-scoring max(1, round(fraction * N)) records."""
    return top_k(block, q, fraction_k(fraction, len(block)))


def parallel_top_k(block: RecordBlock, q: QueryVector, k: int, workers: int = 4) -> List[ScoredTile]:
    """Chunk-parallel scan; merges with the tie rule so output equals top_k.

    Chunks are fixed-size and concatenated in index order, so the result is
    independent of thread scheduling.
    """
    if len(block) == 0:
        raise CorpusError("no records to search for this model")
    n = len(block)
    norms = block.norms
    block.f32_chunk(0, 1)  # settle the lazy f32 cache before threads race on it
    needs_buffer = _scan_buffer(block) is not None
    local = threading.local()

    def scan(start: int) -> np.ndarray:
        buf = getattr(local, "buf", None)
        if needs_buffer and buf is None:
            buf = local.buf = np.empty((SCAN_CHUNK, block.vectors.shape[1]), dtype=np.float32)
        stop = min(n, start + SCAN_CHUNK)
        chunk = block.f32_chunk(start, stop, buf)
        return np.clip((chunk @ q.values) / norms[start:stop], -1.0, 1.0)

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        parts = list(pool.map(scan, range(0, n, SCAN_CHUNK)))
    scores = np.concatenate(parts)
    order = _ranked_order(block, scores)[: min(k, n)]
    return _tiles_from_order(block, scores, order)


class OracleIndex:
    """Reference ranking route, independent of the engine.

    Construction widens every record to float64 exactly once (f16 and f32
    values are exactly representable in f64, so this changes nothing). Each
    rank() call is a full scan: score every record in float64, no pruning,
    no partial selection, stable Python sort by the tie rule rather than the
    engine's lexsort.
    """

    def __init__(self, records: Sequence):
        self.cells: List[GridCell] = [r.cell for r in records]
        if records:
            self.matrix = np.stack([np.asarray(r.vector) for r in records]).astype(np.float64)
        else:
            self.matrix = np.empty((0, 0), dtype=np.float64)
        self.norms = np.sqrt(np.einsum("ij,ij->i", self.matrix, self.matrix))

    def rank(self, q: QueryVector) -> List[ScoredTile]:
        if not self.cells:
            return []
        dots = self.matrix @ np.asarray(q.values, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(self.norms > 1e-12, dots / self.norms, 0.0)
        np.clip(cosines, -1.0, 1.0, out=cosines)
        cells = self.cells
        order = sorted(
            range(len(cells)), key=lambda i: (-float(cosines[i]), cells[i].row, cells[i].col)
        )
        return [
            ScoredTile(cells[i], float(cosines[i]), rank) for rank, i in enumerate(order, start=1)
        ]


def brute_force_oracle(records: Sequence, q: QueryVector) -> List[ScoredTile]:
    """One-shot reference ranking; see OracleIndex for the route's guarantees."""
    return OracleIndex(records).rank(q)
