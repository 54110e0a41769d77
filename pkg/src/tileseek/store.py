"""Columnar embedding-shard storage: write/read/partial-fetch plus manifests.

Two container formats carry identical logical content:

* ``parquet`` — standard Parquet with schema (cell_row:int32, cell_col:int32,
  lat:float64, lon:float64, acquired_at:int64, source_product:utf8,
  embedding: fixed-size list of float16|float32), uncompressed.
* ``eesh1`` — a self-contained binary fallback: magic "EESH1\\0" | u16 version
  | u32 dim | u8 dtype (0=f32, 1=f16) | u64 record_count | records
  [i32 row | u32 col | f64 lat | f64 lon | i64 acquired_at | u16 product_len
  | product bytes | vector bytes] | 32-byte SHA-256 trailer over everything
  before it. All integers little-endian; vectors little-endian IEEE-754.

Manifests record row-group byte ranges so callers can fetch slices of a shard
without touching the rest of the body.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from . import rng
from .errors import ChecksumError, CorpusError, RegistryError, ShardFormatError
from .grid import GeoPoint, GridCell, GridSpec, cell_center, enumerate_subsampled
from .models import ModelInfo, Registry
from .search import RecordBlock

EESH1_MAGIC = b"EESH1\x00"
EESH1_VERSION = 1
_HEADER = struct.Struct("<6sHIBQ")
_REC_FIXED = struct.Struct("<iIddqH")
_DTYPE_CODES = {"float32": 0, "float16": 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}

EMPTY_BBOX = (90.0, -90.0, 180.0, -180.0)  # inverted sentinel: contains nothing


@dataclass
class EmbeddingRecord:
    """One grid cell's embedding for one model, with location and provenance."""

    cell: GridCell
    lat: float
    lon: float
    model_id: str
    vector: np.ndarray
    acquired_at: int
    source_product: str


@dataclass
class ShardManifest:
    shard_id: str
    model_id: str
    dim: int
    dtype: str
    record_count: int
    bbox: Tuple[float, float, float, float]  # (lat_min, lat_max, lon_min, lon_max)
    row_groups: List[Tuple[int, int, int, int]]  # (first_index, count, byte_offset, byte_length)
    checksum: str  # hex SHA-256 of the shard body
    format: str  # "parquet" | "eesh1"
    path: str = ""  # shard file name relative to the corpus root

    def to_dict(self) -> dict:
        return {
            "shard_id": self.shard_id,
            "model_id": self.model_id,
            "dim": self.dim,
            "dtype": self.dtype,
            "record_count": self.record_count,
            "bbox": {
                "lat_min": self.bbox[0],
                "lat_max": self.bbox[1],
                "lon_min": self.bbox[2],
                "lon_max": self.bbox[3],
            },
            "row_groups": [
                {
                    "first_record_index": g[0],
                    "record_count": g[1],
                    "byte_offset": g[2],
                    "byte_length": g[3],
                }
                for g in self.row_groups
            ],
            "checksum": self.checksum,
            "format": self.format,
            "path": self.path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShardManifest":
        bbox = d["bbox"]
        return cls(
            shard_id=d["shard_id"],
            model_id=d["model_id"],
            dim=int(d["dim"]),
            dtype=d["dtype"],
            record_count=int(d["record_count"]),
            bbox=(bbox["lat_min"], bbox["lat_max"], bbox["lon_min"], bbox["lon_max"]),
            row_groups=[
                (
                    int(g["first_record_index"]),
                    int(g["record_count"]),
                    int(g["byte_offset"]),
                    int(g["byte_length"]),
                )
                for g in d["row_groups"]
            ],
            checksum=d["checksum"],
            format=d["format"],
            path=d.get("path", ""),
        )


@dataclass
class CorpusManifest:
    grid_spec: GridSpec
    shards: List[ShardManifest]
    total_records: Dict[str, int]
    created_at: str
    synth: Optional[dict] = None  # generation parameters for synthetic corpora

    def to_dict(self) -> dict:
        d = {
            "format_version": 1,
            "grid_spec": self.grid_spec.to_dict(),
            "shards": [s.to_dict() for s in self.shards],
            "total_records": dict(self.total_records),
            "created_at": self.created_at,
        }
        if self.synth is not None:
            d["synth"] = self.synth
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusManifest":
        return cls(
            grid_spec=GridSpec.from_dict(d["grid_spec"]),
            shards=[ShardManifest.from_dict(s) for s in d["shards"]],
            total_records={k: int(v) for k, v in d["total_records"].items()},
            created_at=d["created_at"],
            synth=d.get("synth"),
        )


# ---------------------------------------------------------------------------
# Byte sources: everything reads through read_range so tests can observe
# exactly which slices of a shard were touched.
# ---------------------------------------------------------------------------


class FileSource:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def size(self) -> int:
        return self.path.stat().st_size

    def read_range(self, offset: int, length: int) -> bytes:
        with open(self.path, "rb") as f:
            f.seek(offset)
            return f.read(length)

    def read_all(self) -> bytes:
        return self.path.read_bytes()


class BytesSource:
    def __init__(self, data: bytes):
        self.data = data

    def size(self) -> int:
        return len(self.data)

    def read_range(self, offset: int, length: int) -> bytes:
        return self.data[offset : offset + length]

    def read_all(self) -> bytes:
        return self.data


class RecordingSource:
    """Wraps a source and logs every requested (offset, length) range."""

    def __init__(self, inner):
        self.inner = inner
        self.ranges: List[Tuple[int, int]] = []

    def size(self) -> int:
        return self.inner.size()

    def read_range(self, offset: int, length: int) -> bytes:
        self.ranges.append((offset, length))
        return self.inner.read_range(offset, length)

    def read_all(self) -> bytes:
        self.ranges.append((0, self.inner.size()))
        return self.inner.read_all()


def as_source(target):
    if isinstance(target, (str, Path)):
        return FileSource(target)
    if isinstance(target, (bytes, bytearray)):
        return BytesSource(bytes(target))
    if hasattr(target, "read_range"):
        return target
    raise TypeError(f"cannot treat {type(target)!r} as a byte source")


class _SourceFile(io.RawIOBase):
    """Minimal seekable file object over a byte source, for the Parquet reader."""

    def __init__(self, source):
        self._source = source
        self._pos = 0
        self._size = source.size()

    def readable(self) -> bool:
        return True

    def seekable(self) -> bool:
        return True

    def seek(self, offset: int, whence: int = 0) -> int:
        if whence == 0:
            self._pos = offset
        elif whence == 1:
            self._pos += offset
        else:
            self._pos = self._size + offset
        return self._pos

    def tell(self) -> int:
        return self._pos

    def read(self, n: int = -1) -> bytes:
        if n is None or n < 0:
            n = self._size - self._pos
        n = max(0, min(n, self._size - self._pos))
        data = self._source.read_range(self._pos, n)
        self._pos += len(data)
        return data


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def _check_write_preconditions(records: Sequence[EmbeddingRecord], model: ModelInfo) -> None:
    prev = None
    for r in records:
        if r.model_id != model.id:
            raise ValueError(f"records mix model ids: expected {model.id!r}, saw {r.model_id!r}")
        v = np.asarray(r.vector)
        if v.ndim != 1 or v.shape[0] != model.dim:
            raise ValueError(f"record {r.cell} vector length {v.shape} != dim {model.dim}")
        key = (r.cell.row, r.cell.col)
        if prev is not None and key <= prev:
            raise ValueError(f"records not sorted by (row, col) at {r.cell}")
        prev = key


def _bbox_of(records: Sequence[EmbeddingRecord]) -> Tuple[float, float, float, float]:
    if not records:
        return EMPTY_BBOX
    lats = [r.lat for r in records]
    lons = [r.lon for r in records]
    return (min(lats), max(lats), min(lons), max(lons))


def _row_group_partition(n: int, row_group_size: int) -> List[Tuple[int, int]]:
    return [(start, min(row_group_size, n - start)) for start in range(0, n, row_group_size)]


def _encode_eesh1(
    records: Sequence[EmbeddingRecord], model: ModelInfo, row_group_size: int
) -> Tuple[bytes, List[Tuple[int, int, int, int]]]:
    dtype_np = np.dtype("<f2") if model.dtype == "float16" else np.dtype("<f4")
    body = bytearray()
    body += _HEADER.pack(EESH1_MAGIC, EESH1_VERSION, model.dim, _DTYPE_CODES[model.dtype], len(records))
    groups = []
    offsets = []
    for r in records:
        offsets.append(len(body))
        product = r.source_product.encode("utf-8")
        if len(product) > 0xFFFF:
            raise ValueError(f"source_product too long ({len(product)} bytes) at {r.cell}")
        body += _REC_FIXED.pack(r.cell.row, r.cell.col, r.lat, r.lon, r.acquired_at, len(product))
        body += product
        body += np.ascontiguousarray(r.vector, dtype=dtype_np).tobytes()
    offsets.append(len(body))
    for first, count in _row_group_partition(len(records), row_group_size):
        start = offsets[first]
        end = offsets[first + count]
        groups.append((first, count, start, end - start))
    checksum = hashlib.sha256(bytes(body)).digest()
    return bytes(body) + checksum, groups


def _encode_parquet(
    records: Sequence[EmbeddingRecord], model: ModelInfo, row_group_size: int
) -> Tuple[bytes, List[Tuple[int, int, int, int]]]:
    import pyarrow as pa
    import pyarrow.parquet as pq

    value_type = pa.float16() if model.dtype == "float16" else pa.float32()
    if records:
        flat = np.concatenate(
            [np.ascontiguousarray(r.vector, dtype=model.numpy_dtype) for r in records]
        )
    else:
        flat = np.empty(0, dtype=model.numpy_dtype)
    embedding = pa.FixedSizeListArray.from_arrays(pa.array(flat, type=value_type), model.dim)
    table = pa.table(
        {
            "cell_row": pa.array([r.cell.row for r in records], pa.int32()),
            "cell_col": pa.array([r.cell.col for r in records], pa.int32()),
            "lat": pa.array([r.lat for r in records], pa.float64()),
            "lon": pa.array([r.lon for r in records], pa.float64()),
            "acquired_at": pa.array([r.acquired_at for r in records], pa.int64()),
            "source_product": pa.array([r.source_product for r in records], pa.string()),
            "embedding": embedding,
        }
    )
    buf = io.BytesIO()
    pq.write_table(table, buf, row_group_size=row_group_size, compression="NONE")
    data = buf.getvalue()

    meta = pq.ParquetFile(io.BytesIO(data)).metadata
    if data[-4:] != b"PAR1":
        raise ShardFormatError("parquet writer produced no trailing magic")
    footer_len = struct.unpack("<I", data[-8:-4])[0]
    footer_start = len(data) - 8 - footer_len
    starts = []
    for i in range(meta.num_row_groups):
        rg = meta.row_group(i)
        page_offsets = []
        for j in range(rg.num_columns):
            col = rg.column(j)
            if col.dictionary_page_offset is not None and col.dictionary_page_offset > 0:
                page_offsets.append(col.dictionary_page_offset)
            page_offsets.append(col.data_page_offset)
        starts.append(min(page_offsets))
    groups = []
    first = 0
    for i in range(meta.num_row_groups):
        count = meta.row_group(i).num_rows
        end = starts[i + 1] if i + 1 < meta.num_row_groups else footer_start
        groups.append((first, count, starts[i], end - starts[i]))
        first += count
    return data, groups


def write_shard(
    records: Sequence[EmbeddingRecord],
    target: Union[str, Path],
    row_group_size: int,
    model: ModelInfo,
    fmt: str = "eesh1",
) -> ShardManifest:
    """Serialize records (pre-sorted by cell) to target; returns the manifest."""
    if row_group_size < 1:
        raise ValueError(f"row_group_size must be >= 1, got {row_group_size}")
    if fmt not in ("eesh1", "parquet"):
        raise ValueError(f"unknown shard format {fmt!r}")
    _check_write_preconditions(records, model)

    if fmt == "eesh1":
        data, groups = _encode_eesh1(records, model, row_group_size)
        body = data[:-32]
    else:
        data, groups = _encode_parquet(records, model, row_group_size)
        body = data

    target = Path(target)
    target.write_bytes(data)
    return ShardManifest(
        shard_id=target.stem,
        model_id=model.id,
        dim=model.dim,
        dtype=model.dtype,
        record_count=len(records),
        bbox=_bbox_of(records),
        row_groups=groups,
        checksum=hashlib.sha256(body).hexdigest(),
        format=fmt,
        path=target.name,
    )


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------


def _decode_eesh1_records(
    buf: bytes, dim: int, dtype: str, expected: int, model_id: str, shard_id: str
) -> List[EmbeddingRecord]:
    dtype_np = np.dtype("<f2") if dtype == "float16" else np.dtype("<f4")
    vec_bytes = dim * dtype_np.itemsize
    records = []
    pos = 0
    for i in range(expected):
        if pos + _REC_FIXED.size > len(buf):
            raise ShardFormatError(f"{shard_id}: truncated at record {i}")
        row, col, lat, lon, acquired_at, plen = _REC_FIXED.unpack_from(buf, pos)
        pos += _REC_FIXED.size
        if pos + plen + vec_bytes > len(buf):
            raise ShardFormatError(f"{shard_id}: truncated at record {i}")
        product = buf[pos : pos + plen].decode("utf-8")
        pos += plen
        vector = np.frombuffer(buf, dtype=dtype_np, count=dim, offset=pos).copy()
        pos += vec_bytes
        records.append(EmbeddingRecord(GridCell(row, col), lat, lon, model_id, vector, acquired_at, product))
    if pos != len(buf):
        raise ShardFormatError(f"{shard_id}: {len(buf) - pos} trailing bytes after {expected} records")
    return records


def _parquet_table_records(table, manifest: ShardManifest) -> List[EmbeddingRecord]:
    import pyarrow as pa

    table = table.combine_chunks()
    emb_type = table.schema.field("embedding").type
    if not pa.types.is_fixed_size_list(emb_type):
        raise ShardFormatError(f"{manifest.shard_id}: embedding column is not a fixed-size list")
    file_dim = emb_type.list_size
    file_dtype = "float16" if pa.types.is_float16(emb_type.value_type) else "float32"
    if file_dim != manifest.dim or file_dtype != manifest.dtype:
        raise ShardFormatError(
            f"{manifest.shard_id}: body encodes dim {file_dim}/{file_dtype}, "
            f"manifest says {manifest.dim}/{manifest.dtype}"
        )
    n = table.num_rows
    np_dtype = np.float16 if manifest.dtype == "float16" else np.float32
    if n:
        emb_col = table.column("embedding").chunk(0)
        vectors = np.asarray(emb_col.flatten(), dtype=np_dtype).reshape(n, file_dim)
    else:
        vectors = np.empty((0, file_dim), dtype=np_dtype)
    rows = table.column("cell_row").to_numpy(zero_copy_only=False)
    cols = table.column("cell_col").to_numpy(zero_copy_only=False)
    lats = table.column("lat").to_numpy(zero_copy_only=False)
    lons = table.column("lon").to_numpy(zero_copy_only=False)
    acq = table.column("acquired_at").to_numpy(zero_copy_only=False)
    products = table.column("source_product").to_pylist()
    return [
        EmbeddingRecord(
            GridCell(int(rows[i]), int(cols[i])),
            float(lats[i]),
            float(lons[i]),
            manifest.model_id,
            vectors[i].copy(),
            int(acq[i]),
            products[i],
        )
        for i in range(n)
    ]


def read_shard(source, manifest: ShardManifest, verify_checksum: bool = True) -> List[EmbeddingRecord]:
    """Decode the whole shard, verifying the body checksum unless disabled."""
    source = as_source(source)
    data = source.read_all()
    if manifest.format == "eesh1":
        if len(data) < _HEADER.size + 32:
            raise ShardFormatError(f"{manifest.shard_id}: file shorter than header + trailer")
        body, trailer = data[:-32], data[-32:]
        if verify_checksum:
            digest = hashlib.sha256(body).digest()
            if digest != trailer or digest.hex() != manifest.checksum:
                raise ChecksumError(f"shard {manifest.shard_id}: body checksum mismatch")
        magic, version, dim, dtype_code, count = _HEADER.unpack_from(body, 0)
        if magic != EESH1_MAGIC or version != EESH1_VERSION:
            raise ShardFormatError(f"{manifest.shard_id}: bad magic/version")
        dtype = _CODE_DTYPES.get(dtype_code)
        if dim != manifest.dim or dtype != manifest.dtype:
            raise ShardFormatError(
                f"{manifest.shard_id}: header says dim {dim}/{dtype}, "
                f"manifest says {manifest.dim}/{manifest.dtype}"
            )
        if count != manifest.record_count:
            raise ShardFormatError(
                f"{manifest.shard_id}: header count {count} != manifest {manifest.record_count}"
            )
        return _decode_eesh1_records(
            body[_HEADER.size :], dim, dtype, count, manifest.model_id, manifest.shard_id
        )

    if manifest.format == "parquet":
        import pyarrow.parquet as pq

        if verify_checksum and hashlib.sha256(data).hexdigest() != manifest.checksum:
            raise ChecksumError(f"shard {manifest.shard_id}: body checksum mismatch")
        try:
            table = pq.ParquetFile(io.BytesIO(data)).read()
        except Exception as e:
            raise ShardFormatError(f"{manifest.shard_id}: parquet decode failed: {e}") from e
        records = _parquet_table_records(table, manifest)
        if len(records) != manifest.record_count:
            raise ShardFormatError(
                f"{manifest.shard_id}: decoded {len(records)} records, "
                f"manifest says {manifest.record_count}"
            )
        return records

    raise ShardFormatError(f"unknown shard format {manifest.format!r}")


def partial_fetch(source, manifest: ShardManifest, row_group_indices: Iterable[int]) -> List[EmbeddingRecord]:
    """Decode only the requested row groups, reading only their byte ranges.

    For eesh1 each group's byte range is fetched exactly. The Parquet path
    reads through the container's reader, which additionally touches the file
    footer; data pages outside the requested groups are never requested.
    """
    source = as_source(source)
    indices = sorted(set(int(i) for i in row_group_indices))
    if not indices:
        return []
    for i in indices:
        if not 0 <= i < len(manifest.row_groups):
            raise IndexError(f"row group {i} outside [0, {len(manifest.row_groups)})")

    if manifest.format == "eesh1":
        out: List[EmbeddingRecord] = []
        for i in indices:
            first, count, offset, length = manifest.row_groups[i]
            buf = source.read_range(offset, length)
            if len(buf) != length:
                raise ShardFormatError(
                    f"{manifest.shard_id}: short read for group {i} ({len(buf)}/{length} bytes)"
                )
            out.extend(
                _decode_eesh1_records(
                    buf, manifest.dim, manifest.dtype, count, manifest.model_id, manifest.shard_id
                )
            )
        return out

    if manifest.format == "parquet":
        import pyarrow.parquet as pq

        pf = pq.ParquetFile(_SourceFile(source))
        table = pf.read_row_groups(indices, use_threads=False)
        return _parquet_table_records(table, manifest)

    raise ShardFormatError(f"unknown shard format {manifest.format!r}")


# ---------------------------------------------------------------------------
# Corpus: a directory of shards plus corpus.json
# ---------------------------------------------------------------------------

CORPUS_MANIFEST_NAME = "corpus.json"


def save_corpus_manifest(root: Union[str, Path], manifest: CorpusManifest) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / CORPUS_MANIFEST_NAME
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    for shard in manifest.shards:
        side = root / f"{shard.shard_id}.manifest.json"
        side.write_text(json.dumps(shard.to_dict(), indent=2) + "\n")
    return path


def load_corpus_manifest(root: Union[str, Path]) -> CorpusManifest:
    root = Path(root)
    path = root if root.is_file() else root / CORPUS_MANIFEST_NAME
    try:
        return CorpusManifest.from_dict(json.loads(path.read_text()))
    except FileNotFoundError:
        raise CorpusError(f"no corpus manifest at {path}") from None
    except (json.JSONDecodeError, KeyError) as e:
        raise CorpusError(f"corpus manifest {path} is invalid: {e}") from e


@dataclass
class ModelTable:
    """All of one model's records, column-wise, in shard order."""

    model_id: str
    block: RecordBlock
    lat: np.ndarray
    lon: np.ndarray
    acquired_at: np.ndarray
    products: List[str]
    index: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {
                (int(r), int(c)): i
                for i, (r, c) in enumerate(zip(self.block.rows, self.block.cols))
            }

    def __len__(self) -> int:
        return len(self.block)

    def record_at(self, i: int) -> EmbeddingRecord:
        return EmbeddingRecord(
            cell=self.block.cell_at(i),
            lat=float(self.lat[i]),
            lon=float(self.lon[i]),
            model_id=self.model_id,
            vector=self.block.vectors[i],
            acquired_at=int(self.acquired_at[i]),
            source_product=self.products[i],
        )


class Corpus:
    """Loaded corpus: manifest plus per-model columnar tables, immutable."""

    def __init__(self, root: Path, manifest: CorpusManifest, verify_checksums: bool = True):
        self.root = Path(root)
        self.manifest = manifest
        self._verify = verify_checksums
        self._tables: Dict[str, ModelTable] = {}

    @classmethod
    def load(cls, root: Union[str, Path], verify_checksums: bool = True, eager: bool = True) -> "Corpus":
        root = Path(root)
        if root.is_file():
            manifest = load_corpus_manifest(root)
            root = root.parent
        else:
            manifest = load_corpus_manifest(root)
        corpus = cls(root, manifest, verify_checksums)
        if eager:
            for model_id in corpus.model_ids():
                corpus.table(model_id)
        return corpus

    @property
    def grid_spec(self) -> GridSpec:
        return self.manifest.grid_spec

    def model_ids(self) -> List[str]:
        return sorted(self.manifest.total_records.keys())

    def cell_count(self) -> int:
        seen: Set[Tuple[int, int]] = set()
        for model_id in self.model_ids():
            seen.update(self.table(model_id).index.keys())
        return len(seen)

    def table(self, model_id: str) -> ModelTable:
        if model_id not in self.manifest.total_records:
            raise RegistryError(f"unknown model {model_id!r}; corpus has {self.model_ids()}")
        if model_id not in self._tables:
            records: List[EmbeddingRecord] = []
            for shard in self.manifest.shards:
                if shard.model_id != model_id:
                    continue
                shard_path = self.root / shard.path
                records.extend(read_shard(shard_path, shard, verify_checksum=self._verify))
            if len(records) != self.manifest.total_records[model_id]:
                raise CorpusError(
                    f"model {model_id}: shards hold {len(records)} records, "
                    f"manifest says {self.manifest.total_records[model_id]}"
                )
            self._tables[model_id] = _table_from_records(model_id, records)
        return self._tables[model_id]

    def lookup(
        self, model_id: str, cells: Iterable[GridCell]
    ) -> Tuple[List[EmbeddingRecord], List[GridCell]]:
        """Records for the requested cells; absent cells land in the second list."""
        table = self.table(model_id)
        found, missing = [], []
        for cell in cells:
            i = table.index.get((cell.row, cell.col))
            if i is None:
                missing.append(cell)
            else:
                found.append(table.record_at(i))
        return found, missing

    def nearest_cell(self, model_id: str, p: GeoPoint) -> Tuple[GridCell, int]:
        """Corpus cell whose center is great-circle nearest to p (first by
        (row, col) order on exact ties)."""
        table = self.table(model_id)
        if len(table) == 0:
            raise CorpusError(f"model {model_id}: corpus is empty")
        lat1 = np.radians(table.lat)
        lon1 = np.radians(table.lon)
        lat2 = np.radians(p.lat)
        lon2 = np.radians(p.lon)
        s = (
            np.sin((lat2 - lat1) / 2.0) ** 2
            + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
        )
        i = int(np.argmin(s))
        return table.block.cell_at(i), i


def _table_from_records(model_id: str, records: List[EmbeddingRecord]) -> ModelTable:
    if records:
        dim = len(records[0].vector)
        vectors = np.stack([r.vector for r in records])
    else:
        dim = 0
        vectors = np.empty((0, dim), dtype=np.float32)
    block = RecordBlock(
        rows=np.array([r.cell.row for r in records], dtype=np.int32),
        cols=np.array([r.cell.col for r in records], dtype=np.int32),
        vectors=vectors,
    )
    return ModelTable(
        model_id=model_id,
        block=block,
        lat=np.array([r.lat for r in records], dtype=np.float64),
        lon=np.array([r.lon for r in records], dtype=np.float64),
        acquired_at=np.array([r.acquired_at for r in records], dtype=np.int64),
        products=[r.source_product for r in records],
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def validate_corpus(root: Union[str, Path]) -> dict:
    """Integrity report: checksums, manifest closure, dim/dtype consistency.

    Returns {"ok": bool, "problems": [{"shard": id|None, "code": str,
    "message": str}], "checked_shards": n}.
    """
    root = Path(root)
    problems: List[dict] = []

    def problem(code: str, message: str, shard: Optional[str] = None):
        problems.append({"shard": shard, "code": code, "message": message})

    try:
        manifest = load_corpus_manifest(root)
    except CorpusError as e:
        problem("manifest_unreadable", str(e))
        return {"ok": False, "problems": problems, "checked_shards": 0}

    per_model_counts: Dict[str, int] = {}
    seen_cells: Dict[str, Set[Tuple[int, int]]] = {}
    checked = 0
    for shard in manifest.shards:
        checked += 1
        path = root / shard.path
        if not path.is_file():
            problem("missing_file", f"shard file {shard.path} not found", shard.shard_id)
            continue
        if sum(g[1] for g in shard.row_groups) != shard.record_count:
            problem(
                "row_group_counts",
                "row group counts do not sum to record_count",
                shard.shard_id,
            )
        prev_end = None
        for _, _, offset, length in shard.row_groups:
            if prev_end is not None and offset < prev_end:
                problem("row_group_overlap", "row group byte ranges overlap", shard.shard_id)
            prev_end = offset + length
        try:
            records = read_shard(path, shard, verify_checksum=True)
        except ChecksumError as e:
            problem("checksum", str(e), shard.shard_id)
            continue
        except ShardFormatError as e:
            problem("decode", str(e), shard.shard_id)
            continue
        lat_min, lat_max, lon_min, lon_max = shard.bbox
        for r in records:
            if not (lat_min <= r.lat <= lat_max and lon_min <= r.lon <= lon_max):
                problem("bbox", f"record {r.cell} outside shard bbox", shard.shard_id)
                break
        for r in records:
            expected = cell_center(manifest.grid_spec, r.cell)
            if abs(expected.lat - r.lat) > 1e-9 or abs(expected.lon - r.lon) > 1e-9:
                problem(
                    "cell_center",
                    f"record {r.cell} lat/lon does not match its cell center",
                    shard.shard_id,
                )
                break
        cells = seen_cells.setdefault(shard.model_id, set())
        for r in records:
            key = (r.cell.row, r.cell.col)
            if key in cells:
                problem("duplicate_cell", f"cell {r.cell} appears twice", shard.shard_id)
                break
            cells.add(key)
        per_model_counts[shard.model_id] = per_model_counts.get(shard.model_id, 0) + len(records)

    for model_id, total in manifest.total_records.items():
        if per_model_counts.get(model_id, 0) != total:
            problem(
                "total_records",
                f"model {model_id}: manifest says {total}, shards hold "
                f"{per_model_counts.get(model_id, 0)}",
            )
    return {"ok": not problems, "problems": problems, "checked_shards": checked}


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

SYNTH_ACQUIRED_AT = 1_700_000_000  # fixed timestamp keeps shard bytes reproducible
SYNTH_SMOOTH_TAU_KM = 150.0
SYNTH_SMOOTH_NOISE = 0.05


def synth_corpus(
    spec: GridSpec,
    registry: Registry,
    seed: int,
    cell_limit: int,
    out_dir: Union[str, Path],
    smooth: bool = False,
    fmt: str = "eesh1",
    row_group_size: int = 1024,
    shard_size: int = 100_000,
    bbox: Optional[Tuple[float, float, float, float]] = None,
    tau_km: float = SYNTH_SMOOTH_TAU_KM,
    noise_scale: float = SYNTH_SMOOTH_NOISE,
) -> CorpusManifest:
    """Write a deterministic pseudo-random corpus for every registry model.

    Vectors are unit-norm splitmix64 noise; with smooth=True each vector is the
    mock location field at the cell center plus scaled noise, so neighboring
    cells correlate and location demos behave sensibly. bbox, when given,
    restricts cells to (lat_min, lat_max, lon_min, lon_max) by center.
    """
    if cell_limit < 1:
        raise ValueError(f"cell_limit must be >= 1, got {cell_limit}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cells: List[GridCell] = []
    centers: List[GeoPoint] = []
    for cell in enumerate_subsampled(spec):
        center = cell_center(spec, cell)
        if bbox is not None:
            lat_min, lat_max, lon_min, lon_max = bbox
            if not (lat_min <= center.lat <= lat_max and lon_min <= center.lon <= lon_max):
                continue
        cells.append(cell)
        centers.append(center)
        if len(cells) >= cell_limit:
            break
    if not cells:
        raise CorpusError("no grid cells selected; loosen bbox or raise cell_limit")

    synth_meta: dict = {"seed": seed, "smooth": smooth, "noise_scale": noise_scale}
    anchor_count = 0
    if smooth:
        anchor_count = _anchor_count_for(spec, bbox, tau_km)
        synth_meta["mock_location"] = {
            "seed": seed,
            "tau_km": tau_km,
            "anchor_count": anchor_count,
            "bbox": list(bbox) if bbox is not None else None,
        }

    shards: List[ShardManifest] = []
    totals: Dict[str, int] = {}
    for model in registry:
        vectors = _synth_vectors(model, cells, centers, seed, smooth, tau_km, anchor_count, bbox, noise_scale)
        records = [
            EmbeddingRecord(
                cell=cells[i],
                lat=centers[i].lat,
                lon=centers[i].lon,
                model_id=model.id,
                vector=vectors[i],
                acquired_at=SYNTH_ACQUIRED_AT,
                source_product=f"SYNTH_{seed}_{model.id}",
            )
            for i in range(len(cells))
        ]
        ext = "parquet" if fmt == "parquet" else "eesh1"
        for shard_no, start in enumerate(range(0, len(records), shard_size)):
            chunk = records[start : start + shard_size]
            name = f"{model.id}-{shard_no:04d}.{ext}"
            shards.append(write_shard(chunk, out_dir / name, row_group_size, model, fmt))
        totals[model.id] = len(records)

    manifest = CorpusManifest(
        grid_spec=spec,
        shards=shards,
        total_records=totals,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        synth=synth_meta,
    )
    save_corpus_manifest(out_dir, manifest)
    return manifest


def _anchor_count_for(
    spec: GridSpec, bbox: Optional[Tuple[float, float, float, float]], tau_km: float
) -> int:
    """Enough kernel anchors that the location field varies at ~tau scale."""
    if bbox is None:
        area = 4.0 * np.pi * spec.earth_radius_km**2
    else:
        lat_min, lat_max, lon_min, lon_max = bbox
        frac = (np.sin(np.radians(lat_max)) - np.sin(np.radians(lat_min))) / 2.0
        frac *= (lon_max - lon_min) / 360.0
        area = 4.0 * np.pi * spec.earth_radius_km**2 * max(frac, 1e-9)
    return int(min(4096, max(16, np.ceil(area / tau_km**2))))


_SYNTH_BATCH = 8192  # cells per vectorized batch; bounds transient memory


def _synth_vectors(
    model: ModelInfo,
    cells: Sequence[GridCell],
    centers: Sequence[GeoPoint],
    seed: int,
    smooth: bool,
    tau_km: float,
    anchor_count: int,
    bbox: Optional[Tuple[float, float, float, float]],
    noise_scale: float,
) -> np.ndarray:
    from .encoder import location_field_batch, make_location_field

    n = len(cells)
    out = np.empty((n, model.dim), dtype=model.numpy_dtype)
    field_cfg = make_location_field(seed, model.dim, anchor_count, tau_km, bbox) if smooth else None
    states = np.array(
        [
            rng.derive_state(b"tileseek-synth", rng.key_bytes(seed, model.id, c.row, c.col))
            for c in cells
        ],
        dtype=np.uint64,
    )
    for start in range(0, n, _SYNTH_BATCH):
        stop = min(n, start + _SYNTH_BATCH)
        noise = rng.standard_normals_batch(states[start:stop], model.dim)
        noise /= np.linalg.norm(noise, axis=1, keepdims=True)
        if field_cfg is not None:
            loc = location_field_batch(
                field_cfg,
                np.array([p.lat for p in centers[start:stop]]),
                np.array([p.lon for p in centers[start:stop]]),
            ).astype(np.float64)
            loc /= np.linalg.norm(loc, axis=1, keepdims=True)
            v = loc + noise_scale * noise
        else:
            v = noise
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out[start:stop] = v.astype(model.numpy_dtype)
    return out
