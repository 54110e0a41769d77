"""Registry of embedding models: vector shape, storage dtype, query modalities.

The built-in defaults cover the four bundled model families; a JSON manifest
can replace or extend them so new embedding expansions slot in without code
changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, NonFiniteVectorError, RegistryError

MODALITIES = ("text", "image", "location")
DTYPES = ("float32", "float16")
BANDS = ("rgb", "multispectral")


@dataclass(frozen=True)
class ModelInfo:
    """One embedding model's shape, storage precision, and supported queries."""

    id: str
    arch_label: str
    dim: int
    dtype: str
    modalities: FrozenSet[str] = field(default_factory=frozenset)
    input_size_px: int = 224
    input_bands: str = "rgb"

    def __post_init__(self):
        if not self.id:
            raise RegistryError("model id must be non-empty")
        if self.dim <= 0:
            raise RegistryError(f"{self.id}: dim must be positive, got {self.dim}")
        if self.dtype not in DTYPES:
            raise RegistryError(f"{self.id}: dtype must be one of {DTYPES}, got {self.dtype!r}")
        mods = frozenset(self.modalities)
        if not mods:
            raise RegistryError(f"{self.id}: modalities must be non-empty")
        unknown = mods - set(MODALITIES)
        if unknown:
            raise RegistryError(f"{self.id}: unknown modalities {sorted(unknown)}")
        if self.input_size_px <= 0:
            raise RegistryError(f"{self.id}: input_size_px must be positive")
        if self.input_bands not in BANDS:
            raise RegistryError(f"{self.id}: input_bands must be one of {BANDS}")
        object.__setattr__(self, "modalities", mods)

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(np.float16 if self.dtype == "float16" else np.float32)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "arch_label": self.arch_label,
            "dim": self.dim,
            "dtype": self.dtype,
            "modalities": sorted(self.modalities),
            "input_size_px": self.input_size_px,
            "input_bands": self.input_bands,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelInfo":
        try:
            return cls(
                id=str(d["id"]),
                arch_label=str(d["arch_label"]),
                dim=int(d["dim"]),
                dtype=str(d["dtype"]),
                modalities=frozenset(d["modalities"]),
                input_size_px=int(d["input_size_px"]),
                input_bands=str(d["input_bands"]),
            )
        except KeyError as e:
            raise RegistryError(f"registry entry missing field {e.args[0]!r}") from None


def default_registry() -> List[ModelInfo]:
    """The four bundled models, in stable display order."""
    return [
        ModelInfo("dinov2", "ViT-L/14", 1024, "float32", frozenset({"image"}), 224, "rgb"),
        ModelInfo("farslip", "ViT-B/16", 512, "float16", frozenset({"text", "image"}), 224, "rgb"),
        ModelInfo(
            "satclip", "ViT16-L40", 256, "float16", frozenset({"location", "image"}), 224,
            "multispectral",
        ),
        ModelInfo(
            "siglip", "ViT-SO400M", 1152, "float16", frozenset({"text", "image"}), 384, "rgb"
        ),
    ]


class Registry:
    """Immutable id -> ModelInfo lookup with JSON manifest loading."""

    def __init__(self, entries: Sequence[ModelInfo]):
        ids = [m.id for m in entries]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise RegistryError(f"duplicate model ids: {sorted(dupes)}")
        self._entries = list(entries)
        self._by_id: Dict[str, ModelInfo] = {m.id: m for m in entries}

    @classmethod
    def default(cls) -> "Registry":
        return cls(default_registry())

    @classmethod
    def from_manifest(cls, path: Union[str, Path]) -> "Registry":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise RegistryError(f"cannot load registry manifest {path}: {e}") from e
        if not isinstance(raw, list):
            raise RegistryError("registry manifest must be a JSON array of model objects")
        return cls([ModelInfo.from_dict(d) for d in raw])

    def to_manifest(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps([m.to_dict() for m in self._entries], indent=2) + "\n")

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> List[str]:
        return [m.id for m in self._entries]

    def get(self, model_id: str) -> ModelInfo:
        try:
            return self._by_id[model_id]
        except KeyError:
            raise RegistryError(
                f"unknown model {model_id!r}; registered: {self.ids()}"
            ) from None


def supports(m: ModelInfo, modality: str) -> bool:
    """Whether the model accepts queries of the given modality."""
    return modality in m.modalities


def validate_vector(m: ModelInfo, v) -> np.ndarray:
    """Check length and finiteness against the model; return the vector as-is."""
    arr = np.asarray(v)
    if arr.ndim != 1 or arr.shape[0] != m.dim:
        actual = arr.shape[0] if arr.ndim == 1 else -1
        raise DimensionMismatchError(m.dim, actual, context=m.id)
    finite = np.isfinite(arr.astype(np.float64, copy=False))
    if not finite.all():
        raise NonFiniteVectorError(int(np.argmin(finite)))
    return arr
