"""tileseek: cross-modal retrieval over gridded satellite-image embeddings."""

from .grid import GeoPoint, GridCell, GridSpec, cell_center, cell_of, cell_id_string, parse_cell_id
from .models import ModelInfo, Registry, default_registry
from .search import QueryVector, ScoredTile, SearchParams, top_fraction, top_k
from .store import Corpus, EmbeddingRecord, synth_corpus

__version__ = "0.1.0"

__all__ = [
    "GeoPoint",
    "GridCell",
    "GridSpec",
    "cell_center",
    "cell_of",
    "cell_id_string",
    "parse_cell_id",
    "ModelInfo",
    "Registry",
    "default_registry",
    "QueryVector",
    "ScoredTile",
    "SearchParams",
    "top_fraction",
    "top_k",
    "Corpus",
    "EmbeddingRecord",
    "synth_corpus",
    "__version__",
]
