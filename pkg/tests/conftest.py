import pytest

from tileseek.grid import GridSpec
from tileseek.models import Registry
from tileseek.store import Corpus, synth_corpus


@pytest.fixture(scope="session")
def registry():
    return Registry.default()


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory, registry):
    """400-cell corpus for every model, eesh1, deterministic."""
    out = tmp_path_factory.mktemp("corpus-small")
    synth_corpus(GridSpec(), registry, seed=11, cell_limit=400, out_dir=out, row_group_size=64)
    return out


@pytest.fixture(scope="session")
def small_corpus(small_corpus_dir):
    return Corpus.load(small_corpus_dir)


@pytest.fixture(scope="session")
def smooth_corpus_dir(tmp_path_factory, registry):
    """Regionally bounded smooth corpus; neighbors correlate via the location field."""
    out = tmp_path_factory.mktemp("corpus-smooth")
    synth_corpus(
        GridSpec(),
        registry,
        seed=47,
        cell_limit=100_000,
        out_dir=out,
        smooth=True,
        bbox=(-10.0, 10.0, -75.0, -45.0),
    )
    return out


@pytest.fixture(scope="session")
def smooth_corpus(smooth_corpus_dir):
    return Corpus.load(smooth_corpus_dir)
