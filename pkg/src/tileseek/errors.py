"""Exception taxonomy shared across the library, CLI, and HTTP service."""


class TileseekError(Exception):
    """Base class for all library errors."""


class CellIdError(TileseekError):
    """Malformed or out-of-range grid cell identifier."""


class RegistryError(TileseekError):
    """Unknown model id or invalid registry manifest."""


class DimensionMismatchError(TileseekError):
    """Vector length disagrees with the model's registered dimensionality."""

    def __init__(self, expected: int, actual: int, context: str = ""):
        self.expected = expected
        self.actual = actual
        suffix = f" ({context})" if context else ""
        super().__init__(f"expected dim {expected}, got {actual}{suffix}")


class NonFiniteVectorError(TileseekError):
    """Vector contains NaN or infinity."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"non-finite component at index {index}")


class ZeroNormError(TileseekError):
    """Vector norm too small to normalize."""


class UnsupportedModalityError(TileseekError):
    """Model does not support the requested query modality."""


class UnknownCellError(TileseekError):
    """Requested grid cell is not present in the corpus."""


class ShardFormatError(TileseekError):
    """Shard bytes do not decode under the declared container format."""


class ChecksumError(TileseekError):
    """Shard body bytes do not match the recorded checksum."""


class CorpusError(TileseekError):
    """Corpus manifest is inconsistent or refers to missing data."""


class EncoderError(TileseekError):
    """Base class for query-encoder failures."""


class EncoderTimeoutError(EncoderError):
    """Remote encoder did not answer within the configured timeout."""


class EncoderHTTPError(EncoderError):
    """Remote encoder answered with an HTTP error status."""

    def __init__(self, status: int, body: str, endpoint: str):
        self.status = status
        self.body = body
        self.endpoint = endpoint
        super().__init__(f"encoder at {endpoint} returned HTTP {status}: {body[:200]}")


class EncoderResponseError(EncoderError):
    """Remote encoder answered 200 but the payload is not a usable embedding."""
