from .extract import (
    DEFAULT_MODEL,
    ExtractError,
    ExtractionJob,
    extract,
    read_sentences,
    sentence_key,
    write_table,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "ExtractError",
    "ExtractionJob",
    "extract",
    "read_sentences",
    "sentence_key",
    "write_table",
]
