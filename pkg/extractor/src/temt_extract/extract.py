"""Batch-encode keyed sentences into an embedding-table file.

Input is a sentence file (``key<TAB>sentence`` per line); output is an
embedding table in the text or binary format described in the repository's
FORMATS.md. This tool shares only those file contracts with the training
pipeline: keys are 64-bit blake2b content hashes of the exact sentence text,
rendered as 16 lowercase hex characters.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "all-mpnet-base-v2"


class ExtractError(Exception):
    pass


@dataclass
class ExtractionJob:
    input_path: str
    output_path: str
    model_name: str = DEFAULT_MODEL
    batch_size: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExtractError(f"batch size must be positive, got {self.batch_size}")


def sentence_key(text: str) -> str:
    """Published content-hash rule shared with the training pipeline."""
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


def read_sentences(path: str) -> dict[str, str]:
    """Read a keyed sentence file; duplicates collapse, conflicts are fatal."""
    sentences: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            key, sep, text = line.partition("\t")
            if not sep:
                raise ExtractError(f"{path}:{lineno}: expected key<TAB>sentence")
            if key in sentences:
                if sentences[key] != text:
                    raise ExtractError(
                        f"{path}:{lineno}: key {key} maps to two different sentences"
                    )
                continue
            if key != sentence_key(text):
                logger.warning(
                    "%s:%d: key %s does not match the content hash %s of its sentence",
                    path, lineno, key, sentence_key(text),
                )
            sentences[key] = text
    return sentences


def load_model(model_name: str):
    """Load a sentence-embedding model; import is deferred so tests can inject."""
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExtractError(f"sentence-transformers is not installed: {exc}") from exc
    try:
        return SentenceTransformer(model_name)
    except Exception as exc:
        raise ExtractError(f"could not load model {model_name!r}: {exc}") from exc


def _model_dimension(model) -> int:
    dim = model.get_sentence_embedding_dimension()
    if not dim or dim < 1:
        raise ExtractError("model did not report a sentence embedding dimension")
    return int(dim)


def _count_tokens(model, text: str) -> int:
    tokenizer = getattr(model, "tokenizer", None)
    if tokenizer is not None and hasattr(tokenizer, "tokenize"):
        return len(tokenizer.tokenize(text))
    return len(text.split())


def _warn_over_limit(model, items: list[tuple[str, str]]) -> int:
    limit = getattr(model, "max_seq_length", None)
    if not limit:
        return 0
    over = 0
    for key, text in items:
        if _count_tokens(model, text) > limit:
            over += 1
            logger.warning(
                "sentence %s exceeds the model's %d-token limit and will be truncated",
                key, limit,
            )
    return over


def write_table(path: str, dim: int, rows: list[tuple[str, np.ndarray]]) -> None:
    """Write rows (already sorted by key) atomically, text or binary by extension."""
    tmp_path = path + ".tmp"
    if path.endswith(".bin"):
        with open(tmp_path, "wb") as handle:
            handle.write(f"dim={dim} count={len(rows)}\n".encode("ascii"))
            for key, vec in rows:
                key_bytes = key.encode("utf-8")
                handle.write(struct.pack("<H", len(key_bytes)))
                handle.write(key_bytes)
                handle.write(np.asarray(vec, dtype="<f4").tobytes())
    else:
        with open(tmp_path, "w", encoding="utf-8") as handle:
            handle.write(f"dim={dim} count={len(rows)}\n")
            for key, vec in rows:
                values = " ".join(repr(float(v)) for v in np.asarray(vec, dtype=np.float64))
                handle.write(f"{key}\t{values}\n")
    os.replace(tmp_path, path)


def extract(job: ExtractionJob, model=None) -> int:
    """Encode every distinct sentence and write the table; returns the row count.

    Keys are sorted before batching so repeated runs see identical batch
    compositions and reproduce vectors bit for bit.
    """
    if not os.path.exists(job.input_path):
        raise ExtractError(f"sentence file not found: {job.input_path}")
    sentences = read_sentences(job.input_path)
    if model is None:
        model = load_model(job.model_name)
    dim = _model_dimension(model)

    items = sorted(sentences.items())
    _warn_over_limit(model, items)
    rows: list[tuple[str, np.ndarray]] = []
    for lo in range(0, len(items), job.batch_size):
        batch = items[lo : lo + job.batch_size]
        vectors = model.encode(
            [text for _, text in batch],
            batch_size=job.batch_size,
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        vectors = np.asarray(vectors)
        if vectors.shape != (len(batch), dim):
            raise ExtractError(
                f"model returned shape {vectors.shape}, expected ({len(batch)}, {dim})"
            )
        rows.extend((key, vectors[i]) for i, (key, _) in enumerate(batch))
    write_table(job.output_path, dim, rows)
    logger.info("wrote %d embeddings (dim %d) to %s", len(rows), dim, job.output_path)
    return len(rows)
