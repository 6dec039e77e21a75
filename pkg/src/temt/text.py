"""Triple sentences and triple embeddings.

A fact is rendered as one sentence: subject name, relation name, object name,
optionally followed by the subject and object descriptions. Sentences are
embedded either through a precomputed embedding table (features extracted
offline by a sentence-embedding model) or through a deterministic hashing
encoder that needs no model at all.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Quadruple
from .errors import ConfigError, IngestionError, MissingEmbeddingError

VARIANT_NAMES = "N"  # names only
VARIANT_NAMES_DESC = "ND"  # names plus entity descriptions
VARIANTS = (VARIANT_NAMES, VARIANT_NAMES_DESC)

DEFAULT_EMBED_DIM = 768


@dataclass(frozen=True)
class TripleSentence:
    text: str
    variant: str


def normalize_name(name: str) -> str:
    """Underscores become spaces and whitespace collapses to single spaces."""
    return " ".join(name.replace("_", " ").split())


def build_triple_sentence(
    subject: int, relation: int, obj: int, dataset: Dataset, variant: str
) -> TripleSentence:
    """Concatenate names (and, for the ND variant, entity descriptions)."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown sentence variant {variant!r}; expected one of {VARIANTS}")
    parts = [
        normalize_name(dataset.entity_name(subject)),
        normalize_name(dataset.relation_name(relation)),
        normalize_name(dataset.entity_name(obj)),
    ]
    if variant == VARIANT_NAMES_DESC:
        for entity_id in (subject, obj):
            description = " ".join(dataset.entity_description(entity_id).split())
            if description:
                parts.append(description)
    return TripleSentence(" ".join(parts), variant)


def build_sentence(quadruple: Quadruple, dataset: Dataset, variant: str) -> TripleSentence:
    return build_triple_sentence(
        quadruple.subject, quadruple.relation, quadruple.object, dataset, variant
    )


def sentence_key(text: str) -> str:
    """64-bit content hash of the exact sentence string, as 16 hex characters.

    This is the join key between sentence files and embedding tables, so it
    must stay stable across processes and machines.
    """
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


class TableTextEncoder:
    """Looks sentences up in an embedding table keyed by sentence content hash."""

    def __init__(self, path: str):
        self.path = path
        self.dim, self.table = load_embedding_table(path)

    def encode(self, text: str) -> np.ndarray:
        key = sentence_key(text)
        try:
            return self.table[key]
        except KeyError:
            raise MissingEmbeddingError(
                f"embedding table {self.path} has no entry for key {key} "
                f"(sentence {text[:80]!r})"
            )


class HashingTextEncoder:
    """Deterministic model-free encoder for tests and desk-scale runs.

    Every token maps to a fixed pseudo-random unit vector seeded by the token's
    content hash; a sentence embeds as the L2-normalized sum of its token
    vectors. Token order does not matter, unlike a contextual encoder, which is
    acceptable where this encoder is used.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, seed: int = 0):
        if dim <= 0:
            raise ConfigError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is None:
            digest = hashlib.blake2b(
                f"{self.seed}\x00{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            cached = self._token_cache[token] = vec
        return cached

    def encode(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            return np.zeros(self.dim)
        total = np.zeros(self.dim)
        for token in tokens:
            total += self._token_vector(token)
        norm = np.linalg.norm(total)
        return total / norm if norm > 0 else total


def parse_encoder_spec(spec: str, dim: int = DEFAULT_EMBED_DIM):
    """Build an encoder from a ``table:<path>`` or ``hash:<seed>`` spec string."""
    kind, _, arg = spec.partition(":")
    if kind == "table" and arg:
        return TableTextEncoder(arg)
    if kind == "hash":
        try:
            seed = int(arg) if arg else 0
        except ValueError:
            raise ConfigError(f"hash encoder seed must be an integer, got {arg!r}")
        return HashingTextEncoder(dim=dim, seed=seed)
    raise ConfigError(f"unknown encoder spec {spec!r}; expected table:<path> or hash:<seed>")


def save_embedding_table(path: str, dim: int, rows: dict[str, np.ndarray]) -> None:
    """Write an embedding table; ``.bin`` extension selects the binary format."""
    items = sorted(rows.items())
    if path.endswith(".bin"):
        with open(path, "wb") as handle:
            handle.write(f"dim={dim} count={len(items)}\n".encode("ascii"))
            for key, vec in items:
                key_bytes = key.encode("utf-8")
                handle.write(struct.pack("<H", len(key_bytes)))
                handle.write(key_bytes)
                handle.write(np.asarray(vec, dtype="<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"dim={dim} count={len(items)}\n")
        for key, vec in items:
            values = " ".join(repr(float(v)) for v in np.asarray(vec, dtype=np.float64))
            handle.write(f"{key}\t{values}\n")


def _parse_table_header(line: str, path: str) -> tuple[int, int]:
    fields = dict(part.split("=", 1) for part in line.strip().split() if "=" in part)
    try:
        return int(fields["dim"]), int(fields["count"])
    except (KeyError, ValueError):
        raise IngestionError(f"{path}: bad embedding-table header {line.strip()!r}")


def load_embedding_table(path: str) -> tuple[int, dict[str, np.ndarray]]:
    """Read an embedding table in either the text or the binary format."""
    if path.endswith(".bin"):
        with open(path, "rb") as handle:
            header = handle.readline().decode("ascii")
            dim, count = _parse_table_header(header, path)
            table = {}
            for index in range(count):
                raw_len = handle.read(2)
                if len(raw_len) != 2:
                    raise IngestionError(f"{path}: truncated record {index}")
                (key_len,) = struct.unpack("<H", raw_len)
                key = handle.read(key_len).decode("utf-8")
                raw = handle.read(4 * dim)
                if len(raw) != 4 * dim:
                    raise IngestionError(f"{path}: truncated vector for key {key}")
                table[key] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return dim, table
    with open(path, encoding="utf-8") as handle:
        dim, count = _parse_table_header(handle.readline(), path)
        table = {}
        for lineno, line in enumerate(handle, start=2):
            if not line.strip():
                continue
            key, _, values = line.rstrip("\n").partition("\t")
            vec = np.array(values.split(), dtype=np.float64)
            if vec.shape != (dim,):
                raise IngestionError(
                    f"{path}:{lineno}: expected {dim} values for key {key}, got {vec.size}"
                )
            table[key] = vec
    if len(table) != count:
        raise IngestionError(f"{path}: header count {count} != {len(table)} rows read")
    return dim, table
