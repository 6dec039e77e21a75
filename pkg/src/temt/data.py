"""Data model, ingestion, and preprocessing for text-enhanced temporal KGs.

A dataset directory holds tab-separated files: three quadruple splits
(``subject relation object start end``, with ``-`` for an unknown endpoint),
an entity name file, an entity description file, and a relation name file.
All ids in the files are integers; the loader remaps them to dense ids in
first-occurrence order so downstream code can index arrays directly.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .errors import IngestionError, ResolutionError

logger = logging.getLogger(__name__)


class IntervalCategory(Enum):
    CLOSED = "closed"
    LEFT_OPEN = "left-open"
    RIGHT_OPEN = "right-open"


@dataclass(frozen=True)
class TimeInterval:
    """Validity interval of a fact, in year granularity.

    Exactly one of three shapes: closed (both endpoints known),
    left-open (start unknown), right-open (end unknown). An interval with
    both endpoints unknown is rejected at ingestion.
    """

    start: Optional[int]
    end: Optional[int]
    category: IntervalCategory

    def __post_init__(self):
        if self.category is IntervalCategory.CLOSED:
            if self.start is None or self.end is None:
                raise ValueError("closed interval requires both endpoints")
            if self.start > self.end:
                raise ValueError(f"closed interval with start > end: [{self.start}, {self.end}]")
        elif self.category is IntervalCategory.LEFT_OPEN:
            if self.start is not None or self.end is None:
                raise ValueError("left-open interval has unknown start and known end")
        elif self.category is IntervalCategory.RIGHT_OPEN:
            if self.start is None or self.end is not None:
                raise ValueError("right-open interval has known start and unknown end")
        else:
            raise ValueError(f"unknown interval category {self.category!r}")

    @classmethod
    def from_endpoints(cls, start: Optional[int], end: Optional[int]) -> "TimeInterval":
        """Build an interval, inferring the category from which endpoints are known."""
        if start is not None and end is not None:
            return cls(start, end, IntervalCategory.CLOSED)
        if start is not None:
            return cls(start, None, IntervalCategory.RIGHT_OPEN)
        if end is not None:
            return cls(None, end, IntervalCategory.LEFT_OPEN)
        raise ValueError("interval with both endpoints unknown")

    @property
    def is_closed(self) -> bool:
        return self.category is IntervalCategory.CLOSED

    def known_endpoints(self) -> list[tuple[int, str]]:
        """Known (year, endpoint-name) pairs, start first."""
        out = []
        if self.start is not None:
            out.append((self.start, "start"))
        if self.end is not None:
            out.append((self.end, "end"))
        return out


@dataclass(frozen=True)
class Quadruple:
    subject: int
    relation: int
    object: int
    interval: TimeInterval

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self.subject, self.relation, self.object)


@dataclass(frozen=True)
class EntityRecord:
    id: int
    name: str
    description: str = ""


@dataclass(frozen=True)
class RelationRecord:
    id: int
    name: str


@dataclass(frozen=True)
class TimeRange:
    """Inclusive year range covered by the train split's known endpoints."""

    t_min: int
    t_max: int

    def __post_init__(self):
        if self.t_min > self.t_max:
            raise ValueError(f"t_min {self.t_min} > t_max {self.t_max}")

    def __contains__(self, year: int) -> bool:
        return self.t_min <= year <= self.t_max

    def __len__(self) -> int:
        return self.t_max - self.t_min + 1

    def years(self) -> range:
        return range(self.t_min, self.t_max + 1)

    def clamp(self, year: int, slack: int = 0) -> int:
        return min(max(year, self.t_min - slack), self.t_max + slack)


@dataclass(frozen=True)
class TrainingPoint:
    """A (quadruple, single time point) pair used as one training positive."""

    quadruple: Quadruple
    year: int
    endpoint: str  # "start" or "end"

    @property
    def point(self) -> tuple[int, int, int, int]:
        q = self.quadruple
        return (q.subject, q.relation, q.object, self.year)


@dataclass
class Dataset:
    entities: list[EntityRecord]
    relations: list[RelationRecord]
    train: list[Quadruple]
    valid: list[Quadruple]
    test: list[Quadruple]
    time_range: TimeRange
    load_report: dict = field(default_factory=dict)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def entity_name(self, entity_id: int) -> str:
        return self.entities[entity_id].name

    def entity_description(self, entity_id: int) -> str:
        return self.entities[entity_id].description

    def relation_name(self, relation_id: int) -> str:
        return self.relations[relation_id].name

    def splits(self) -> dict[str, list[Quadruple]]:
        return {"train": self.train, "valid": self.valid, "test": self.test}

    def all_quadruples(self) -> list[Quadruple]:
        return self.train + self.valid + self.test


@dataclass(frozen=True)
class DatasetFormat:
    """File names and conventions inside a dataset directory."""

    train_file: str = "train.tsv"
    valid_file: str = "valid.tsv"
    test_file: str = "test.tsv"
    entity_file: str = "entities.tsv"
    relation_file: str = "relations.tsv"
    description_file: str = "descriptions.tsv"
    manifest_file: str = "manifest.txt"
    missing_token: str = "-"

    def split_files(self) -> dict[str, str]:
        return {"train": self.train_file, "valid": self.valid_file, "test": self.test_file}

    def data_files(self) -> list[str]:
        return [
            self.train_file,
            self.valid_file,
            self.test_file,
            self.entity_file,
            self.relation_file,
            self.description_file,
        ]


def normalize_granularity(raw_date: str) -> int:
    """Reduce a date string (``YYYY``, ``YYYY-MM``, or ``YYYY-MM-DD``) to its year.

    Month and day components are dropped. A leading ``-`` marks a BCE year.
    """
    text = raw_date.strip()
    if not text:
        raise IngestionError("empty date string")
    sign = 1
    if text.startswith("-"):
        sign = -1
        text = text[1:]
    parts = text.split("-")
    if not 1 <= len(parts) <= 3 or not all(p.isdigit() for p in parts):
        raise IngestionError(f"cannot parse year from date {raw_date!r}")
    return sign * int(parts[0])


def _read_tsv(path: str, n_columns: int) -> Iterable[tuple[int, list[str]]]:
    """Yield (line number, columns) for every non-empty line; checks column count."""
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != n_columns:
                raise IngestionError(
                    f"{path}:{lineno}: expected {n_columns} tab-separated columns, got {len(cols)}"
                )
            yield lineno, cols


def _parse_endpoint(token: str, missing_token: str, path: str, lineno: int) -> Optional[int]:
    if token.strip() == missing_token:
        return None
    try:
        return normalize_granularity(token)
    except IngestionError as exc:
        raise IngestionError(f"{path}:{lineno}: {exc}") from exc


def _load_vocab(path: str, kind: str) -> tuple[dict[int, int], list[str]]:
    """Read an ``id<TAB>name`` file; return external-id -> dense-id map and names.

    Dense ids follow first-occurrence order in the file.
    """
    id_map: dict[int, int] = {}
    names: list[str] = []
    for lineno, (ext_id_text, name) in _read_tsv(path, 2):
        try:
            ext_id = int(ext_id_text)
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: non-integer {kind} id {ext_id_text!r}")
        if ext_id in id_map:
            raise IngestionError(f"{path}:{lineno}: duplicate {kind} id {ext_id}")
        normalized = " ".join(name.split())
        if not normalized:
            raise IngestionError(f"{path}:{lineno}: empty {kind} name for id {ext_id}")
        id_map[ext_id] = len(names)
        names.append(normalized)
    return id_map, names


def _load_quadruples(
    path: str,
    entity_map: dict[int, int],
    relation_map: dict[int, int],
    fmt: DatasetFormat,
) -> list[Quadruple]:
    quads = []
    for lineno, cols in _read_tsv(path, 5):
        s_text, r_text, o_text, start_text, end_text = cols
        try:
            s_ext, r_ext, o_ext = int(s_text), int(r_text), int(o_text)
        except ValueError:
            raise IngestionError(f"{path}:{lineno}: non-integer id in {cols[:3]}")
        try:
            subject = entity_map[s_ext]
            obj = entity_map[o_ext]
        except KeyError as exc:
            raise ResolutionError(f"{path}:{lineno}: unknown entity id {exc.args[0]}")
        try:
            relation = relation_map[r_ext]
        except KeyError:
            raise ResolutionError(f"{path}:{lineno}: unknown relation id {r_ext}")
        start = _parse_endpoint(start_text, fmt.missing_token, path, lineno)
        end = _parse_endpoint(end_text, fmt.missing_token, path, lineno)
        try:
            interval = TimeInterval.from_endpoints(start, end)
        except ValueError as exc:
            raise IngestionError(f"{path}:{lineno}: {exc}")
        quads.append(Quadruple(subject, relation, obj, interval))
    return quads


def _quad_key(q: Quadruple) -> tuple:
    return (q.subject, q.relation, q.object, q.interval.start, q.interval.end)


def load_dataset(dir_path: str, fmt: DatasetFormat = DatasetFormat()) -> Dataset:
    """Load and fully resolve a dataset directory.

    The time range is computed from the train split's known endpoints only.
    Valid/test endpoints outside that range are counted in ``load_report``
    (they are clamped later, at encoding time) and logged as a warning.
    """
    ent_path = os.path.join(dir_path, fmt.entity_file)
    rel_path = os.path.join(dir_path, fmt.relation_file)
    desc_path = os.path.join(dir_path, fmt.description_file)
    entity_map, entity_names = _load_vocab(ent_path, "entity")
    relation_map, relation_names = _load_vocab(rel_path, "relation")

    descriptions = [""] * len(entity_names)
    for lineno, (ext_id_text, desc) in _read_tsv(desc_path, 2):
        try:
            ext_id = int(ext_id_text)
        except ValueError:
            raise IngestionError(f"{desc_path}:{lineno}: non-integer entity id {ext_id_text!r}")
        if ext_id not in entity_map:
            raise ResolutionError(f"{desc_path}:{lineno}: unknown entity id {ext_id}")
        descriptions[entity_map[ext_id]] = " ".join(desc.split())

    splits = {}
    for split, filename in fmt.split_files().items():
        path = os.path.join(dir_path, filename)
        splits[split] = _load_quadruples(path, entity_map, relation_map, fmt)

    seen: dict[tuple, str] = {}
    for split, quads in splits.items():
        for q in quads:
            key = _quad_key(q)
            if key in seen and seen[key] != split:
                raise IngestionError(
                    f"quadruple {key} appears in both {seen[key]} and {split} splits"
                )
            seen[key] = split

    endpoint_years = [y for q in splits["train"] for y, _ in q.interval.known_endpoints()]
    if not endpoint_years:
        raise IngestionError(f"{dir_path}: train split has no known time endpoints")
    time_range = TimeRange(min(endpoint_years), max(endpoint_years))

    out_of_range = sum(
        1
        for split in ("valid", "test")
        for q in splits[split]
        for y, _ in q.interval.known_endpoints()
        if y not in time_range
    )
    if out_of_range:
        logger.warning(
            "%d valid/test endpoint(s) fall outside the train time range [%d, %d]; "
            "they are clamped at encoding time",
            out_of_range,
            time_range.t_min,
            time_range.t_max,
        )

    entities = [
        EntityRecord(i, name, descriptions[i]) for i, name in enumerate(entity_names)
    ]
    relations = [RelationRecord(i, name) for i, name in enumerate(relation_names)]
    return Dataset(
        entities=entities,
        relations=relations,
        train=splits["train"],
        valid=splits["valid"],
        test=splits["test"],
        time_range=time_range,
        load_report={"out_of_range_endpoints": out_of_range},
    )


def save_dataset(dataset: Dataset, dir_path: str, fmt: DatasetFormat = DatasetFormat()) -> None:
    """Write a dataset back out in the same TSV formats the loader reads.

    Dense ids are written as-is, so a reload reproduces identical assignments.
    """
    os.makedirs(dir_path, exist_ok=True)

    def endpoint_text(year: Optional[int]) -> str:
        return fmt.missing_token if year is None else str(year)

    for split, filename in fmt.split_files().items():
        with open(os.path.join(dir_path, filename), "w", encoding="utf-8") as handle:
            for q in dataset.splits()[split]:
                handle.write(
                    f"{q.subject}\t{q.relation}\t{q.object}\t"
                    f"{endpoint_text(q.interval.start)}\t{endpoint_text(q.interval.end)}\n"
                )
    with open(os.path.join(dir_path, fmt.entity_file), "w", encoding="utf-8") as handle:
        for record in dataset.entities:
            handle.write(f"{record.id}\t{record.name}\n")
    with open(os.path.join(dir_path, fmt.description_file), "w", encoding="utf-8") as handle:
        for record in dataset.entities:
            if record.description:
                handle.write(f"{record.id}\t{record.description}\n")
    with open(os.path.join(dir_path, fmt.relation_file), "w", encoding="utf-8") as handle:
        for record in dataset.relations:
            handle.write(f"{record.id}\t{record.name}\n")


def file_checksum(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_checksums(dir_path: str, fmt: DatasetFormat = DatasetFormat()) -> dict[str, str]:
    sums = {}
    for filename in fmt.data_files():
        path = os.path.join(dir_path, filename)
        if os.path.exists(path):
            sums[filename] = file_checksum(path)
    return sums


def write_manifest(dataset: Dataset, dir_path: str, fmt: DatasetFormat = DatasetFormat()) -> str:
    """Record granularity, time range, and file checksums as key-value lines."""
    path = os.path.join(dir_path, fmt.manifest_file)
    lines = [
        "granularity = year",
        f"t_min = {dataset.time_range.t_min}",
        f"t_max = {dataset.time_range.t_max}",
    ]
    for filename, digest in sorted(dataset_checksums(dir_path, fmt).items()):
        lines.append(f"checksum.{filename} = {digest}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


def expand_training_points(
    quadruples: Iterable[Quadruple],
    time_range: Optional[TimeRange] = None,
    slack: int = 0,
) -> list[TrainingPoint]:
    """Turn quadruples into per-endpoint training points.

    A closed interval yields two points (start and end); an open interval
    yields one point at its known endpoint. A degenerate closed interval
    (start == end) yields a single point rather than two duplicates.
    No intermediate years are emitted. When a time range is given, years
    are clamped into it (plus slack).
    """
    points = []
    clamped = 0
    for q in quadruples:
        endpoints = q.interval.known_endpoints()
        if q.interval.is_closed and q.interval.start == q.interval.end:
            endpoints = endpoints[:1]
        for year, endpoint in endpoints:
            if time_range is not None:
                bounded = time_range.clamp(year, slack)
                if bounded != year:
                    clamped += 1
                year = bounded
            points.append(TrainingPoint(q, year, endpoint))
    if clamped:
        logger.warning("clamped %d training-point year(s) into the encoding range", clamped)
    return points


def filter_evaluable(quadruples: Iterable[Quadruple]) -> list[Quadruple]:
    """Keep only closed-interval quadruples; interval metrics need both endpoints."""
    quads = list(quadruples)
    kept = [q for q in quads if q.interval.is_closed]
    if quads and not kept:
        logger.warning("no closed-interval quadruples to evaluate; result is empty")
    return kept


def relabel_splits(
    dataset: Dataset,
    train: list[Quadruple],
    valid: list[Quadruple],
    test: list[Quadruple],
) -> Dataset:
    """New Dataset with the same vocabularies but different split membership.

    The time range is recomputed from the new train split.
    """
    years = [y for q in train for y, _ in q.interval.known_endpoints()]
    if not years:
        raise IngestionError("relabeled train split has no known time endpoints")
    return replace(
        dataset,
        train=train,
        valid=valid,
        test=test,
        time_range=TimeRange(min(years), max(years)),
        load_report={},
    )
