"""Inductive split generation by entity removal.

Works on the triple-level view of the whole dataset (intervals stripped,
duplicates collapsed). Entities are sampled without replacement under a seed;
a candidate is removed only if afterwards no node is isolated and every
relation keeps at least the configured number of edges. Removed entities
alternate between the validation and test sides until both removal targets
are met, and every quadruple then follows its triple into the new split.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Quadruple, relabel_splits
from .errors import SplitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitConfig:
    valid_entities: int
    test_entities: int
    min_relation_edges: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.valid_entities < 0 or self.test_entities < 0:
            raise ValueError("removal targets must be non-negative")
        if self.valid_entities + self.test_entities < 1:
            raise ValueError("at least one entity must be removed")
        if self.min_relation_edges < 1:
            raise ValueError("minimum relation edge count must be >= 1")


@dataclass
class SplitReport:
    seed: int
    removed_valid: list[int] = field(default_factory=list)
    removed_test: list[int] = field(default_factory=list)
    rejected: int = 0
    train_triples: int = 0
    valid_triples: int = 0
    test_triples: int = 0

    def to_text(self) -> str:
        lines = [
            f"seed = {self.seed}",
            f"removed_valid_entities = {len(self.removed_valid)}",
            f"removed_test_entities = {len(self.removed_test)}",
            f"rejected_candidates = {self.rejected}",
            f"train_triples = {self.train_triples}",
            f"valid_triples = {self.valid_triples}",
            f"test_triples = {self.test_triples}",
            "removed_valid = " + " ".join(str(e) for e in self.removed_valid),
            "removed_test = " + " ".join(str(e) for e in self.removed_test),
        ]
        return "\n".join(lines) + "\n"


def make_inductive_split(
    dataset: Dataset, config: SplitConfig
) -> tuple[Dataset, SplitReport]:
    """Re-partition the dataset so valid/test triples contain unseen entities."""
    quads_by_triple: dict[tuple, list[Quadruple]] = defaultdict(list)
    for quad in dataset.all_quadruples():
        quads_by_triple[quad.triple].append(quad)
    triples = list(quads_by_triple.keys())

    incident: dict[int, set[tuple]] = defaultdict(set)
    relation_edges: Counter = Counter()
    for triple in triples:
        s, r, o = triple
        incident[s].add(triple)
        incident[o].add(triple)
        relation_edges[r] += 1

    alive_triples = set(triples)
    report = SplitReport(seed=config.seed)
    moved: dict[str, list[tuple]] = {"valid": [], "test": []}
    targets = {"valid": config.valid_entities, "test": config.test_entities}
    turn = "valid"

    rng = np.random.default_rng(config.seed)
    candidates = sorted(incident.keys())
    rng.shuffle(candidates)

    for entity in candidates:
        if targets["valid"] <= len(report.removed_valid) and targets["test"] <= len(
            report.removed_test
        ):
            break
        edges = incident[entity]
        if not edges:
            continue  # already drained by earlier removals
        if not _removal_allowed(entity, edges, incident, relation_edges, config):
            report.rejected += 1
            continue
        # Commit the removal: drop the entity's edges from the live graph.
        for triple in edges:
            s, r, o = triple
            alive_triples.discard(triple)
            relation_edges[r] -= 1
            for node in (s, o):
                if node != entity:
                    incident[node].discard(triple)
        incident[entity] = set()
        side = _pick_side(turn, report, targets)
        moved[side].extend(edges)
        if side == "valid":
            report.removed_valid.append(entity)
        else:
            report.removed_test.append(entity)
        turn = "test" if side == "valid" else "valid"

    achieved_valid = len(report.removed_valid)
    achieved_test = len(report.removed_test)
    if achieved_valid < targets["valid"] or achieved_test < targets["test"]:
        raise SplitError(
            f"exhausted candidate entities with {achieved_valid}/{targets['valid']} valid "
            f"and {achieved_test}/{targets['test']} test removals achieved",
            achieved_valid=achieved_valid,
            achieved_test=achieved_test,
        )

    # Re-attach time information: every quadruple follows its triple.
    def collect(triple_list) -> list[Quadruple]:
        out = []
        for triple in sorted(triple_list):
            out.extend(quads_by_triple[triple])
        return out

    new_train = collect(alive_triples)
    new_valid = collect(moved["valid"])
    new_test = collect(moved["test"])
    report.train_triples = len(alive_triples)
    report.valid_triples = len(moved["valid"])
    report.test_triples = len(moved["test"])
    logger.info(
        "inductive split: removed %d+%d entities (%d rejections); %d/%d/%d triples",
        achieved_valid, achieved_test, report.rejected,
        report.train_triples, report.valid_triples, report.test_triples,
    )
    return relabel_splits(dataset, new_train, new_valid, new_test), report


def _pick_side(turn: str, report: SplitReport, targets: dict[str, int]) -> str:
    valid_open = len(report.removed_valid) < targets["valid"]
    test_open = len(report.removed_test) < targets["test"]
    if valid_open and test_open:
        return turn
    return "valid" if valid_open else "test"


def _removal_allowed(
    entity: int,
    edges: set[tuple],
    incident: dict[int, set[tuple]],
    relation_edges: Counter,
    config: SplitConfig,
) -> bool:
    """Check the post-removal graph: no isolated node, relations keep enough edges."""
    removed_per_relation = Counter(r for _, r, _ in edges)
    for relation, removed in removed_per_relation.items():
        if relation_edges[relation] - removed < config.min_relation_edges:
            return False
    neighbors = {node for s, _, o in edges for node in (s, o) if node != entity}
    for neighbor in neighbors:
        if not (incident[neighbor] - edges):
            return False  # neighbor would become isolated
    return True
