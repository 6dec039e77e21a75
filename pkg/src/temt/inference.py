"""Interval decoding from per-year scores, interval metrics, and evaluation.

Metrics compare closed intervals given as (start, end) year pairs. Interval
lengths are inclusive (end - start + 1). The two inputs are canonically
ordered by start year (ties by end year) before the hull/gap/overlap calculus,
which makes every metric symmetric in its arguments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset, Quadruple, TimeRange
from .errors import DataError, SamplingError
from .scorer import ScorerParams, score_rows
from .text import build_triple_sentence
from .timeenc import time_embedding_table

logger = logging.getLogger(__name__)

Interval = tuple[int, int]

METRIC_NAMES = ("gIOU", "aeIOU", "gaeIOU")


def interval_length(interval: Sequence[int]) -> int:
    """Inclusive length end - start + 1, clamped to 0 for inverted intervals."""
    start, end = interval
    return max(0, end - start + 1)


def _ordered(a: Sequence[int], b: Sequence[int]) -> tuple[Interval, Interval]:
    a = (int(a[0]), int(a[1]))
    b = (int(b[0]), int(b[1]))
    return (a, b) if a <= b else (b, a)


def hull(a: Sequence[int], b: Sequence[int]) -> Interval:
    """Shortest interval covering both inputs."""
    first, second = _ordered(a, b)
    return (first[0], max(first[1], second[1]))


def overlap(a: Sequence[int], b: Sequence[int]) -> Interval:
    """Shared interval; may come out inverted (length 0) when disjoint."""
    first, second = _ordered(a, b)
    return (second[0], min(first[1], second[1]))


def gap(a: Sequence[int], b: Sequence[int]) -> Interval:
    """Separating interval from the earlier end to the later start.

    Inverted (length 0) when the inputs overlap by more than one year. For
    touching or identical inputs the raw interval has positive length; use
    gap_length for the metric-relevant value, which is 0 whenever the inputs
    share at least one year.
    """
    first, second = _ordered(a, b)
    return (first[1], second[0])


def gap_length(a: Sequence[int], b: Sequence[int]) -> int:
    if interval_length(overlap(a, b)) > 0:
        return 0
    return interval_length(gap(a, b))


def iou(a: Sequence[int], b: Sequence[int]) -> float:
    shared = interval_length(overlap(a, b))
    union = interval_length(a) + interval_length(b) - shared
    return shared / union


def giou(a: Sequence[int], b: Sequence[int]) -> float:
    """Intersection over union minus the gap-to-hull penalty."""
    return iou(a, b) - gap_length(a, b) / interval_length(hull(a, b))


def aeiou(a: Sequence[int], b: Sequence[int]) -> float:
    """Overlap over hull; 1/|hull| when the intervals do not overlap."""
    hull_len = interval_length(hull(a, b))
    shared = interval_length(overlap(a, b))
    if shared > 0:
        return shared / hull_len
    return 1.0 / hull_len


def gaeiou(a: Sequence[int], b: Sequence[int]) -> float:
    """Like aeiou, but the no-overlap branch shrinks with the gap size."""
    hull_len = interval_length(hull(a, b))
    shared = interval_length(overlap(a, b))
    if shared > 0:
        return shared / hull_len
    return (1.0 / gap_length(a, b)) / hull_len


_METRIC_FUNCTIONS = {"gIOU": giou, "aeIOU": aeiou, "gaeIOU": gaeiou}


@dataclass(frozen=True)
class IntervalScore:
    """All three metrics for one predicted/gold interval pair."""

    giou: float
    aeiou: float
    gaeiou: float


def interval_scores(a: Sequence[int], b: Sequence[int]) -> IntervalScore:
    return IntervalScore(giou(a, b), aeiou(a, b), gaeiou(a, b))


@dataclass
class YearDistribution:
    """Normalized probability per year over the dataset's time range."""

    time_range: TimeRange
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(self.time_range),):
            raise ValueError(
                f"expected {len(self.time_range)} probabilities, got {self.probs.shape}"
            )
        if np.any(self.probs < 0) or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.asarray(scores, dtype=np.float64) - np.max(scores)
    weights = np.exp(shifted)
    return weights / weights.sum()


def year_scores(e_sro: np.ndarray, params: ScorerParams, time_range: TimeRange) -> np.ndarray:
    """Raw plausibility score for every year in the range."""
    table = time_embedding_table(time_range, params.time_dim)
    rows = np.hstack([np.tile(np.asarray(e_sro, dtype=np.float64), (len(table), 1)), table])
    return score_rows(rows, params)


def year_distribution(
    quadruple: Quadruple,
    dataset: Dataset,
    variant: str,
    text_encoder,
    params: ScorerParams,
) -> YearDistribution:
    """Softmax over per-year scores for one fact."""
    sentence = build_triple_sentence(
        quadruple.subject, quadruple.relation, quadruple.object, dataset, variant
    )
    e_sro = text_encoder.encode(sentence.text)
    scores = year_scores(e_sro, params, dataset.time_range)
    return YearDistribution(dataset.time_range, softmax(scores))


@dataclass(frozen=True)
class PredictedInterval:
    start: int
    end: int
    cum_prob: float

    @property
    def bounds(self) -> Interval:
        return (self.start, self.end)


def greedy_coalesce(
    dist: YearDistribution, k: int, threshold: float
) -> list[PredictedInterval]:
    """Grow up to k disjoint intervals from probability peaks.

    Each interval starts at the most probable unused year and repeatedly
    absorbs the more probable adjacent unused year (ties rightward) until its
    cumulative probability reaches the threshold or no adjacent unused year
    remains. Seed ties break toward the earlier year. The returned list is
    ordered by seed probability, which is the generation order.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if k < 1:
        raise ValueError(f"need at least one interval, got k={k}")
    probs = dist.probs
    size = len(probs)
    used = np.zeros(size, dtype=bool)
    results: list[PredictedInterval] = []
    while len(results) < k and not used.all():
        masked = np.where(used, -np.inf, probs)
        seed = int(np.argmax(masked))  # first occurrence wins ties: earlier year
        lo = hi = seed
        cum = float(probs[seed])
        used[seed] = True
        while cum < threshold:
            left = lo - 1 if lo > 0 and not used[lo - 1] else None
            right = hi + 1 if hi + 1 < size and not used[hi + 1] else None
            if left is None and right is None:
                break
            if left is None or (right is not None and probs[right] >= probs[left]):
                used[right] = True
                hi = right
                cum += float(probs[right])
            else:
                used[left] = True
                lo = left
                cum += float(probs[left])
        results.append(
            PredictedInterval(dist.time_range.t_min + lo, dist.time_range.t_min + hi, cum)
        )
    return results


def evaluate(
    gold_intervals: Sequence[Interval],
    predictions: Sequence[Sequence[PredictedInterval]],
    ks: Sequence[int],
) -> dict[tuple[str, int], float]:
    """Mean over facts of the best metric among each fact's top-k intervals."""
    if not gold_intervals:
        raise DataError("cannot evaluate an empty test set")
    if len(gold_intervals) != len(predictions):
        raise ValueError(
            f"{len(gold_intervals)} gold intervals but {len(predictions)} prediction lists"
        )
    table: dict[tuple[str, int], float] = {}
    for name in METRIC_NAMES:
        fn = _METRIC_FUNCTIONS[name]
        for k in ks:
            total = 0.0
            for gold, preds in zip(gold_intervals, predictions):
                top = list(preds)[:k]
                if not top:
                    raise DataError(f"no predicted intervals for gold {gold}")
                total += max(fn(p.bounds, gold) for p in top)
            table[(name, k)] = total / len(gold_intervals)
    return table


def render_metric_table(table: dict[tuple[str, int], float]) -> str:
    """Aligned text table, metrics as rows and k values as columns."""
    ks = sorted({k for _, k in table})
    header = ["metric"] + [f"@{k}" for k in ks]
    rows = [[name] + [f"{table[(name, k)]:.4f}" for k in ks] for name in METRIC_NAMES]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row))
             for row in [header] + rows]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Triple classification harness


@dataclass
class TripleClassifierConfig:
    hidden_units: int = 100
    l2_alpha: float = 0.05
    max_iterations: int = 1000


def _distinct_triples(quads: Sequence[Quadruple]) -> list[tuple[int, int, int]]:
    seen = set()
    out = []
    for q in quads:
        if q.triple not in seen:
            seen.add(q.triple)
            out.append(q.triple)
    return out


def _corrupt_triple(
    triple: tuple[int, int, int],
    num_entities: int,
    excluded: set,
    rng: np.random.Generator,
    max_attempts: int = 1000,
) -> tuple[int, int, int]:
    s, r, o = triple
    for _ in range(max_attempts):
        entity = int(rng.integers(num_entities))
        candidate = (entity, r, o) if int(rng.integers(2)) == 0 else (s, r, entity)
        if candidate not in excluded:
            return candidate
    raise SamplingError(f"could not corrupt triple {triple} within {max_attempts} attempts")


def classification_examples(
    dataset: Dataset, rng: np.random.Generator
) -> tuple[list, np.ndarray, list, np.ndarray]:
    """Balanced triple classification data: one corrupted negative per positive.

    Test positives that also appear in train or valid are dropped. Train
    negatives must not be train triples; test negatives must not appear in
    any split.
    """
    train_triples = _distinct_triples(dataset.train)
    valid_set = set(_distinct_triples(dataset.valid))
    test_distinct = _distinct_triples(dataset.test)
    train_set = set(train_triples)
    test_positives = [t for t in test_distinct if t not in train_set and t not in valid_set]
    all_known = train_set | valid_set | set(test_distinct)

    train_examples = []
    for triple in train_triples:
        negative = _corrupt_triple(triple, dataset.num_entities, train_set, rng)
        train_examples.append((triple, 1))
        train_examples.append((negative, 0))
    test_examples = []
    for triple in test_positives:
        negative = _corrupt_triple(triple, dataset.num_entities, all_known, rng)
        test_examples.append((triple, 1))
        test_examples.append((negative, 0))

    train_x = [t for t, _ in train_examples]
    train_y = np.array([y for _, y in train_examples])
    test_x = [t for t, _ in test_examples]
    test_y = np.array([y for _, y in test_examples])
    return train_x, train_y, test_x, test_y


def featurize_triples(
    triples: Sequence[tuple[int, int, int]],
    dataset: Dataset,
    variant: str,
    text_encoder,
) -> np.ndarray:
    rows = []
    for s, r, o in triples:
        sentence = build_triple_sentence(s, r, o, dataset, variant)
        rows.append(np.asarray(text_encoder.encode(sentence.text), dtype=np.float64))
    return np.stack(rows) if rows else np.zeros((0, text_encoder.dim))


def fit_triple_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    config: TripleClassifierConfig,
    seed: int,
):
    """One-hidden-layer perceptron (ReLU, Adam) with L2 regularization."""
    from sklearn.neural_network import MLPClassifier

    classifier = MLPClassifier(
        hidden_layer_sizes=(config.hidden_units,),
        activation="relu",
        solver="adam",
        alpha=config.l2_alpha,
        max_iter=config.max_iterations,
        random_state=seed,
    )
    classifier.fit(features, labels)
    return classifier


def triple_classification(
    dataset: Dataset,
    text_encoder,
    config: TripleClassifierConfig,
    seed: int,
    variant: str = "N",
) -> float:
    """Balanced binary accuracy of an MLP over triple embeddings."""
    rng = np.random.default_rng(seed)
    train_x, train_y, test_x, test_y = classification_examples(dataset, rng)
    if not len(test_x):
        raise DataError("no evaluable test triples for classification")
    train_features = featurize_triples(train_x, dataset, variant, text_encoder)
    test_features = featurize_triples(test_x, dataset, variant, text_encoder)
    classifier = fit_triple_classifier(train_features, train_y, config, seed)
    accuracy = float(classifier.score(test_features, test_y))
    logger.info(
        "triple classification: %d train / %d test examples, accuracy %.4f",
        len(train_x), len(test_x), accuracy,
    )
    return accuracy
