"""Fusion/scoring network with analytic gradients, negative samplers, and training.

The network concatenates a triple embedding (dimension d) with a time point
embedding (dimension d'), applies one learned linear layer into a fusion space
of width k, a ReLU, and a final linear layer down to a scalar plausibility
score. Training minimizes a margin ranking loss between each positive
quadruple-point and its sampled negatives, with Adam. All gradients are coded
by hand and checked against finite differences in the test suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .data import (
    Dataset,
    Quadruple,
    TimeInterval,
    TimeRange,
    TrainingPoint,
    expand_training_points,
)
from .errors import NonFiniteLossError, SamplingError
from .text import build_sentence
from .timeenc import time_embedding_table

logger = logging.getLogger(__name__)

NEGATIVE_TIME = "time"
NEGATIVE_ENTITY = "entity"

# Cap on flattened rows handled per forward/backward call; keeps peak memory
# bounded when negative sets are large.
_MAX_ROWS = 8192


@dataclass
class ScorerParams:
    """Learnable tensors of the fusion/scoring network."""

    w1: np.ndarray  # (k, d + d')
    b1: np.ndarray  # (k,)
    w2: np.ndarray  # (1, k)
    b2: np.ndarray  # scalar, kept as 0-d array so optimizer updates are uniform
    text_dim: int
    time_dim: int

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(())
        k = self.b1.shape[0]
        if self.w1.shape != (k, self.input_dim):
            raise ValueError(f"w1 shape {self.w1.shape} != ({k}, {self.input_dim})")
        if self.w2.shape != (1, k):
            raise ValueError(f"w2 shape {self.w2.shape} != (1, {k})")
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in parameter {name}")

    @property
    def fusion_dim(self) -> int:
        return self.b1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.text_dim + self.time_dim

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def copy(self) -> "ScorerParams":
        return ScorerParams(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.text_dim, self.time_dim,
        )

    @classmethod
    def initialize(
        cls, text_dim: int, time_dim: int, fusion_dim: int, rng: np.random.Generator
    ) -> "ScorerParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
        input_dim = text_dim + time_dim
        r1 = 1.0 / np.sqrt(input_dim)
        r2 = 1.0 / np.sqrt(fusion_dim)
        return cls(
            w1=rng.uniform(-r1, r1, size=(fusion_dim, input_dim)),
            b1=np.zeros(fusion_dim),
            w2=rng.uniform(-r2, r2, size=(1, fusion_dim)),
            b2=np.zeros(()),
            text_dim=text_dim,
            time_dim=time_dim,
        )


def _forward_rows(rows: np.ndarray, params: ScorerParams):
    """Pre-activations, activations, and scores for a (M, d+d') input matrix."""
    hidden = rows @ params.w1.T + params.b1
    activated = np.maximum(hidden, 0.0)
    scores = activated @ params.w2[0] + params.b2
    return hidden, activated, scores


def score_rows(rows: np.ndarray, params: ScorerParams) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != params.input_dim:
        raise ValueError(f"expected rows of width {params.input_dim}, got shape {rows.shape}")
    return _forward_rows(rows, params)[2]


def score(e_sro: np.ndarray, e_t: np.ndarray, params: ScorerParams) -> float:
    """Plausibility score of one (triple embedding, time embedding) pair."""
    e_sro = np.asarray(e_sro, dtype=np.float64)
    e_t = np.asarray(e_t, dtype=np.float64)
    if e_sro.shape != (params.text_dim,) or e_t.shape != (params.time_dim,):
        raise ValueError(
            f"embedding shapes {e_sro.shape}/{e_t.shape} do not match "
            f"params ({params.text_dim},)/({params.time_dim},)"
        )
    return float(score_rows(np.concatenate([e_sro, e_t])[None, :], params)[0])


def zero_grads(params: ScorerParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.arrays().items()}


def _backprop_rows(
    rows: np.ndarray,
    hidden: np.ndarray,
    activated: np.ndarray,
    row_weights: np.ndarray,
    params: ScorerParams,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate gradients of sum(row_weights * scores) into ``grads``.

    Subgradient convention: both the ReLU and (upstream) the hinge use 0 at
    their kinks, hence the strict > 0 masks.
    """
    d_hidden = (row_weights[:, None] * params.w2[0]) * (hidden > 0)
    grads["w2"] += (row_weights @ activated)[None, :]
    grads["b2"] += row_weights.sum()
    grads["w1"] += d_hidden.T @ rows
    grads["b1"] += d_hidden.sum(axis=0)


def margin_loss_and_grad(
    pos_inputs: np.ndarray,
    neg_inputs: np.ndarray,
    params: ScorerParams,
    margin: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Hinge loss sum(max(0, f(neg) - f(pos) + margin)) and its gradients.

    Accepts a single positive with its negative set (shapes (D,) and (N, D))
    or a batch (shapes (B, D) and (B, N, D)). The loss is a sum, not a mean.
    """
    pos = np.asarray(pos_inputs, dtype=np.float64)
    neg = np.asarray(neg_inputs, dtype=np.float64)
    if pos.ndim == 1:
        pos = pos[None, :]
        neg = neg[None, ...]
    batch, n_neg, dim = neg.shape
    if pos.shape != (batch, dim):
        raise ValueError(f"positive shape {pos.shape} inconsistent with negatives {neg.shape}")

    grads = zero_grads(params)
    pos_hidden, pos_act, pos_scores = _forward_rows(pos, params)

    loss = 0.0
    pos_weights = np.zeros(batch)
    # Chunk over positives so the flattened negative matrix stays small.
    group = max(1, _MAX_ROWS // n_neg)
    for lo in range(0, batch, group):
        hi = min(batch, lo + group)
        rows = neg[lo:hi].reshape(-1, dim)
        hidden, act, scores = _forward_rows(rows, params)
        slack = scores.reshape(hi - lo, n_neg) - pos_scores[lo:hi, None] + margin
        active = slack > 0
        loss += float(slack[active].sum())
        neg_weights = active.astype(np.float64)
        pos_weights[lo:hi] = -neg_weights.sum(axis=1)
        _backprop_rows(rows, hidden, act, neg_weights.reshape(-1), params, grads)
    _backprop_rows(pos, pos_hidden, pos_act, pos_weights, params, grads)
    return loss, grads


def build_positive_points(points: Iterable[TrainingPoint]) -> frozenset:
    """The set D+ of (s, r, o, t) tuples the model treats as true."""
    return frozenset(p.point for p in points)


def sample_entity_corrupted(
    point: TrainingPoint,
    dataset: Dataset,
    positive_points: frozenset,
    n: int,
    rng: np.random.Generator,
    max_attempts: Optional[int] = None,
) -> list[tuple[int, int, int, int]]:
    """Corrupt the subject or object (side chosen uniformly per draw)."""
    if n < 1:
        raise ValueError("need at least one negative per positive")
    s, r, o, t = point.point
    num_entities = dataset.num_entities
    budget = max_attempts if max_attempts is not None else max(1000, 50 * n)
    out: list[tuple[int, int, int, int]] = []
    attempts = 0
    while len(out) < n:
        if attempts >= budget:
            raise SamplingError(
                f"gave up after {attempts} draws while corrupting {point.point}; "
                f"{len(out)}/{n} negatives found"
            )
        attempts += 1
        entity = int(rng.integers(num_entities))
        if int(rng.integers(2)) == 0:
            candidate = (entity, r, o, t)
        else:
            candidate = (s, r, entity, t)
        if candidate in positive_points:
            continue
        out.append(candidate)
    return out


def eligible_corruption_years(interval: TimeInterval, time_range: TimeRange) -> list[int]:
    """Years in range that violate the interval, by interval category.

    Closed: outside [start, end]. Right-open (end unknown): strictly before
    start. Left-open (start unknown): strictly after end.
    """
    if interval.is_closed:
        return [
            y for y in time_range.years() if y < interval.start or y > interval.end
        ]
    if interval.start is not None:  # right-open
        return [y for y in time_range.years() if y < interval.start]
    return [y for y in time_range.years() if y > interval.end]


def sample_time_corrupted(
    point: TrainingPoint,
    time_range: TimeRange,
    positive_points: frozenset,
    n: int,
    rng: np.random.Generator,
) -> list[tuple[int, int, int, int]]:
    """Corrupt the time point, drawing uniformly from the eligible years."""
    if n < 1:
        raise ValueError("need at least one negative per positive")
    quad = point.quadruple
    s, r, o = quad.triple
    eligible = [
        y
        for y in eligible_corruption_years(quad.interval, time_range)
        if (s, r, o, y) not in positive_points
    ]
    if not eligible:
        raise SamplingError(
            f"no eligible corruption years for triple {quad.triple} with interval "
            f"[{quad.interval.start}, {quad.interval.end}] in range "
            f"[{time_range.t_min}, {time_range.t_max}]"
        )
    draws = rng.integers(0, len(eligible), size=n)
    return [(s, r, o, eligible[i]) for i in draws]


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    margin: float = 2.0
    negatives: int = 128
    negative_type: str = NEGATIVE_TIME
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.negatives < 1:
            raise ValueError(f"need at least 1 negative per positive, got {self.negatives}")
        if self.negative_type not in (NEGATIVE_TIME, NEGATIVE_ENTITY):
            raise ValueError(f"unknown negative type {self.negative_type!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")

    def echo(self) -> dict[str, str]:
        return {key: str(value) for key, value in vars(self).items()}


class AdamOptimizer:
    """Plain Adam with bias correction, updating parameter arrays in place."""

    def __init__(self, params: ScorerParams, config: TrainConfig):
        self.config = config
        self.step_count = 0
        self.first_moment = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        self.second_moment = {k: np.zeros_like(v) for k, v in params.arrays().items()}

    def step(self, params: ScorerParams, grads: dict[str, np.ndarray]) -> None:
        cfg = self.config
        self.step_count += 1
        bias1 = 1.0 - cfg.beta1 ** self.step_count
        bias2 = 1.0 - cfg.beta2 ** self.step_count
        for name, arr in params.arrays().items():
            g = grads[name]
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            arr -= cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + cfg.epsilon)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    num_points: int = 0
    num_sentences: int = 0
    config: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class _EmbeddingCache:
    """Sentence embeddings for distinct triples, with on-demand growth."""

    def __init__(self, dataset: Dataset, text_encoder, variant: str):
        self.dataset = dataset
        self.encoder = text_encoder
        self.variant = variant
        self.row_of: dict[tuple[int, int, int], int] = {}
        self.rows: list[np.ndarray] = []

    def row_index(self, quadruple) -> int:
        triple = quadruple.triple
        index = self.row_of.get(triple)
        if index is None:
            sentence = build_sentence(quadruple, self.dataset, self.variant)
            vector = np.asarray(self.encoder.encode(sentence.text), dtype=np.float64)
            index = self.row_of[triple] = len(self.rows)
            self.rows.append(vector)
        return index

    def matrix(self) -> np.ndarray:
        return np.stack(self.rows) if self.rows else np.zeros((0, self.encoder.dim))


def _time_negative_year_cache(
    points: Sequence[TrainingPoint],
    time_range: TimeRange,
    positive_points: frozenset,
) -> dict[tuple, np.ndarray]:
    """Per distinct quadruple, the eligible corruption years as an index array."""
    cache: dict[tuple, np.ndarray] = {}
    for p in points:
        q = p.quadruple
        key = (q.subject, q.relation, q.object, q.interval.start, q.interval.end)
        if key in cache:
            continue
        eligible = [
            y
            for y in eligible_corruption_years(q.interval, time_range)
            if (q.subject, q.relation, q.object, y) not in positive_points
        ]
        if not eligible:
            raise SamplingError(
                f"no eligible corruption years for quadruple {key} in range "
                f"[{time_range.t_min}, {time_range.t_max}]"
            )
        cache[key] = np.asarray(eligible, dtype=np.int64) - time_range.t_min
    return cache


def _time_corrupted_step(
    sentences: np.ndarray,
    text_rows: np.ndarray,
    pos_year_idx: np.ndarray,
    neg_year_idx: np.ndarray,
    time_table: np.ndarray,
    params: ScorerParams,
    margin: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss/grad for time-corrupted batches.

    All rows of one positive share its triple embedding, so the text half of
    the first layer is applied once per positive and broadcast across its
    negatives; only the (cheap) time half varies per row.
    """
    d = params.text_dim
    w1_text = params.w1[:, :d]
    w1_time = params.w1[:, d:]
    batch_sentences = sentences[text_rows]  # (B, d)
    text_proj = batch_sentences @ w1_text.T  # (B, k)
    time_proj = time_table @ w1_time.T  # (T, k)

    pos_hidden = text_proj + time_proj[pos_year_idx] + params.b1
    pos_act = np.maximum(pos_hidden, 0.0)
    pos_scores = pos_act @ params.w2[0] + params.b2

    neg_hidden = text_proj[:, None, :] + time_proj[neg_year_idx] + params.b1
    neg_act = np.maximum(neg_hidden, 0.0)
    neg_scores = neg_act @ params.w2[0] + params.b2

    slack = neg_scores - pos_scores[:, None] + margin
    active = slack > 0
    loss = float(slack[active].sum())

    neg_weights = active.astype(np.float64)  # (B, N)
    pos_weights = -neg_weights.sum(axis=1)  # (B,)

    grads = zero_grads(params)
    grads["b2"] += pos_weights.sum() + neg_weights.sum()
    grads["w2"] += (pos_weights @ pos_act + np.tensordot(neg_weights, neg_act, 2))[None, :]

    d_pos_hidden = (pos_weights[:, None] * params.w2[0]) * (pos_hidden > 0)
    d_neg_hidden = (neg_weights[..., None] * params.w2[0]) * (neg_hidden > 0)
    grads["b1"] += d_pos_hidden.sum(axis=0) + d_neg_hidden.sum(axis=(0, 1))

    per_positive = d_pos_hidden + d_neg_hidden.sum(axis=1)  # (B, k)
    grads["w1"][:, :d] += per_positive.T @ batch_sentences

    flat_neg = d_neg_hidden.reshape(-1, params.fusion_dim)
    grads["w1"][:, d:] += (
        d_pos_hidden.T @ time_table[pos_year_idx]
        + flat_neg.T @ time_table[neg_year_idx.reshape(-1)]
    )
    return loss, grads


def train(
    dataset: Dataset,
    text_encoder,
    config: TrainConfig,
    variant: str = "N",
    time_dim: int = 64,
    fusion_dim: int = 64,
    initial_params: Optional[ScorerParams] = None,
) -> tuple[ScorerParams, TrainReport]:
    """Mini-batch Adam on the margin ranking loss; deterministic under the seed."""
    report = TrainReport(config=config.echo())
    points = expand_training_points(dataset.train, dataset.time_range)
    if not points:
        raise ValueError("train split produced no training points")
    positive_points = build_positive_points(points)

    cache = _EmbeddingCache(dataset, text_encoder, variant)
    text_rows_all = np.asarray([cache.row_index(p.quadruple) for p in points], dtype=np.int64)
    sentences = cache.matrix()
    if not np.all(np.isfinite(sentences)):
        raise NonFiniteLossError("non-finite triple embedding in the training set")

    time_range = dataset.time_range
    time_table = time_embedding_table(time_range, time_dim)
    pos_year_idx_all = np.asarray(
        [time_range.clamp(p.year) - time_range.t_min for p in points], dtype=np.int64
    )

    init_seq, shuffle_seq, negative_seq = np.random.SeedSequence(config.seed).spawn(3)
    init_rng = np.random.default_rng(init_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    negative_rng = np.random.default_rng(negative_seq)

    if initial_params is not None:
        params = initial_params.copy()
    else:
        params = ScorerParams.initialize(text_encoder.dim, time_dim, fusion_dim, init_rng)
    optimizer = AdamOptimizer(params, config)

    year_cache = None
    if config.negative_type == NEGATIVE_TIME:
        year_cache = _time_negative_year_cache(points, time_range, positive_points)

    report.num_points = len(points)
    report.num_sentences = len(cache.rows)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(points))
        epoch_loss = 0.0
        for batch_index, lo in enumerate(range(0, len(points), config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            batch = [points[i] for i in idx]
            if config.negative_type == NEGATIVE_TIME:
                neg_year_idx = np.empty((len(batch), config.negatives), dtype=np.int64)
                for row, p in enumerate(batch):
                    q = p.quadruple
                    key = (q.subject, q.relation, q.object, q.interval.start, q.interval.end)
                    eligible = year_cache[key]
                    draws = negative_rng.integers(0, len(eligible), size=config.negatives)
                    neg_year_idx[row] = eligible[draws]
                loss, grads = _time_corrupted_step(
                    sentences,
                    text_rows_all[idx],
                    pos_year_idx_all[idx],
                    neg_year_idx,
                    time_table,
                    params,
                    config.margin,
                )
            else:
                loss, grads = _entity_corrupted_step(
                    batch,
                    dataset,
                    cache,
                    pos_year_idx_all[idx],
                    time_table,
                    positive_points,
                    params,
                    config,
                    negative_rng,
                )
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_index + 1}"
                )
            optimizer.step(params, grads)
            epoch_loss += loss
        report.epoch_losses.append(epoch_loss)
        logger.info("epoch %d/%d loss %.6f", epoch + 1, config.epochs, epoch_loss)
    return params, report


def _entity_corrupted_step(
    batch: Sequence[TrainingPoint],
    dataset: Dataset,
    cache: _EmbeddingCache,
    pos_year_idx: np.ndarray,
    time_table: np.ndarray,
    positive_points: frozenset,
    params: ScorerParams,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[float, dict[str, np.ndarray]]:
    """Generic path: corrupted triples change the text side, so rows are explicit.

    Processed in groups of positives so the materialized row matrices stay
    below the row cap even with large negative sets.
    """
    n = config.negatives
    d = params.text_dim
    group = max(1, _MAX_ROWS // n)
    total_loss = 0.0
    total_grads = zero_grads(params)
    for lo in range(0, len(batch), group):
        chunk = batch[lo : lo + group]
        pos_rows = np.empty((len(chunk), params.input_dim))
        neg_rows = np.empty((len(chunk), n, params.input_dim))
        for row, p in enumerate(chunk):
            e_t = time_table[pos_year_idx[lo + row]]
            pos_rows[row, :d] = cache.rows[cache.row_index(p.quadruple)]
            pos_rows[row, d:] = e_t
            negatives = sample_entity_corrupted(p, dataset, positive_points, n, rng)
            for j, (s, r, o, _t) in enumerate(negatives):
                corrupted = Quadruple(s, r, o, p.quadruple.interval)
                neg_rows[row, j, :d] = cache.rows[cache.row_index(corrupted)]
                neg_rows[row, j, d:] = e_t
        loss, grads = margin_loss_and_grad(pos_rows, neg_rows, params, config.margin)
        total_loss += loss
        for name in total_grads:
            total_grads[name] += grads[name]
    return total_loss, total_grads


def save_checkpoint(path: str, params: ScorerParams, extra: Optional[dict] = None) -> None:
    """Text manifest, blank line, then little-endian float32 parameter dump."""
    lines = [
        "format = temt-checkpoint-v1",
        f"text_dim = {params.text_dim}",
        f"time_dim = {params.time_dim}",
        f"fusion_dim = {params.fusion_dim}",
    ]
    for key, value in sorted((extra or {}).items()):
        lines.append(f"{key} = {value}")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()
        for arr in (params.w1, params.b1, params.w2, params.b2)
    )
    with open(path, "wb") as handle:
        handle.write(("\n".join(lines) + "\n\n").encode("utf-8"))
        handle.write(blob)


def load_checkpoint(path: str) -> tuple[ScorerParams, dict[str, str]]:
    with open(path, "rb") as handle:
        raw = handle.read()
    header_bytes, _, blob = raw.partition(b"\n\n")
    header: dict[str, str] = {}
    for line in header_bytes.decode("utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
    try:
        d = int(header["text_dim"])
        d_prime = int(header["time_dim"])
        k = int(header["fusion_dim"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: missing or malformed checkpoint dimensions")
    floats = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    expected = k * (d + d_prime) + k + k + 1
    if floats.size != expected:
        raise ValueError(f"{path}: expected {expected} parameter values, found {floats.size}")
    w1, rest = floats[: k * (d + d_prime)].reshape(k, d + d_prime), floats[k * (d + d_prime):]
    b1, rest = rest[:k], rest[k:]
    w2, rest = rest[:k].reshape(1, k), rest[k:]
    params = ScorerParams(w1, b1, w2, rest[0], text_dim=d, time_dim=d_prime)
    return params, header
