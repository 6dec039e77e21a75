"""Time interval prediction for text-enhanced temporal knowledge graphs."""

from .data import (
    Dataset,
    DatasetFormat,
    EntityRecord,
    IntervalCategory,
    Quadruple,
    RelationRecord,
    TimeInterval,
    TimeRange,
    TrainingPoint,
    expand_training_points,
    filter_evaluable,
    load_dataset,
    normalize_granularity,
    save_dataset,
)
from .inductive import SplitConfig, make_inductive_split
from .inference import (
    IntervalScore,
    PredictedInterval,
    TripleClassifierConfig,
    YearDistribution,
    aeiou,
    evaluate,
    gaeiou,
    gap,
    giou,
    greedy_coalesce,
    hull,
    interval_length,
    interval_scores,
    overlap,
    triple_classification,
    year_distribution,
)
from .scorer import (
    ScorerParams,
    TrainConfig,
    margin_loss_and_grad,
    sample_entity_corrupted,
    sample_time_corrupted,
    score,
    train,
)
from .text import (
    HashingTextEncoder,
    TableTextEncoder,
    TripleSentence,
    build_sentence,
    build_triple_sentence,
    sentence_key,
)
from .timeenc import encode_time, time_embedding_table

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetFormat",
    "EntityRecord",
    "HashingTextEncoder",
    "IntervalCategory",
    "IntervalScore",
    "PredictedInterval",
    "Quadruple",
    "RelationRecord",
    "ScorerParams",
    "SplitConfig",
    "TableTextEncoder",
    "TimeInterval",
    "TimeRange",
    "TrainConfig",
    "TrainingPoint",
    "TripleClassifierConfig",
    "TripleSentence",
    "YearDistribution",
    "aeiou",
    "build_sentence",
    "build_triple_sentence",
    "encode_time",
    "evaluate",
    "expand_training_points",
    "filter_evaluable",
    "gaeiou",
    "gap",
    "giou",
    "greedy_coalesce",
    "hull",
    "interval_length",
    "interval_scores",
    "load_dataset",
    "margin_loss_and_grad",
    "make_inductive_split",
    "normalize_granularity",
    "overlap",
    "sample_entity_corrupted",
    "sample_time_corrupted",
    "save_dataset",
    "score",
    "sentence_key",
    "time_embedding_table",
    "train",
    "triple_classification",
    "year_distribution",
]
