"""Command-line entry point for the whole pipeline.

Subcommands: preprocess, split-inductive, emit-sentences, train, predict,
evaluate, classify-triples. Option values resolve as flags > environment
(``TEMT_<NAME>``) > config file > defaults, and the resolved configuration is
echoed into a run report in the output directory. Exit codes: 0 success,
2 usage or configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import data as data_mod
from . import inference, scorer, text
from .errors import ConfigError, DataError, NumericError, TemtError
from .inductive import SplitConfig, make_inductive_split

logger = logging.getLogger(__name__)

ENV_PREFIX = "TEMT_"

_INT = "int"
_FLOAT = "float"
_STR = "str"
_INT_LIST = "int_list"

# name -> (value type, default); None defaults mean "required by the subcommand".
_OPTION_TYPES = {
    "data": (_STR, None),
    "out": (_STR, None),
    "seed": (_INT, 0),
    "variant": (_STR, "N"),
    "encoder": (_STR, "hash:0"),
    "embed_dim": (_INT, text.DEFAULT_EMBED_DIM),
    "time_dim": (_INT, 64),
    "fusion_dim": (_INT, 64),
    "epochs": (_INT, 50),
    "learning_rate": (_FLOAT, 0.001),
    "margin": (_FLOAT, 2.0),
    "negatives": (_INT, 128),
    "negative_type": (_STR, scorer.NEGATIVE_TIME),
    "beta1": (_FLOAT, 0.9),
    "beta2": (_FLOAT, 0.999),
    "epsilon": (_FLOAT, 1e-8),
    "batch_size": (_INT, 512),
    "theta": (_FLOAT, 0.65),
    "top_k": (_INT_LIST, [1, 10]),
    "checkpoint": (_STR, None),
    "predictions": (_STR, None),
    "valid_entities": (_INT, None),
    "test_entities": (_INT, None),
    "min_relation_edges": (_INT, 100),
    "hidden_units": (_INT, 100),
    "alpha": (_FLOAT, 0.05),
    "max_iterations": (_INT, 1000),
    "emit_sentences": (_STR, ""),
}


def _convert(name: str, raw: str):
    kind = _OPTION_TYPES[name][0]
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT_LIST:
            return [int(part) for part in str(raw).replace(",", " ").split()]
        return str(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {name} value {raw!r}")


def _load_config_file(path: str) -> dict[str, str]:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


def resolve_config(args: argparse.Namespace, needed: list[str]) -> dict:
    """Apply the flags > env > config file > defaults precedence."""
    file_values = _load_config_file(args.config) if args.config else {}
    resolved = {}
    for name in needed:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            resolved[name] = flag_value
            continue
        env_value = os.environ.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            resolved[name] = _convert(name, env_value)
            continue
        if name in file_values:
            resolved[name] = _convert(name, file_values[name])
            continue
        resolved[name] = _OPTION_TYPES[name][1]
    return resolved


def _require(config: dict, names: list[str], command: str) -> None:
    for name in names:
        if config.get(name) in (None, ""):
            raise ConfigError(f"{command} requires --{name.replace('_', '-')}")


def _validate_common(config: dict) -> None:
    if "variant" in config and config["variant"] not in text.VARIANTS:
        raise ConfigError(f"variant must be one of {text.VARIANTS}, got {config['variant']!r}")
    for name in ("embed_dim", "fusion_dim"):
        if name in config and config[name] < 1:
            raise ConfigError(f"{name} must be positive")
    if "time_dim" in config and (config["time_dim"] < 2 or config["time_dim"] % 2):
        raise ConfigError("time-dim must be a positive even number")
    if "theta" in config and not 0 < config["theta"] <= 1:
        raise ConfigError(f"theta must be in (0, 1], got {config['theta']}")
    if "top_k" in config:
        ks = config["top_k"] if isinstance(config["top_k"], list) else [config["top_k"]]
        if not ks or any(k < 1 for k in ks):
            raise ConfigError(f"top-k values must be positive, got {ks}")
        config["top_k"] = ks
    if "encoder" in config:
        kind = str(config["encoder"]).partition(":")[0]
        if kind not in ("table", "hash"):
            raise ConfigError(
                f"encoder must be table:<path> or hash:<seed>, got {config['encoder']!r}"
            )


class RunReport:
    """Key-value run report: config echo, checksums, warnings, wall time."""

    def __init__(self, command: str, config: dict):
        self.lines = [f"command = {command}"]
        for key in sorted(config):
            self.lines.append(f"config.{key} = {config[key]}")
        self.started = time.perf_counter()

    def add(self, key: str, value) -> None:
        self.lines.append(f"{key} = {value}")

    def add_checksums(self, dataset_dir: str) -> None:
        for name, digest in sorted(data_mod.dataset_checksums(dataset_dir).items()):
            self.lines.append(f"checksum.{name} = {digest}")

    def write(self, out_dir: str) -> str:
        self.add("wall_time_s", f"{time.perf_counter() - self.started:.3f}")
        path = os.path.join(out_dir, "run_report.txt")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(self.lines) + "\n")
        return path


def _load_dataset(config: dict) -> data_mod.Dataset:
    dataset = data_mod.load_dataset(config["data"])
    return dataset


def _make_encoder(config: dict):
    return text.parse_encoder_spec(config["encoder"], dim=config["embed_dim"])


def _prepare_out(config: dict) -> str:
    out_dir = config["out"]
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_preprocess(config: dict) -> int:
    report = RunReport("preprocess", config)
    dataset = _load_dataset(config)
    out_dir = _prepare_out(config)
    data_mod.save_dataset(dataset, out_dir)
    data_mod.write_manifest(dataset, out_dir)
    report.add_checksums(config["data"])
    report.add("entities", dataset.num_entities)
    report.add("relations", dataset.num_relations)
    for split, quads in dataset.splits().items():
        report.add(f"quadruples.{split}", len(quads))
    report.add("t_min", dataset.time_range.t_min)
    report.add("t_max", dataset.time_range.t_max)
    report.add("warning.out_of_range_endpoints", dataset.load_report.get("out_of_range_endpoints", 0))
    report.write(out_dir)
    return 0


def cmd_split_inductive(config: dict) -> int:
    report = RunReport("split-inductive", config)
    dataset = _load_dataset(config)
    split_config = SplitConfig(
        valid_entities=config["valid_entities"],
        test_entities=config["test_entities"],
        min_relation_edges=config["min_relation_edges"],
        seed=config["seed"],
    )
    new_dataset, split_report = make_inductive_split(dataset, split_config)
    out_dir = _prepare_out(config)
    data_mod.save_dataset(new_dataset, out_dir)
    data_mod.write_manifest(new_dataset, out_dir)
    with open(os.path.join(out_dir, "split_report.txt"), "w", encoding="utf-8") as handle:
        handle.write(split_report.to_text())
    report.add_checksums(config["data"])
    for split, quads in new_dataset.splits().items():
        report.add(f"quadruples.{split}", len(quads))
    report.write(out_dir)
    return 0


def _distinct_triples_in_order(dataset: data_mod.Dataset):
    seen = set()
    for quad in dataset.all_quadruples():
        if quad.triple not in seen:
            seen.add(quad.triple)
            yield quad.triple


def _write_sentence_file(path: str, sentences: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key, sentence in sentences.items():
            handle.write(f"{key}\t{sentence}\n")


def cmd_emit_sentences(config: dict) -> int:
    report = RunReport("emit-sentences", config)
    dataset = _load_dataset(config)
    out_dir = _prepare_out(config)
    sentences: dict[str, str] = {}
    for s, r, o in _distinct_triples_in_order(dataset):
        sentence = text.build_triple_sentence(s, r, o, dataset, config["variant"])
        sentences.setdefault(text.sentence_key(sentence.text), sentence.text)
    path = os.path.join(out_dir, "sentences.tsv")
    _write_sentence_file(path, sentences)
    report.add_checksums(config["data"])
    report.add("sentences", len(sentences))
    report.write(out_dir)
    print(f"wrote {len(sentences)} sentences to {path}")
    return 0


def cmd_train(config: dict) -> int:
    report = RunReport("train", config)
    dataset = _load_dataset(config)
    encoder = _make_encoder(config)
    train_config = scorer.TrainConfig(
        learning_rate=config["learning_rate"],
        epochs=config["epochs"],
        margin=config["margin"],
        negatives=config["negatives"],
        negative_type=config["negative_type"],
        beta1=config["beta1"],
        beta2=config["beta2"],
        epsilon=config["epsilon"],
        batch_size=config["batch_size"],
        seed=config["seed"],
    )
    params, train_report = scorer.train(
        dataset,
        encoder,
        train_config,
        variant=config["variant"],
        time_dim=config["time_dim"],
        fusion_dim=config["fusion_dim"],
    )
    out_dir = _prepare_out(config)
    checkpoint_path = os.path.join(out_dir, "checkpoint.bin")
    scorer.save_checkpoint(
        checkpoint_path,
        params,
        extra={"seed": config["seed"], "variant": config["variant"], "encoder": config["encoder"]},
    )
    report.add_checksums(config["data"])
    report.add("training_points", train_report.num_points)
    report.add("distinct_sentences", train_report.num_sentences)
    report.add(
        "warning.out_of_range_endpoints", dataset.load_report.get("out_of_range_endpoints", 0)
    )
    for epoch, loss in enumerate(train_report.epoch_losses, start=1):
        report.add(f"epoch_loss.{epoch}", f"{loss:.6f}")
    report.write(out_dir)
    print(f"wrote checkpoint to {checkpoint_path}")
    return 0


def _load_checkpoint_for(config: dict) -> scorer.ScorerParams:
    path = config["checkpoint"]
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found at {path}; run `temt train` first")
    params, _header = scorer.load_checkpoint(path)
    return params


def cmd_predict(config: dict) -> int:
    report = RunReport("predict", config)
    dataset = _load_dataset(config)
    params = _load_checkpoint_for(config)
    encoder = _make_encoder(config)
    if encoder.dim != params.text_dim:
        raise ConfigError(
            f"encoder dimension {encoder.dim} does not match checkpoint text_dim {params.text_dim}"
        )
    if config["time_dim"] != params.time_dim:
        raise ConfigError(
            f"time-dim {config['time_dim']} does not match checkpoint time_dim {params.time_dim}"
        )
    evaluable = data_mod.filter_evaluable(dataset.test)
    if not evaluable:
        raise DataError("test split has no closed-interval quadruples to predict")
    top_k = max(config["top_k"])
    out_dir = _prepare_out(config)
    path = os.path.join(out_dir, "predictions.tsv")
    with open(path, "w", encoding="utf-8") as handle:
        for fact_id, quad in enumerate(evaluable):
            dist = inference.year_distribution(
                quad, dataset, config["variant"], encoder, params
            )
            intervals = inference.greedy_coalesce(dist, top_k, config["theta"])
            for rank, predicted in enumerate(intervals, start=1):
                handle.write(
                    f"{fact_id}\t{rank}\t{predicted.start}\t{predicted.end}"
                    f"\t{predicted.cum_prob:.6f}\n"
                )
    report.add_checksums(config["data"])
    report.add("facts", len(evaluable))
    report.add("warning.out_of_range_endpoints", dataset.load_report.get("out_of_range_endpoints", 0))
    report.write(out_dir)
    print(f"wrote predictions for {len(evaluable)} facts to {path}")
    return 0


def _read_predictions(path: str, num_facts: int) -> list[list[inference.PredictedInterval]]:
    if not os.path.exists(path):
        raise DataError(f"prediction dump not found at {path}; run `temt predict` first")
    predictions: list[list[inference.PredictedInterval]] = [[] for _ in range(num_facts)]
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            fact_id, _rank, start, end, cum_prob = parts
            index = int(fact_id)
            if not 0 <= index < num_facts:
                raise DataError(f"{path}:{lineno}: fact id {index} out of range")
            predictions[index].append(
                inference.PredictedInterval(int(start), int(end), float(cum_prob))
            )
    return predictions


def cmd_evaluate(config: dict) -> int:
    report = RunReport("evaluate", config)
    dataset = _load_dataset(config)
    evaluable = data_mod.filter_evaluable(dataset.test)
    predictions = _read_predictions(config["predictions"], len(evaluable))
    gold = [(q.interval.start, q.interval.end) for q in evaluable]
    table = inference.evaluate(gold, predictions, config["top_k"])
    out_dir = _prepare_out(config)
    path = os.path.join(out_dir, "metrics.tsv")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("metric\tk\tvalue\n")
        for (metric, k), value in sorted(table.items()):
            handle.write(f"{metric}\t{k}\t{value:.6f}\n")
    rendered = inference.render_metric_table(table)
    print(rendered)
    report.add_checksums(config["data"])
    report.add("facts", len(evaluable))
    for (metric, k), value in sorted(table.items()):
        report.add(f"metric.{metric}@{k}", f"{value:.6f}")
    report.write(out_dir)
    return 0


def cmd_classify_triples(config: dict) -> int:
    report = RunReport("classify-triples", config)
    dataset = _load_dataset(config)
    classifier_config = inference.TripleClassifierConfig(
        hidden_units=config["hidden_units"],
        l2_alpha=config["alpha"],
        max_iterations=config["max_iterations"],
    )
    out_dir = _prepare_out(config)
    if config["emit_sentences"]:
        rng = np.random.default_rng(config["seed"])
        train_x, _, test_x, _ = inference.classification_examples(dataset, rng)
        sentences: dict[str, str] = {}
        for s, r, o in train_x + test_x:
            sentence = text.build_triple_sentence(s, r, o, dataset, config["variant"])
            sentences.setdefault(text.sentence_key(sentence.text), sentence.text)
        _write_sentence_file(config["emit_sentences"], sentences)
        report.add("sentences", len(sentences))
        report.write(out_dir)
        print(f"wrote {len(sentences)} classification sentences to {config['emit_sentences']}")
        return 0
    encoder = _make_encoder(config)
    accuracy = inference.triple_classification(
        dataset, encoder, classifier_config, config["seed"], variant=config["variant"]
    )
    report.add_checksums(config["data"])
    report.add("accuracy", f"{accuracy:.4f}")
    report.write(out_dir)
    print(f"triple classification accuracy: {accuracy:.4f}")
    return 0


_COMMANDS = {
    "preprocess": (cmd_preprocess, ["data", "out", "seed"]),
    "split-inductive": (
        cmd_split_inductive,
        ["data", "out", "seed", "valid_entities", "test_entities", "min_relation_edges"],
    ),
    "emit-sentences": (cmd_emit_sentences, ["data", "out", "seed", "variant"]),
    "train": (
        cmd_train,
        [
            "data", "out", "seed", "variant", "encoder", "embed_dim", "time_dim", "fusion_dim",
            "learning_rate", "epochs", "margin", "negatives", "negative_type",
            "beta1", "beta2", "epsilon", "batch_size",
        ],
    ),
    "predict": (
        cmd_predict,
        [
            "data", "out", "seed", "variant", "encoder", "embed_dim", "time_dim",
            "checkpoint", "theta", "top_k",
        ],
    ),
    "evaluate": (cmd_evaluate, ["data", "out", "seed", "predictions", "top_k"]),
    "classify-triples": (
        cmd_classify_triples,
        [
            "data", "out", "seed", "variant", "encoder", "embed_dim",
            "hidden_units", "alpha", "max_iterations", "emit_sentences",
        ],
    ),
}

_REQUIRED = {
    "preprocess": ["data", "out"],
    "split-inductive": ["data", "out", "valid_entities", "test_entities"],
    "emit-sentences": ["data", "out"],
    "train": ["data", "out"],
    "predict": ["data", "out", "checkpoint"],
    "evaluate": ["data", "out", "predictions"],
    "classify-triples": ["data", "out"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temt",
        description="Time interval prediction for text-enhanced temporal knowledge graphs",
    )
    parser.add_argument("--log-level", default="WARNING", help="python logging level name")
    subparsers = parser.add_subparsers(dest="command", required=True)
    flags = {
        "data": dict(help="dataset directory"),
        "out": dict(help="output directory"),
        "seed": dict(type=int, help="random seed"),
        "variant": dict(choices=list(text.VARIANTS), help="sentence variant"),
        "encoder": dict(help="text encoder spec: table:<path> or hash:<seed>"),
        "embed_dim": dict(type=int, help="triple embedding dimension (hash encoder)"),
        "time_dim": dict(type=int, help="time embedding dimension (even)"),
        "fusion_dim": dict(type=int, help="fusion layer width"),
        "learning_rate": dict(type=float),
        "epochs": dict(type=int),
        "margin": dict(type=float),
        "negatives": dict(type=int, help="negative samples per positive"),
        "negative_type": dict(choices=[scorer.NEGATIVE_TIME, scorer.NEGATIVE_ENTITY]),
        "beta1": dict(type=float),
        "beta2": dict(type=float),
        "epsilon": dict(type=float),
        "batch_size": dict(type=int),
        "theta": dict(type=float, help="greedy-coalescing probability threshold"),
        "top_k": dict(type=int, action="append", help="interval count (repeatable)"),
        "checkpoint": dict(help="trained checkpoint path"),
        "predictions": dict(help="prediction dump path"),
        "valid_entities": dict(type=int, help="entities to remove into valid"),
        "test_entities": dict(type=int, help="entities to remove into test"),
        "min_relation_edges": dict(type=int, help="minimum edges a relation must keep"),
        "hidden_units": dict(type=int),
        "alpha": dict(type=float, help="classifier L2 strength"),
        "max_iterations": dict(type=int),
        "emit_sentences": dict(help="write classification sentences to this path and exit"),
    }
    for command, (_fn, needed) in _COMMANDS.items():
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", help="flat key = value config file")
        for name in needed:
            sub.add_argument(f"--{name.replace('_', '-')}", dest=name, **flags[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    handler, needed = _COMMANDS[args.command]
    try:
        config = resolve_config(args, needed)
        _require(config, _REQUIRED[args.command], args.command)
        _validate_common(config)
        if not os.path.isdir(config["data"]):
            raise DataError(
                f"dataset directory not found: {config['data']} (run `temt preprocess` first)"
            )
        return handler(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except TemtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
