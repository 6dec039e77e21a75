"""Command-line wrapper: temt-extract --input sentences.tsv --output table.tsv"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import DEFAULT_MODEL, ExtractError, ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temt-extract",
        description="Encode keyed sentences with a sentence-embedding model "
        "and write an embedding-table file",
    )
    parser.add_argument("--input", required=True, help="sentence file (key<TAB>sentence)")
    parser.add_argument("--output", required=True,
                        help="table path; .bin extension selects the binary format")
    parser.add_argument("--model", default=DEFAULT_MODEL, help="sentence-embedding model name")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--log-level", default="INFO")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    job = ExtractionJob(
        input_path=args.input,
        output_path=args.output,
        model_name=args.model,
        batch_size=args.batch_size,
    )
    try:
        count = extract(job)
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} embeddings to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
