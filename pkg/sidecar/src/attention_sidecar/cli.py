"""Command line for attention and embedding export.

Reads sentences one per line, writes the attention interchange JSON
and/or a word-vector file plus its coverage report.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import (
    GenerationError,
    ModelLoadError,
    SourceUnavailableError,
    export_attention,
    export_embeddings,
)


def _read_lines(path: str) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attention-sidecar",
        description=(
            "Translate sentences with a pretrained model and export "
            "word-level cross-attention and word vectors."
        ),
    )
    parser.add_argument("--sentences", help="input file, one sentence per line")
    parser.add_argument("--out", help="attention interchange JSON output path")
    parser.add_argument("--embeddings-out", help="word-vector output path")
    parser.add_argument(
        "--vocabulary",
        help="word list for embedding export, one per line "
        "(default: words of the sentence file)",
    )
    parser.add_argument("--model-id", help="pretrained translation model identifier")
    parser.add_argument(
        "--layer", type=int, default=-1,
        help="decoder layer to read cross-attention from (default: last)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not args.out and not args.embeddings_out:
        print("error: nothing to do; pass --out and/or --embeddings-out", file=sys.stderr)
        return 2
    try:
        sentences: list[str] = []
        if args.sentences:
            sentences = _read_lines(args.sentences)
        if args.out:
            if args.sentences is None:
                print("error: --out requires --sentences", file=sys.stderr)
                return 2
            if sentences and not args.model_id:
                print("error: translating sentences requires --model-id", file=sys.stderr)
                return 2
            data = export_attention(
                sentences, args.model_id or "", args.out, layer_index=args.layer
            )
            print(f"wrote {args.out} ({len(data['sentences'])} sentences)")
        if args.embeddings_out:
            if args.vocabulary:
                vocabulary = _read_lines(args.vocabulary)
            elif sentences:
                vocabulary = [w for line in sentences for w in line.split()]
            else:
                print(
                    "error: --embeddings-out requires --vocabulary or --sentences",
                    file=sys.stderr,
                )
                return 2
            report = export_embeddings(
                vocabulary, args.embeddings_out, model_id=args.model_id
            )
            print(
                f"wrote {args.embeddings_out} "
                f"({len(report['covered'])} words, {len(report['oov'])} OOV)"
            )
    except (ModelLoadError, GenerationError, SourceUnavailableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
