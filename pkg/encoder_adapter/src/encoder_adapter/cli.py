"""Command-line interface for the encoder adapter."""

from __future__ import annotations

import argparse
import sys

from .encoder import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_SEQUENCE_LENGTH,
    DEFAULT_MODEL,
    AdapterError,
    EncoderSpec,
    embed_file,
    local_revision,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encoder-adapter",
        description="Produce EMB1 embedding files from a pinned text encoder.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="encode a line-delimited {id, kind, text} file")
    p.add_argument("--texts", required=True)
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--revision", required=True, help="content digest or 40-hex commit")
    p.add_argument("--max-length", type=int, default=DEFAULT_MAX_SEQUENCE_LENGTH)
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    p.add_argument("--out", required=True, help="EMB1 output path")
    p.add_argument("--sidecar", default=None, help="sidecar report path (default: <out>.json)")

    p = sub.add_parser("pin", help="print the content digest of a local model directory")
    p.add_argument("--model", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "pin":
            print(local_revision(args.model))
            return 0
        if args.command == "embed":
            spec = EncoderSpec(
                model=args.model,
                revision=args.revision,
                max_sequence_length=args.max_length,
                batch_size=args.batch_size,
            )
            sidecar = args.sidecar if args.sidecar is not None else args.out + ".json"
            report = embed_file(args.texts, spec, args.out, sidecar)
            print(
                f"embed: {report['count']} records, dim {report['dim']}, "
                f"{len(report['truncated_ids'])} truncated -> {args.out}"
            )
            return 0
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
