"""Command-line surface for the exporter.

One subcommand: ``export`` embeds a vocabulary and writes matrix +
manifest. Exit codes: 0 success, 2 vocabulary/usage problems, 3 model load
or runtime failures. Failures print one machine-parsable stderr line.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .export import export_vocab_embeddings
from .formats import VocabError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge-exporter",
        description="Export bridge embeddings for vocabulary transplantation.",
    )
    parser.add_argument(
        "--version", action="version", version=f"bridge-exporter {__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    e = subs.add_parser("export", help="embed every token of one vocabulary")
    e.add_argument("--vocab", required=True, help="vocabulary JSONL path")
    e.add_argument("--model", required=True, help="model identifier or local path")
    e.add_argument("--out", required=True, help="output EMBM matrix path")
    e.add_argument("--manifest", required=True, help="output manifest JSON path")
    e.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export_vocab_embeddings(
            args.vocab, args.model, args.out, args.manifest, batch_size=args.batch_size
        )
    except (VocabError, ValueError, OSError) as exc:
        reason = " ".join(str(exc).split())
        print(f"bridge-exporter: error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 2
    except Exception as exc:  # model loading and inference failures
        if os.environ.get("BRIDGE_EXPORTER_DEBUG"):
            raise
        reason = " ".join(str(exc).split())
        print(f"bridge-exporter: error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 3
    print(
        f"wrote {args.out}: {manifest.rows} x {manifest.dim}"
        f" ({manifest.unencodable_count} unencodable)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
