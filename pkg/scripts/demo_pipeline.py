"""End-to-end walkthrough on disk: generate a world, transplant, bench, inspect.

Everything goes through the CLI entry point, so the artifacts in --workdir
are exactly what the command line produces.

    python3 scripts/demo_pipeline.py --workdir /tmp/sembridge_demo
"""

import argparse
import sys
from pathlib import Path

from sembridge.cli import main as cli


def run(argv: list) -> None:
    argv = [str(a) for a in argv]
    print(f"$ sembridge {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        sys.exit(code)
    print()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    work = Path(args.workdir)
    world = work / "world"
    run([
        "gen-world",
        "--n-source", 600, "--n-target", 150,
        "--docs", 200, "--queries", 50,
        "--seed", args.seed, "--out", world,
    ])
    run([
        "transplant",
        "--source-emb", world / "source_emb.embm",
        "--source-vocab", world / "source_vocab.jsonl",
        "--target-vocab", world / "target_vocab.jsonl",
        "--bridge-src", world / "bridge_source.embm",
        "--bridge-tgt", world / "bridge_target.embm",
        "--seed", args.seed,
        "--out", work / "target_emb.embm",
        "--report", work / "report.json",
    ])
    run([
        "inspect",
        "--report", work / "report.json",
        "--source-vocab", world / "source_vocab.jsonl",
        "--target-vocab", world / "target_vocab.jsonl",
        "--token", "tgt100",
    ])
    run([
        "bench", "--world", world, "--seed", args.seed,
        "--strategies", "sembridge:4,sembridge:1,multivariate,mean,random",
        "--out", work / "bench.json",
    ])
    print(f"artifacts in {work}")


if __name__ == "__main__":
    main()
