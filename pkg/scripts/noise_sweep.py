"""Sweep bridge noise and watch alignment precision and retrieval decay.

Each sigma gets its own world (same seed otherwise), so the curve isolates
how much signal survives in the bridge space.

    python3 scripts/noise_sweep.py --sigmas 0,0.05,0.1,0.2,0.3,0.6
"""

import argparse

from sembridge.retrieval import build_index, ndcg_at_k, search
from sembridge.synthbench import (
    SyntheticLanguageSpec,
    alignment_precision_at_k,
    encode_docs,
    encode_queries,
    generate_world,
)
from sembridge.transplant import TransplantConfig, transplant
from sembridge.vocab import EMPTY_POLICY, compute_overlap


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sigmas", default="0,0.05,0.1,0.2,0.3,0.6")
    parser.add_argument("--alpha", type=float, default=4.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--k", type=int, default=10)
    args = parser.parse_args()

    header = f"{'sigma':>6} {'prec@1':>8} {'nDCG@' + str(args.k):>9}"
    print(header)
    print("-" * len(header))
    for text in args.sigmas.split(","):
        sigma = float(text)
        world = generate_world(
            SyntheticLanguageSpec(noise_sigma=sigma, seed=args.seed)
        )
        overlap = compute_overlap(world.source_vocab, world.target_vocab, EMPTY_POLICY)
        matrix, report = transplant(
            world.source_emb,
            world.source_vocab,
            world.target_vocab,
            overlap,
            bridge_src=world.bridge_src,
            bridge_tgt=world.bridge_tgt,
            cfg=TransplantConfig(strategy="sembridge", alpha=args.alpha, seed=args.seed),
        )
        index = build_index(encode_docs(world))
        run = {q.id: search(index, q, k=args.k) for q in encode_queries(world, matrix)}
        result = ndcg_at_k(run, world.qrels, k=args.k)
        prec = alignment_precision_at_k(report, world.alignment, k=1)
        print(f"{sigma:>6.2f} {prec:>8.4f} {result.mean_ndcg:>9.4f}")


if __name__ == "__main__":
    main()
