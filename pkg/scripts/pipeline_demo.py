"""End-to-end run on synthetic features: train codebooks, tokenize, mask,
and assemble the language-model input matrix. Artifacts land in --workdir.

    python scripts/pipeline_demo.py --workdir /tmp/arttok-demo
"""

import argparse
from pathlib import Path

import numpy as np

from arttok import persistence as store
from arttok.assembly import assemble, make_projection, make_tables
from arttok.kmeans import KmeansConfig
from arttok.mcm import McmConfig, apply_mask, combine_losses, generate_mask
from arttok.rvq import compute_stats, decode, encode, train_rvq


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=Path("demo_out"))
    parser.add_argument("--frames", type=int, default=2000, help="training feature vectors")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--layers", type=int, default=8)
    parser.add_argument("--codebook-size", type=int, default=128)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    args.workdir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    # low-rank structure plus noise, loosely like pooled encoder features
    basis = rng.normal(size=(8, args.dim))
    feats = rng.normal(size=(args.frames, 8)) @ basis + 0.3 * rng.normal(size=(args.frames, args.dim))
    store.write_features(feats, args.workdir / "train.artf")

    stack = train_rvq(feats, args.layers, KmeansConfig(k=args.codebook_size, max_iters=50, seed=args.seed))
    store.write_codebook_stack(stack, args.workdir / "codebooks.artc")
    stats = compute_stats(feats, stack)
    print("residual energy per stage:", " ".join(f"{e:.1f}" for e in stats.per_layer_residual_energy))
    print("utilization per layer:", " ".join(f"{u:.2f}" for u in stats.codebook_utilization))
    print(f"bits per vector: {stats.bits_per_vector:.0f}")

    clip = feats[:250]
    tokens = encode(clip, stack)
    store.write_tokens(tokens, args.workdir / "clip.artt")
    err = np.linalg.norm(decode(tokens, stack) - clip) / np.linalg.norm(clip)
    print(f"clip tokens: {tokens.num_layers}x{tokens.length}, relative reconstruction error {err:.4f}")

    mask = generate_mask(tokens.length, McmConfig(seed=args.seed))
    masked = apply_mask(tokens, mask)
    store.write_tokens(masked, args.workdir / "clip_masked.artt")
    print(f"masked {mask.masked_count}/{tokens.length} steps in {len(mask.runs())} runs")

    tables = make_tables(tokens.num_layers, tokens.codebook_size, hidden=768, max_len=1024, seed=args.seed)
    proj = make_projection(512, 768, seed=args.seed)
    out = assemble(masked, rng.normal(size=512), tables, proj)
    store.write_features(out.matrix, args.workdir / "lm_input.artf")
    print(f"assembled input: {out.matrix.shape[0]}x{out.matrix.shape[1]}")
    print(f"example total loss for (caption=2.1, mcm=3.4): {combine_losses(2.1, 3.4):.3f}")


if __name__ == "__main__":
    main()
