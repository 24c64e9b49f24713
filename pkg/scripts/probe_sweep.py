"""Multi-seed layer-count sweep of the synthetic class-preservation probe.

    python scripts/probe_sweep.py --seeds 5 --layer-counts 1,2,4,8,16,32
"""

import argparse

import numpy as np

from arttok.kmeans import KmeansConfig
from arttok.probe import SyntheticSpec, run_probe


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--layer-counts", default="1,2,4,8,16")
    parser.add_argument("--codebook-size", type=int, default=64)
    parser.add_argument("--class-spread", type=float, default=1.0)
    parser.add_argument("--center-spread", type=float, default=0.5)
    args = parser.parse_args()
    layer_counts = [int(n) for n in args.layer_counts.split(",")]

    accs, ratios, raws = [], [], []
    for seed in range(args.seeds):
        spec = SyntheticSpec(class_spread=args.class_spread, center_spread=args.center_spread, seed=seed)
        report = run_probe(spec, layer_counts, args.codebook_size,
                           KmeansConfig(k=args.codebook_size, seed=seed))
        accs.append(report.quantized_accuracy)
        ratios.append(report.residual_energy_ratio)
        raws.append(report.raw_accuracy)

    accs, ratios = np.array(accs), np.array(ratios)
    print(f"raw accuracy (median over {args.seeds} seeds): {np.median(raws):.4f}")
    print(f"{'N':>4} {'bits':>7} {'acc_median':>10} {'acc_min':>8} {'acc_max':>8} {'energy_ratio':>12}")
    for i, n in enumerate(layer_counts):
        bits = n * np.log2(args.codebook_size)
        print(f"{n:>4} {bits:>7.1f} {np.median(accs[:, i]):>10.4f} {accs[:, i].min():>8.4f} "
              f"{accs[:, i].max():>8.4f} {np.median(ratios[:, i]):>12.4f}")


if __name__ == "__main__":
    main()
