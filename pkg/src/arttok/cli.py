"""Command-line front end: ``arttok <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 unreadable or malformed file, 4 dimension
or shape mismatch, 5 unusable data (too few points, non-finite values).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import persistence as store
from .assembly import (
    DEFAULT_CLAP_DIM,
    DEFAULT_HIDDEN,
    DEFAULT_MAX_LEN,
    assemble,
    make_projection,
    make_tables,
)
from .errors import (
    DimensionError,
    EmptyInputError,
    FormatError,
    InsufficientPointsError,
    InvalidTokenError,
    LengthError,
    NumericError,
    ShapeError,
)
from .kmeans import KmeansConfig
from .mcm import McmConfig, apply_mask, generate_mask
from .probe import DEFAULT_LAYER_COUNTS, SyntheticSpec, run_probe
from .rvq import compute_stats, decode, encode, train_rvq

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DIMENSION = 4
EXIT_DATA = 5


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _ratio(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"ratio must lie in [0, 1], got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _write_text(text: str, path) -> None:
    store.atomic_write_bytes(path, text.encode("utf-8"))


def cmd_train(args) -> int:
    features = store.read_features(args.features)
    if features.shape[0] < args.codebook_size:
        raise InsufficientPointsError(features.shape[0], args.codebook_size)
    kcfg = KmeansConfig(k=args.codebook_size, max_iters=args.max_iters, rel_tol=args.tol, seed=args.seed)
    stack = train_rvq(features, args.layers, kcfg)
    store.write_codebook_stack(stack, args.out)

    stats = compute_stats(features, stack)
    print(f"{'layer':>5}  {'iters':>5}  {'kmeans_objective':>18}  {'residual_energy':>18}")
    for n, report in enumerate(stack.reports):
        print(f"{n:>5}  {report.iterations_run:>5}  {report.objective_history[-1]:>18.6f}"
              f"  {stats.per_layer_residual_energy[n + 1]:>18.6f}")
    print(f"wrote {args.out}: num_layers={stack.num_layers} codebook_size={stack.codebook_size} dim={stack.dim}")
    return EXIT_OK


def cmd_encode(args) -> int:
    features = store.read_features(args.features)
    stack = store.read_codebook_stack(args.codebooks)
    tokens = encode(features, stack)
    store.write_tokens(tokens, args.out)
    print(f"wrote {args.out}: num_layers={tokens.num_layers} length={tokens.length} "
          f"codebook_size={tokens.codebook_size}")
    return EXIT_OK


def cmd_decode(args) -> int:
    tokens = store.read_tokens(args.tokens)
    stack = store.read_codebook_stack(args.codebooks)
    recon = decode(tokens, stack)
    store.write_features(recon, args.out)
    print(f"wrote {args.out}: length={recon.shape[0]} dim={recon.shape[1]}")
    if args.reference:
        ref = np.asarray(store.read_features(args.reference), dtype=np.float64)
        if ref.shape != recon.shape:
            raise ShapeError(f"reference shape {ref.shape} does not match reconstruction {recon.shape}")
        err = np.sum((ref - recon) ** 2, axis=1)
        print("[machine]")
        print(f"max_vector_error={float(np.sqrt(err.max())):.9g}")
        print(f"residual_energy={float(err.sum())!r}")
    return EXIT_OK


def cmd_stats(args) -> int:
    features = store.read_features(args.features)
    stack = store.read_codebook_stack(args.codebooks)
    text = store.format_stats(compute_stats(features, stack))
    if args.out:
        _write_text(text, args.out)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_mask(args) -> int:
    tokens = store.read_tokens(args.tokens)
    mask = generate_mask(tokens.length, McmConfig(mask_ratio=args.ratio, span_length=args.span, seed=args.seed))
    masked = apply_mask(tokens, mask)
    store.write_tokens(masked, args.out)
    print(f"wrote {args.out}: masked_count={mask.masked_count} length={tokens.length} "
          f"mask_token_id={tokens.codebook_size}")
    return EXIT_OK


def cmd_assemble(args) -> int:
    tokens = store.read_tokens(args.tokens)
    proj = None
    if args.tables:
        tables, proj = store.read_embedding_tables(args.tables)
    else:
        k = args.codebook_size or tokens.codebook_size
        tables = make_tables(tokens.num_layers, k, args.hidden, args.max_len, args.seed)
        proj = make_projection(args.clap_dim, tables.hidden, args.seed)
        # use the float32 values a saved ARTE file holds, so reloading it reproduces this run
        blob = store.embeddings_to_bytes(tables, proj)
        tables, proj = store.embeddings_from_bytes(blob)
        if args.save_tables:
            store.atomic_write_bytes(args.save_tables, blob)
    if proj is None:
        proj = make_projection(args.clap_dim, tables.hidden, args.seed)

    if args.clap:
        clap = store.read_features(args.clap)
        if clap.shape[0] != 1:
            raise ShapeError(f"CLAP embedding file must hold exactly one vector, got {clap.shape[0]}")
        clap = clap[0]
    else:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0xA0D10]))
        clap = rng.normal(size=proj.in_dim)

    out = assemble(tokens, clap, tables, proj)
    store.write_features(out.matrix, args.out)
    rows, hidden = out.matrix.shape
    print(f"wrote {args.out}: shape={rows}x{hidden} (L={tokens.length})")
    return EXIT_OK


def cmd_probe(args) -> int:
    spec = SyntheticSpec(
        num_classes=args.classes,
        vectors_per_class=args.per_class,
        dim=args.dim,
        class_spread=args.class_spread,
        center_spread=args.center_spread,
        seed=args.seed,
    )
    kcfg = KmeansConfig(k=args.codebook_size, max_iters=args.max_iters, rel_tol=args.tol, seed=args.seed)
    report = run_probe(spec, args.layer_counts, args.codebook_size, kcfg)
    text = store.format_probe_report(report)
    if args.out:
        _write_text(text, args.out)
    if args.json:
        _write_text(store.probe_report_to_json(report), args.json)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arttok", description="Residual-VQ audio representation tokenizer.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def kmeans_flags(p, k_default):
        p.add_argument("--codebook-size", type=_positive_int, default=k_default, help="centroids per layer (K)")
        p.add_argument("--max-iters", type=_positive_int, default=100)
        p.add_argument("--tol", type=_nonneg_float, default=1e-6, help="relative objective-change threshold")
        p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("train", help="train an RVQ codebook stack on ARTF features")
    p.add_argument("--features", required=True)
    p.add_argument("--layers", type=_positive_int, default=16)
    kmeans_flags(p, 1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="tokenize ARTF features with an ARTC stack")
    p.add_argument("--features", required=True)
    p.add_argument("--codebooks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct ARTF features from ARTT tokens")
    p.add_argument("--tokens", required=True)
    p.add_argument("--codebooks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", help="original ARTF features; reports reconstruction error")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stats", help="residual energies, bitrate and codebook utilization")
    p.add_argument("--features", required=True)
    p.add_argument("--codebooks", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("mask", help="apply a span mask to an ARTT token grid")
    p.add_argument("--tokens", required=True)
    p.add_argument("--ratio", type=_ratio, default=0.15)
    p.add_argument("--span", type=_positive_int, default=10)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("assemble", help="build the (L+3) x D_b language-model input matrix")
    p.add_argument("--tokens", required=True)
    p.add_argument("--tables", help="ARTE embedding tables (generated from --seed when omitted)")
    p.add_argument("--save-tables", help="write the generated tables as ARTE")
    p.add_argument("--clap", help="ARTF file holding one CLAP audio embedding")
    p.add_argument("--codebook-size", type=_positive_int, help="codes per layer table (default: token alphabet)")
    p.add_argument("--hidden", type=_positive_int, default=DEFAULT_HIDDEN)
    p.add_argument("--max-len", type=_positive_int, default=DEFAULT_MAX_LEN)
    p.add_argument("--clap-dim", type=_positive_int, default=DEFAULT_CLAP_DIM)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("probe", help="synthetic class-preservation probe across layer counts")
    p.add_argument("--layer-counts", type=_int_list, default=list(DEFAULT_LAYER_COUNTS))
    kmeans_flags(p, 64)
    p.add_argument("--classes", type=_positive_int, default=10)
    p.add_argument("--per-class", type=_positive_int, default=200)
    p.add_argument("--dim", type=_positive_int, default=32)
    p.add_argument("--class-spread", type=_nonneg_float, default=1.0)
    p.add_argument("--center-spread", type=_positive_float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, InvalidTokenError, OSError) as exc:
        return _fail(args, exc, EXIT_FORMAT)
    except (DimensionError, ShapeError, LengthError) as exc:
        return _fail(args, exc, EXIT_DIMENSION)
    except (InsufficientPointsError, EmptyInputError, NumericError, ValueError) as exc:
        return _fail(args, exc, EXIT_DATA)


def _fail(args, exc: Exception, code: int) -> int:
    print(f"arttok {args.command}: error: {exc}", file=sys.stderr)
    return code
