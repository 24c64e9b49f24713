"""Residual vector quantization over k-means codebooks.

Training is greedy: layer 0 is fit on the raw features, layer ``n`` on what is
left after layers ``0..n-1`` have quantized the training set. Encoding follows
the same chain for each time step independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidTokenError, ShapeError
from .kmeans import KmeansConfig, KmeansReport, as_points, nearest, train_kmeans


@dataclass
class CodebookStack:
    """``codebooks`` has shape ``(num_layers, codebook_size, dim)``."""

    codebooks: np.ndarray
    reports: list[KmeansReport] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        cb = np.asarray(self.codebooks)
        if cb.ndim != 3 or 0 in cb.shape:
            raise ShapeError(f"codebook stack must have shape (N, K, D) with N, K, D >= 1, got {cb.shape}")
        if not np.all(np.isfinite(cb)):
            raise ValueError("codebook stack contains NaN or Inf")
        self.codebooks = cb

    @property
    def num_layers(self) -> int:
        return self.codebooks.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.codebooks.shape[1]

    @property
    def dim(self) -> int:
        return self.codebooks.shape[2]

    @property
    def layers(self) -> list[np.ndarray]:
        return list(self.codebooks)

    def truncate(self, num_layers: int) -> "CodebookStack":
        """The stack made of the first ``num_layers`` layers."""
        if not 1 <= num_layers <= self.num_layers:
            raise ShapeError(f"cannot keep {num_layers} of {self.num_layers} layers")
        reports = self.reports[:num_layers] if self.reports is not None else None
        return CodebookStack(self.codebooks[:num_layers], reports=reports)

    def __eq__(self, other):
        if not isinstance(other, CodebookStack):
            return NotImplemented
        return (self.codebooks.shape == other.codebooks.shape
                and bool(np.array_equal(self.codebooks, other.codebooks)))


@dataclass
class TokenSequence:
    """An ``(num_layers, length)`` grid of codes over an alphabet of
    ``codebook_size`` symbols."""

    codes: np.ndarray
    codebook_size: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.shape[0] == 0:
            raise ShapeError(f"token grid must have shape (N, L) with N >= 1, got {codes.shape}")
        if codes.size and not np.issubdtype(codes.dtype, np.integer):
            raise ShapeError(f"token codes must be integers, got dtype {codes.dtype}")
        self.codes = codes.astype(np.int64, copy=False)
        if self.codebook_size < 1:
            raise ShapeError(f"codebook_size must be >= 1, got {self.codebook_size}")
        check_codes(self.codes, self.codebook_size)

    @property
    def num_layers(self) -> int:
        return self.codes.shape[0]

    @property
    def length(self) -> int:
        return self.codes.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return (self.codebook_size == other.codebook_size
                and self.codes.shape == other.codes.shape
                and bool(np.array_equal(self.codes, other.codes)))


def check_codes(codes: np.ndarray, alphabet: int) -> None:
    """Raise :class:`InvalidTokenError` at the first (layer, position), in
    layer-major order, whose code is outside ``[0, alphabet)``."""
    bad = (codes < 0) | (codes >= alphabet)
    if bad.any():
        layer, pos = np.argwhere(bad)[0]
        raise InvalidTokenError(int(layer), int(pos), int(codes[layer, pos]), alphabet)


@dataclass
class QuantizationStats:
    per_layer_residual_energy: list[float]
    bits_per_vector: float
    codebook_utilization: list[float]

    @property
    def residual_energy_ratio(self) -> float:
        """Energy left after the last layer relative to the input energy."""
        e0 = self.per_layer_residual_energy[0]
        return self.per_layer_residual_energy[-1] / e0 if e0 > 0 else 0.0


@dataclass
class Standardizer:
    """Per-dimension standardization, offered as an optional preprocessing
    step. Tokenization itself always operates on raw features."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features) -> "Standardizer":
        x = as_points(features, "features")
        std = x.std(axis=0)
        return cls(mean=x.mean(axis=0), scale=np.where(std > 0, std, 1.0))

    def apply(self, features) -> np.ndarray:
        return (as_points(features, "features") - self.mean) / self.scale

    def invert(self, features) -> np.ndarray:
        return as_points(features, "features") * self.scale + self.mean


def layer_seed(seed: int, layer: int) -> int:
    """Seed for the k-means run of ``layer``, mixed from the base seed."""
    state = np.random.SeedSequence([seed, layer]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def bits_per_vector(num_layers: int, codebook_size: int) -> float:
    return num_layers * math.log2(codebook_size)


def _stack_dims(x: np.ndarray, stack: CodebookStack, what: str) -> None:
    if x.shape[1] != stack.dim:
        raise DimensionError(what, stack.dim, x.shape[1])


def train_rvq(features, num_layers: int, kcfg: KmeansConfig) -> CodebookStack:
    """Fit ``num_layers`` codebooks greedily on successive residuals.

    Layer ``n`` uses ``kcfg`` with its seed replaced by ``layer_seed(kcfg.seed, n)``,
    so a stack trained with fewer layers is a prefix of a deeper one.
    Per-layer k-means reports are kept on ``stack.reports``.
    """
    x = as_points(features, "features")
    if num_layers < 1:
        raise ValueError(f"num_layers must be >= 1, got {num_layers}")

    residual = x.copy()
    layers, reports = [], []
    for n in range(num_layers):
        cfg = KmeansConfig(k=kcfg.k, max_iters=kcfg.max_iters, rel_tol=kcfg.rel_tol,
                           seed=layer_seed(kcfg.seed, n))
        codebook, report = train_kmeans(residual, cfg)
        idx, _ = nearest(residual, codebook)
        residual = residual - codebook[idx]
        layers.append(codebook)
        reports.append(report)
    return CodebookStack(np.stack(layers), reports=reports)


def _chain(x: np.ndarray, stack: CodebookStack) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Run the residual chain on ``(L, D)`` inputs.

    Returns codes ``(N, L)``, final residuals ``(L, D)`` and the N+1 residual
    energies (input energy first).
    """
    residual = x.copy()
    codes = np.empty((stack.num_layers, x.shape[0]), dtype=np.int64)
    energies = [float(np.sum(residual * residual))]
    for n, codebook in enumerate(stack.codebooks):
        cb = np.asarray(codebook, dtype=np.float64)
        idx, _ = nearest(residual, cb)
        codes[n] = idx
        residual = residual - cb[idx]
        energies.append(float(np.sum(residual * residual)))
    return codes, residual, energies


def quantize_vector(v, stack: CodebookStack) -> tuple[list[int], np.ndarray]:
    """Quantize one vector through every layer; returns ``(codes, final_residual)``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a single vector, got shape {v.shape}")
    x = as_points(v[None, :], "vector")
    _stack_dims(x, stack, "vector vs codebook stack")
    codes, residual, _ = _chain(x, stack)
    return [int(c) for c in codes[:, 0]], residual[0]


def encode(seq, stack: CodebookStack) -> TokenSequence:
    """Tokenize an ``(L, D)`` feature sequence into an ``(N, L)`` grid."""
    x = as_points(seq, "feature sequence")
    _stack_dims(x, stack, "feature sequence vs codebook stack")
    codes, _, _ = _chain(x, stack)
    return TokenSequence(codes, stack.codebook_size)


def residuals(seq, stack: CodebookStack) -> np.ndarray:
    """Final residual of every time step after all layers."""
    x = as_points(seq, "feature sequence")
    _stack_dims(x, stack, "feature sequence vs codebook stack")
    return _chain(x, stack)[1]


def decode(tokens: TokenSequence, stack: CodebookStack, num_layers: int | None = None) -> np.ndarray:
    """Reconstruct features as the sum of the selected codewords per step.

    With ``num_layers`` set, only the first that many layers contribute.
    """
    if tokens.num_layers != stack.num_layers:
        raise ShapeError(
            f"token grid has {tokens.num_layers} layers but codebook stack has {stack.num_layers}"
        )
    check_codes(tokens.codes, stack.codebook_size)
    use = stack.num_layers if num_layers is None else num_layers
    if not 0 <= use <= stack.num_layers:
        raise ShapeError(f"cannot decode {use} of {stack.num_layers} layers")
    out = np.zeros((tokens.length, stack.dim), dtype=np.float64)
    for n in range(use):
        out += np.asarray(stack.codebooks[n], dtype=np.float64)[tokens.codes[n]]
    return out


def compute_stats(features, stack: CodebookStack) -> QuantizationStats:
    x = as_points(features, "features")
    _stack_dims(x, stack, "features vs codebook stack")
    codes, _, energies = _chain(x, stack)
    k = stack.codebook_size
    utilization = [np.unique(row).size / k for row in codes]
    return QuantizationStats(
        per_layer_residual_energy=energies,
        bits_per_vector=bits_per_vector(stack.num_layers, k),
        codebook_utilization=utilization,
    )
