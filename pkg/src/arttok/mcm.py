"""Span masks for masked codec modeling and the two-term training loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError
from .rvq import TokenSequence


@dataclass(frozen=True)
class McmConfig:
    mask_ratio: float = 0.15
    span_length: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio must lie in [0, 1], got {self.mask_ratio}")
        if self.span_length < 1:
            raise ValueError(f"span_length must be >= 1, got {self.span_length}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass
class McmMask:
    flags: np.ndarray  # (L,) bool

    @property
    def masked_count(self) -> int:
        return int(np.count_nonzero(self.flags))

    @property
    def length(self) -> int:
        return self.flags.shape[0]

    @property
    def masked_fraction(self) -> float:
        return self.masked_count / self.length if self.length else 0.0

    def runs(self) -> list[tuple[int, int]]:
        """Maximal runs of masked positions as half-open ``(start, stop)``."""
        padded = np.concatenate([[False], self.flags, [False]]).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


@dataclass(frozen=True)
class LossWeights:
    mcm_weight: float = 0.7

    def __post_init__(self):
        if not self.mcm_weight >= 0:
            raise ValueError(f"mcm_weight must be >= 0, got {self.mcm_weight}")


def generate_mask(length: int, cfg: McmConfig) -> McmMask:
    """Mask whole spans until at least ``cfg.mask_ratio`` of positions are covered.

    Span starts are drawn uniformly without replacement from ``0..length-1``;
    spans are clipped at the end of the sequence and overlapping spans merge.
    The last span may overshoot the target by fewer than ``span_length``
    positions.
    """
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    flags = np.zeros(length, dtype=bool)
    if length == 0:
        return McmMask(flags)

    rng = np.random.default_rng(cfg.seed)
    count = 0
    for start in rng.permutation(length):
        if count / length >= cfg.mask_ratio:
            break
        stop = min(int(start) + cfg.span_length, length)
        count += int(np.count_nonzero(~flags[start:stop]))
        flags[start:stop] = True
    return McmMask(flags)


def apply_mask(tokens: TokenSequence, mask: McmMask, mask_token_id: int | None = None) -> TokenSequence:
    """Replace every layer's code at masked time steps with the mask token.

    The mask token is the reserved index ``K`` of each layer table. When at
    least one step is masked the returned grid's alphabet grows to ``K + 1``;
    an empty mask returns the grid unchanged.
    """
    k = tokens.codebook_size
    if mask_token_id is None:
        mask_token_id = k
    if mask_token_id != k:
        raise ValueError(f"mask token must be the reserved index {k}, got {mask_token_id}")
    if mask.length != tokens.length:
        raise ShapeError(f"mask covers {mask.length} steps but token grid has {tokens.length}")
    if mask.masked_count == 0:
        return TokenSequence(tokens.codes.copy(), k)
    codes = tokens.codes.copy()
    codes[:, mask.flags] = mask_token_id
    return TokenSequence(codes, k + 1)


def combine_losses(caption_loss: float, mcm_loss: float, w: LossWeights = LossWeights()) -> float:
    """Total loss ``caption_loss + w.mcm_weight * mcm_loss``."""
    if not (math.isfinite(caption_loss) and math.isfinite(mcm_loss)):
        raise NumericError(f"losses must be finite, got caption={caption_loss}, mcm={mcm_loss}")
    return caption_loss + w.mcm_weight * mcm_loss
