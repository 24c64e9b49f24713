"""Language-model input assembly from multi-layer tokens and a CLAP embedding.

The assembled matrix has ``L + 3`` rows::

    [e_clap, e_bos + p_0, e_tok_0 + p_1, ..., e_tok_{L-1} + p_L, e_eos + p_{L+1}]

Token rows are the sum of one embedding lookup per layer. No parameter here
is trained: all tables are seeded uniform draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LengthError, ShapeError
from .rvq import TokenSequence, check_codes

# Reserved rows appended to each layer table; row ``K`` is the mask token.
NUM_SPECIAL = 1
DEFAULT_HIDDEN = 768
DEFAULT_MAX_LEN = 1024
DEFAULT_CLAP_DIM = 512


@dataclass
class EmbeddingTableSet:
    per_layer_tables: np.ndarray  # (N, K + NUM_SPECIAL, D_b)
    bos_embedding: np.ndarray  # (D_b,)
    eos_embedding: np.ndarray  # (D_b,)
    positional_table: np.ndarray  # (max_len, D_b)

    def __post_init__(self):
        t = np.asarray(self.per_layer_tables)
        if t.ndim != 3 or 0 in t.shape:
            raise ShapeError(f"per-layer tables must have shape (N, rows, D_b), got {t.shape}")
        hidden = t.shape[2]
        for name in ("bos_embedding", "eos_embedding"):
            vec = np.asarray(getattr(self, name))
            if vec.shape != (hidden,):
                raise ShapeError(f"{name} must have shape ({hidden},), got {vec.shape}")
        pos = np.asarray(self.positional_table)
        if pos.ndim != 2 or pos.shape[1] != hidden:
            raise ShapeError(f"positional table must have shape (max_len, {hidden}), got {pos.shape}")
        self.per_layer_tables = t

    @property
    def num_layers(self) -> int:
        return self.per_layer_tables.shape[0]

    @property
    def num_rows(self) -> int:
        return self.per_layer_tables.shape[1]

    @property
    def codebook_size(self) -> int:
        return self.num_rows - NUM_SPECIAL

    @property
    def mask_token_id(self) -> int:
        return self.codebook_size

    @property
    def hidden(self) -> int:
        return self.per_layer_tables.shape[2]

    @property
    def max_len(self) -> int:
        return np.asarray(self.positional_table).shape[0]


@dataclass
class ClapProjection:
    weight: np.ndarray  # (D_clap, D_b)
    bias: np.ndarray  # (D_b,)

    def __post_init__(self):
        w = np.asarray(self.weight)
        b = np.asarray(self.bias)
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ShapeError(f"inconsistent projection shapes: weight {w.shape}, bias {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("projection contains NaN or Inf")

    @property
    def in_dim(self) -> int:
        return np.asarray(self.weight).shape[0]

    @property
    def out_dim(self) -> int:
        return np.asarray(self.weight).shape[1]


@dataclass
class AssembledInput:
    matrix: np.ndarray  # (L + 3, D_b)

    @property
    def length(self) -> int:
        """Token count ``L``."""
        return self.matrix.shape[0] - 3

    @property
    def clap_row(self) -> np.ndarray:
        return self.matrix[0]


def _uniform(rng: np.random.Generator, shape, hidden: int) -> np.ndarray:
    scale = 1.0 / np.sqrt(hidden)
    return rng.uniform(-scale, scale, size=shape)


def make_tables(num_layers: int, codebook_size: int, hidden: int = DEFAULT_HIDDEN,
                max_len: int = DEFAULT_MAX_LEN, seed: int = 0) -> EmbeddingTableSet:
    """Seeded tables drawn from ``U(-1/sqrt(hidden), 1/sqrt(hidden))``.

    Draw order is fixed (layer tables, bos, eos, positions) so the same
    arguments always give the same tables.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE5B]))
    tables = _uniform(rng, (num_layers, codebook_size + NUM_SPECIAL, hidden), hidden)
    bos = _uniform(rng, (hidden,), hidden)
    eos = _uniform(rng, (hidden,), hidden)
    pos = _uniform(rng, (max_len, hidden), hidden)
    return EmbeddingTableSet(tables, bos, eos, pos)


def make_projection(clap_dim: int = DEFAULT_CLAP_DIM, hidden: int = DEFAULT_HIDDEN,
                    seed: int = 0) -> ClapProjection:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC1A9]))
    return ClapProjection(_uniform(rng, (clap_dim, hidden), hidden), _uniform(rng, (hidden,), hidden))


def embed_tokens(tokens: TokenSequence, tables: EmbeddingTableSet) -> np.ndarray:
    """Sum of per-layer embedding lookups, shape ``(L, D_b)``."""
    if tokens.num_layers != tables.num_layers:
        raise ShapeError(
            f"token grid has {tokens.num_layers} layers but embedding set has {tables.num_layers}"
        )
    check_codes(tokens.codes, tables.num_rows)
    out = np.zeros((tokens.length, tables.hidden), dtype=np.float64)
    for n in range(tokens.num_layers):
        out += tables.per_layer_tables[n][tokens.codes[n]]
    return out


def project_clap(audio_embedding, proj: ClapProjection) -> np.ndarray:
    x = np.asarray(audio_embedding, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a single embedding vector, got shape {x.shape}")
    if x.shape[0] != proj.in_dim:
        raise DimensionError("CLAP embedding vs projection", proj.in_dim, x.shape[0])
    return x @ np.asarray(proj.weight, dtype=np.float64) + np.asarray(proj.bias, dtype=np.float64)


def build_input(clap_vec, token_embeds, tables: EmbeddingTableSet) -> AssembledInput:
    """Enclose token embeddings with bos/eos, add positions, prepend the CLAP row.

    Positional embeddings cover the ``L + 2`` enclosed rows only; row 0 is
    ``clap_vec`` unchanged.
    """
    clap_vec = np.asarray(clap_vec, dtype=np.float64)
    embeds = np.asarray(token_embeds, dtype=np.float64)
    if embeds.size == 0:
        embeds = embeds.reshape(0, tables.hidden)
    if clap_vec.shape != (tables.hidden,):
        raise DimensionError("CLAP vector vs hidden size", tables.hidden,
                             clap_vec.shape[-1] if clap_vec.ndim else 0)
    if embeds.ndim != 2 or embeds.shape[1] != tables.hidden:
        raise DimensionError("token embeddings vs hidden size", tables.hidden,
                             embeds.shape[1] if embeds.ndim == 2 else 0)
    length = embeds.shape[0]
    if length + 2 > tables.max_len:
        raise LengthError(
            f"sequence of {length} tokens needs {length + 2} positions, table holds {tables.max_len}"
        )

    seq = np.vstack([tables.bos_embedding[None, :], embeds, tables.eos_embedding[None, :]])
    seq = seq + np.asarray(tables.positional_table, dtype=np.float64)[:length + 2]
    return AssembledInput(np.vstack([clap_vec[None, :], seq]))


def assemble(tokens: TokenSequence, audio_embedding, tables: EmbeddingTableSet,
             proj: ClapProjection) -> AssembledInput:
    """Convenience wrapper: embed, project and build in one call."""
    return build_input(project_clap(audio_embedding, proj), embed_tokens(tokens, tables), tables)
