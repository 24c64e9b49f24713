"""Residual-vector-quantization tokenizer for audio representation features."""

from .assembly import (
    AssembledInput,
    ClapProjection,
    EmbeddingTableSet,
    build_input,
    embed_tokens,
    make_projection,
    make_tables,
    project_clap,
)
from .kmeans import KmeansConfig, KmeansReport, assign, kmeans_pp_init, lloyd_iterate, train_kmeans
from .mcm import LossWeights, McmConfig, McmMask, apply_mask, combine_losses, generate_mask
from .probe import ProbeReport, SyntheticSpec, generate_synthetic, nearest_centroid_accuracy, run_probe
from .rvq import (
    CodebookStack,
    QuantizationStats,
    TokenSequence,
    compute_stats,
    decode,
    encode,
    quantize_vector,
    train_rvq,
)

__version__ = "0.1.0"
