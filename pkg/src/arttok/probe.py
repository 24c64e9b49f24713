"""Synthetic semantic-preservation probe.

Labeled Gaussian clusters stand in for semantically distinct sounds. An RVQ
stack is trained on the features, every vector is reconstructed from its
tokens, and the reconstruction is classified against the true class centers.
More layers should keep more of the class identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, ShapeError
from .kmeans import KmeansConfig, as_points, nearest
from .rvq import bits_per_vector, compute_stats, decode, encode, train_rvq

DEFAULT_LAYER_COUNTS = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    vectors_per_class: int = 200
    dim: int = 32
    class_spread: float = 1.0
    center_spread: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.vectors_per_class < 1:
            raise ValueError(f"vectors_per_class must be >= 1, got {self.vectors_per_class}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        # class_spread == 0 is allowed as the exact-cover limit.
        if not self.class_spread >= 0:
            raise ValueError(f"class_spread must be >= 0, got {self.class_spread}")
        if not self.center_spread > 0:
            raise ValueError(f"center_spread must be > 0, got {self.center_spread}")


@dataclass
class ProbeReport:
    layer_counts: list[int]
    codebook_size: int
    raw_accuracy: float
    quantized_accuracy: list[float] = field(default_factory=list)
    residual_energy_ratio: list[float] = field(default_factory=list)
    bits_per_vector: list[float] = field(default_factory=list)


def generate_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``(points, labels, centers)``.

    Centers are ``N(0, center_spread^2 I)``; each class gets
    ``vectors_per_class`` points ``center + N(0, class_spread^2 I)``, stored
    class by class.
    """
    rng = np.random.default_rng(spec.seed)
    g, m, d = spec.num_classes, spec.vectors_per_class, spec.dim
    centers = rng.normal(0.0, spec.center_spread, size=(g, d))
    noise = rng.normal(0.0, 1.0, size=(g, m, d)) * spec.class_spread
    points = (centers[:, None, :] + noise).reshape(g * m, d)
    labels = np.repeat(np.arange(g), m)
    return points, labels, centers


def nearest_centroid_accuracy(points, labels, class_centroids) -> float:
    """Fraction of points whose nearest class centroid carries their label."""
    x = as_points(points)
    c = as_points(class_centroids, "class centroids")
    labels = np.asarray(labels)
    if x.shape[1] != c.shape[1]:
        raise DimensionError("class centroids vs points", c.shape[1], x.shape[1])
    if labels.shape != (x.shape[0],):
        raise ShapeError(f"need one label per point: {labels.shape} labels for {x.shape[0]} points")
    pred, _ = nearest(x, c)
    return float(np.mean(pred == labels))


def run_probe(spec: SyntheticSpec, layer_counts=DEFAULT_LAYER_COUNTS, codebook_size: int = 64,
              kcfg: KmeansConfig | None = None) -> ProbeReport:
    """Score reconstructions at each layer count.

    One stack with ``max(layer_counts)`` layers is trained; because training
    is greedy and per-layer seeds depend only on the layer index, its
    ``N``-layer prefix is exactly the stack an ``N``-layer run would produce.
    """
    layer_counts = [int(n) for n in layer_counts]
    if not layer_counts or min(layer_counts) < 1:
        raise ValueError(f"layer_counts must be non-empty positive integers, got {layer_counts}")
    kcfg = replace(kcfg or KmeansConfig(k=codebook_size), k=codebook_size)

    points, labels, centers = generate_synthetic(spec)
    full = train_rvq(points, max(layer_counts), kcfg)
    report = ProbeReport(
        layer_counts=layer_counts,
        codebook_size=codebook_size,
        raw_accuracy=nearest_centroid_accuracy(points, labels, centers),
    )
    for n in layer_counts:
        stack = full.truncate(n)
        recon = decode(encode(points, stack), stack)
        stats = compute_stats(points, stack)
        report.quantized_accuracy.append(nearest_centroid_accuracy(recon, labels, centers))
        report.residual_energy_ratio.append(stats.residual_energy_ratio)
        report.bits_per_vector.append(bits_per_vector(n, codebook_size))
    return report
