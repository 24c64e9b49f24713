"""Single-codebook vector quantization: k-means++ seeding and Lloyd iterations.

Every RVQ layer is trained with :func:`train_kmeans`. Points and codebooks are
plain ``numpy`` arrays of shape ``(M, D)`` and ``(K, D)``; distances are squared
Euclidean and ties always resolve to the lowest centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptyInputError, InsufficientPointsError, NumericError
from .errors import ShapeError

# Upper bound on elements of the (chunk, K, D) difference tensor.
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    max_iters: int = 100
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol >= 0:
            raise ValueError(f"rel_tol must be >= 0, got {self.rel_tol}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass
class KmeansReport:
    """Training trace. ``objective_history[0]`` is the objective of the seeded
    codebook; each further entry follows one accepted Lloyd step."""

    objective_history: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False


def as_points(points, name: str = "points") -> np.ndarray:
    """Validate and convert ``points`` to a float64 ``(M, D)`` array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size > 0:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D array of vectors, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyInputError(f"{name} is empty")
    if arr.shape[1] == 0:
        raise ShapeError(f"{name} has zero-dimensional vectors")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains NaN or Inf")
    return arr


def _check_dims(points: np.ndarray, codebook: np.ndarray) -> None:
    if points.shape[1] != codebook.shape[1]:
        raise DimensionError("codebook vs points", codebook.shape[1], points.shape[1])


def squared_distances(points: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Full ``(M, K)`` matrix of squared Euclidean distances.

    Computed as a sum of squared differences (not the ``|x|^2 - 2xc + |c|^2``
    expansion) so exact ties stay exact.
    """
    m, d = points.shape
    k = codebook.shape[0]
    out = np.empty((m, k), dtype=np.float64)
    step = max(1, _CHUNK_ELEMENTS // max(1, k * d))
    for start in range(0, m, step):
        diff = points[start:start + step, None, :] - codebook[None, :, :]
        np.einsum("mkd,mkd->mk", diff, diff, out=out[start:start + step])
    return out


def nearest(points: np.ndarray, codebook: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(indices, squared_distances)`` of each point's closest centroid.

    A matrix-product expansion screens candidates; every centroid within the
    expansion's rounding slack of the row minimum is re-scored with the exact
    difference formula, and the argmin is taken over those exact values. The
    result therefore matches :func:`squared_distances` followed by a
    lowest-index argmin, independent of BLAS blocking or thread count.
    """
    m = points.shape[0]
    xx = np.einsum("md,md->m", points, points)
    cc = np.einsum("kd,kd->k", codebook, codebook)
    approx = xx[:, None] - 2.0 * (points @ codebook.T) + cc[None, :]
    slack = 1e-9 * (xx + cc.max()) + 1e-300
    cand = approx <= approx.min(axis=1)[:, None] + 2.0 * slack[:, None]

    rows, cols = np.nonzero(cand)
    exact = np.full((m, codebook.shape[0]), np.inf)
    step = max(1, _CHUNK_ELEMENTS // points.shape[1])
    for start in range(0, rows.size, step):
        r, c = rows[start:start + step], cols[start:start + step]
        diff = points[r] - codebook[c]
        exact[r, c] = np.einsum("nd,nd->n", diff, diff)
    idx = np.argmin(exact, axis=1)  # first minimum == lowest index
    return idx, exact[np.arange(m), idx]


def assign(points, codebook) -> np.ndarray:
    points = as_points(points)
    codebook = as_points(codebook, "codebook")
    _check_dims(points, codebook)
    return nearest(points, codebook)[0]


def objective(points, codebook) -> float:
    """Sum over points of the squared distance to the nearest centroid."""
    points = as_points(points)
    codebook = as_points(codebook, "codebook")
    _check_dims(points, codebook)
    return float(nearest(points, codebook)[1].sum())


def kmeans_pp_init(points, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding.

    The first centroid is drawn uniformly; each further one with probability
    proportional to its squared distance to the closest centroid chosen so
    far. Chosen indices are always distinct: when every remaining point sits
    on an existing centroid, the next pick is uniform over unchosen indices.

    Raises:
        EmptyInputError: ``points`` is empty.
        InsufficientPointsError: fewer than ``k`` points.
    """
    points = as_points(points)
    m = points.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if m < k:
        raise InsufficientPointsError(m, k)

    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(m))]
    is_chosen = np.zeros(m, dtype=bool)
    is_chosen[chosen[0]] = True
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)

    while len(chosen) < k:
        weights = np.where(is_chosen, 0.0, d2)
        total = weights.sum()
        if total > 0:
            nxt = int(rng.choice(m, p=weights / total))
        else:
            nxt = int(rng.choice(np.flatnonzero(~is_chosen)))
        chosen.append(nxt)
        is_chosen[nxt] = True
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))

    return points[chosen].copy()


def lloyd_iterate(points, codebook) -> tuple[np.ndarray, float]:
    """One Lloyd step: assign, move centroids to cluster means, repair empties.

    An empty cluster's centroid is reseeded to the point currently farthest
    from its nearest centroid; several empty clusters are repaired one after
    another in index order. The returned objective is evaluated against the
    updated codebook.
    """
    points = as_points(points)
    codebook = as_points(codebook, "codebook")
    _check_dims(points, codebook)
    k, d = codebook.shape

    idx, _ = nearest(points, codebook)
    counts = np.bincount(idx, minlength=k)
    sums = np.zeros((k, d), dtype=np.float64)
    np.add.at(sums, idx, points)  # accumulates in point order

    filled = counts > 0
    new = codebook.copy()
    new[filled] = sums[filled] / counts[filled, None]

    dist = nearest(points, new[filled])[1]
    for j in np.flatnonzero(~filled):
        far = int(np.argmax(dist))
        new[j] = points[far]
        dist = np.minimum(dist, np.sum((points - new[j]) ** 2, axis=1))

    return new, float(dist.sum())


def train_kmeans(points, cfg: KmeansConfig) -> tuple[np.ndarray, KmeansReport]:
    """Seed with k-means++ and run Lloyd steps until the relative objective
    change drops below ``cfg.rel_tol`` or ``cfg.max_iters`` steps have run.

    A step whose objective would exceed the previous one (possible only
    through floating-point rounding) is rejected and ends training, so the
    reported history is non-increasing by construction.
    """
    points = as_points(points)
    codebook = kmeans_pp_init(points, cfg.k, cfg.seed)
    report = KmeansReport(objective_history=[objective(points, codebook)])

    for _ in range(cfg.max_iters):
        prev = report.objective_history[-1]
        if prev == 0.0:
            report.converged = True
            break
        new, obj = lloyd_iterate(points, codebook)
        if obj > prev:
            report.converged = True
            break
        codebook = new
        report.objective_history.append(obj)
        report.iterations_run += 1
        change = (prev - obj) / prev
        if change < cfg.rel_tol or change == 0.0:
            report.converged = True
            break

    return codebook, report
