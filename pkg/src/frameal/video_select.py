"""Batch video selection for active queries.

Scores unlabeled videos by prediction uncertainty and mutual diversity,
combines both into a single symmetric matrix, and picks the batch that
(heuristically) maximizes the induced binary quadratic objective under a
fixed batch-size constraint via truncated power iteration. Also houses the
random and entropy-only baselines and the supporting utilities: diversity
pruning across iterations and random projection for high-dimensional pools.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import Model, predict_proba_batch
from .dataset import VideoSample, pool_video

PSD_EPSILON = 1e-9
PSD_TOLERANCE = -1e-6
MAX_RKHS_DISTANCE = float(np.sqrt(2.0))
DEBUG_EXPORT_VERSION = 1


@dataclass(frozen=True, eq=False)
class DiversityMatrix:
    """Pairwise video dissimilarity: Gaussian-kernel distance in the RKHS.

    Entries lie in [0, sqrt(2)], the diagonal is exactly zero, and the matrix
    is symmetric. ``bandwidth`` is the Gaussian kernel bandwidth used.
    """

    distances: np.ndarray
    bandwidth: float

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distances must be a square matrix")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if np.any(d < 0) or not np.allclose(d, d.T):
            raise ValueError("distances must be symmetric and non-negative")
        if np.any(np.diag(d) != 0):
            raise ValueError("diagonal must be exactly zero")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "distances", d)

    @property
    def size(self) -> int:
        return self.distances.shape[0]


@dataclass(frozen=True, eq=False)
class ObjectiveMatrix:
    """Combined selection objective: uncertainties on the diagonal, scaled
    diversity off it, plus any diagonal shift applied for PSD correction."""

    values: np.ndarray
    mix_weight: float
    diagonal_shift: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("objective matrix must be square")
        if not np.all(np.isfinite(values)):
            raise ValueError("objective matrix must be finite")
        if not np.allclose(values, values.T):
            raise ValueError("objective matrix must be symmetric")
        if self.mix_weight < 0 or self.diagonal_shift < 0:
            raise ValueError("mix_weight and diagonal_shift must be >= 0")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class SelectionVector:
    """Binary batch indicator over a pool, with exactly ``batch_size`` ones."""

    mask: np.ndarray
    batch_size: int

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 1 or not np.all((mask == 0) | (mask == 1)):
            raise ValueError("mask must be a flat 0/1 vector")
        if int(mask.sum()) != self.batch_size:
            raise ValueError(f"mask must contain exactly {self.batch_size} ones")
        mask = mask.astype(np.int8)
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class PowerIterationResult:
    selection: SelectionVector
    objective_trace: tuple[float, ...]  # z'Mz at init and after each iteration
    iterations: int
    applied_shift: float  # extra diagonal shift the solver had to apply itself


def top_indices(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest entries, ties going to the lowest index."""
    order = np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")
    return np.sort(order[:count])


def selection_from_indices(indices: np.ndarray, pool_size: int) -> SelectionVector:
    mask = np.zeros(pool_size, dtype=np.int8)
    mask[np.asarray(indices, dtype=np.intp)] = 1
    return SelectionVector(mask=mask, batch_size=len(indices))


def entropy_vector(m: Model, pool: list[VideoSample] | tuple[VideoSample, ...]) -> np.ndarray:
    """Prediction entropy (nats) of the model on each video's pooled embedding."""
    if not pool:
        raise ValueError("pool must be non-empty")
    features = np.stack([pool_video(v) for v in pool])
    probs = predict_proba_batch(m, features)
    logp = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    return -(probs * logp).sum(axis=1)


def pairwise_distances(features: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix with an exactly-zero diagonal.

    Every entry is computed from its own pair of rows (explicit differences,
    fixed reduction order), so any submatrix is bit-identical to recomputing
    on the corresponding subset of rows; this is what makes pruning and
    recomputation agree exactly.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    out = np.empty((n, n))
    # row blocks only bound the temporary; per-entry sums are unaffected
    block = max(1, 4_000_000 // max(1, n * dim))
    for start in range(0, n, block):
        stop = min(n, start + block)
        diff = features[start:stop, None, :] - features[None, :, :]
        out[start:stop] = np.sqrt((diff * diff).sum(axis=2))
    return out


def median_bandwidth(features: np.ndarray) -> float:
    """Median of the nonzero pairwise distances; 1.0 (with a warning) if none."""
    dist = pairwise_distances(features)
    upper = dist[np.triu_indices(dist.shape[0], k=1)]
    nonzero = upper[upper > 0]
    if nonzero.size == 0:
        warnings.warn("all pool points coincide; falling back to bandwidth 1.0", stacklevel=2)
        return 1.0
    return float(np.median(nonzero))


def diversity_from_features(features: np.ndarray, bandwidth: float | str = "median") -> DiversityMatrix:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a non-empty (N, dim) matrix")
    if isinstance(bandwidth, str):
        if bandwidth != "median":
            raise ValueError(f"unknown bandwidth policy {bandwidth!r}")
        bandwidth = median_bandwidth(features)
    elif bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    dist = pairwise_distances(features)
    kernel = np.exp(-(dist**2) / (2.0 * bandwidth**2))
    rkhs_sq = np.maximum(2.0 - 2.0 * kernel, 0.0)
    np.fill_diagonal(rkhs_sq, 0.0)
    return DiversityMatrix(distances=np.sqrt(rkhs_sq), bandwidth=float(bandwidth))


def diversity_matrix(
    pool: list[VideoSample] | tuple[VideoSample, ...],
    bandwidth: float | str = "median",
) -> DiversityMatrix:
    """Gaussian-kernel RKHS distances between the pooled video embeddings.

    With ``bandwidth="median"`` the kernel bandwidth is the median of the
    nonzero pairwise Euclidean distances (median heuristic).
    """
    if not pool:
        raise ValueError("pool must be non-empty")
    return diversity_from_features(np.stack([pool_video(v) for v in pool]), bandwidth)


def objective_matrix(
    entropies: np.ndarray,
    diversity: DiversityMatrix,
    mix_weight: float,
) -> ObjectiveMatrix:
    """Combine uncertainty and diversity into one symmetric selection matrix.

    Diagonal entries are the per-video entropies; off-diagonal entries are
    ``mix_weight`` times the pairwise diversity.
    """
    entropies = np.asarray(entropies, dtype=np.float64)
    if entropies.shape != (diversity.size,):
        raise ValueError(
            f"length mismatch: {entropies.shape[0]} entropies for a "
            f"{diversity.size}x{diversity.size} diversity matrix"
        )
    if mix_weight < 0:
        raise ValueError("mix_weight must be >= 0")
    values = mix_weight * diversity.distances
    np.fill_diagonal(values, entropies)
    return ObjectiveMatrix(values=values, mix_weight=float(mix_weight), diagonal_shift=0.0)


def shift_to_psd(obj: ObjectiveMatrix) -> ObjectiveMatrix:
    """Add the minimal diagonal shift making the matrix positive semidefinite.

    The shift is max(0, -lambda_min) + 1e-9, applied to every diagonal entry.
    Because every feasible selection has the same cardinality, adding c*I adds
    the constant c*batch_size to every feasible objective value, so the argmax
    is unchanged while power iteration gains monotone convergence.
    """
    min_eig = float(np.linalg.eigvalsh(obj.values).min())
    shift = max(0.0, -min_eig) + PSD_EPSILON
    return ObjectiveMatrix(
        values=obj.values + shift * np.eye(obj.size),
        mix_weight=obj.mix_weight,
        diagonal_shift=obj.diagonal_shift + shift,
    )


def _support_objective(matrix: np.ndarray, indices: np.ndarray) -> float:
    return float(matrix[np.ix_(indices, indices)].sum())


def truncated_power_select(
    obj: ObjectiveMatrix,
    batch_size: int,
    max_iters: int = 100,
    init: SelectionVector | None = None,
) -> PowerIterationResult:
    """Select a batch by truncated power iteration on the objective matrix.

    Starting from ``init`` (default: indicator of the ``batch_size`` largest
    column sums), repeatedly multiplies the current indicator by the matrix
    and keeps the ``batch_size`` largest entries (ties to the lowest index),
    stopping at a support-set fixpoint or after ``max_iters`` iterations.
    The matrix is expected to be PSD-shifted already; if its smallest
    eigenvalue is below tolerance the shift is applied here instead.
    """
    n = obj.size
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size must be in [1, {n}], got {batch_size}")

    applied_shift = 0.0
    min_eig = float(np.linalg.eigvalsh(obj.values).min())
    if min_eig < PSD_TOLERANCE:
        applied_shift = -min_eig + PSD_EPSILON
        matrix = obj.values + applied_shift * np.eye(n)
    else:
        matrix = obj.values

    if init is not None:
        if init.mask.shape != (n,) or init.batch_size != batch_size:
            raise ValueError("init selection does not match pool size and batch size")
        support = init.indices
    else:
        support = top_indices(matrix.sum(axis=0), batch_size)

    indicator = np.zeros(n)
    indicator[support] = 1.0
    trace = [_support_objective(matrix, support)]
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        scores = matrix @ indicator
        new_support = top_indices(scores, batch_size)
        indicator = np.zeros(n)
        indicator[new_support] = 1.0
        trace.append(_support_objective(matrix, new_support))
        if np.array_equal(new_support, support):
            break
        support = new_support

    return PowerIterationResult(
        selection=selection_from_indices(support, n),
        objective_trace=tuple(trace),
        iterations=iterations,
        applied_shift=applied_shift,
    )


def select_videos_random(pool_size: int, batch_size: int, seed: int) -> SelectionVector:
    """Uniform batch without replacement; deterministic per seed."""
    if not 1 <= batch_size <= pool_size:
        raise ValueError(f"batch_size must be in [1, {pool_size}], got {batch_size}")
    indices = np.random.default_rng(seed).choice(pool_size, size=batch_size, replace=False)
    return selection_from_indices(np.sort(indices), pool_size)


def select_videos_entropy(entropies: np.ndarray, batch_size: int) -> SelectionVector:
    """Batch of the highest-entropy videos; ties go to the lowest index."""
    entropies = np.asarray(entropies, dtype=np.float64)
    if not 1 <= batch_size <= entropies.shape[0]:
        raise ValueError(f"batch_size must be in [1, {entropies.shape[0]}], got {batch_size}")
    return selection_from_indices(top_indices(entropies, batch_size), entropies.shape[0])


def prune_diversity(
    div: DiversityMatrix, removed: set[int] | list[int] | np.ndarray
) -> tuple[DiversityMatrix, np.ndarray]:
    """Drop the rows/columns of queried videos, keeping surviving entries bit-identical.

    Returns the pruned matrix and the surviving original indices in order
    (new index -> old index).
    """
    removed = {int(i) for i in removed}
    out_of_range = [i for i in removed if not 0 <= i < div.size]
    if out_of_range:
        raise IndexError(f"indices out of range: {sorted(out_of_range)}")
    kept = np.array([i for i in range(div.size) if i not in removed], dtype=np.intp)
    pruned = div.distances[np.ix_(kept, kept)]
    return DiversityMatrix(distances=pruned, bandwidth=div.bandwidth), kept


def random_project(matrix: np.ndarray, target_dim: int, seed: int) -> np.ndarray:
    """Project rows to ``target_dim`` with a scaled Gaussian random matrix.

    The projection has iid N(0, 1/target_dim) entries, so pairwise distances
    are approximately preserved for target_dim well below the input dimension.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("input must be an (N, D) matrix")
    input_dim = matrix.shape[1]
    if not 1 <= target_dim < input_dim:
        raise ValueError(f"target_dim must be in [1, {input_dim}), got {target_dim}")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((input_dim, target_dim)) / np.sqrt(target_dim)
    return matrix @ projection


def export_selection_debug(
    directory: str | Path,
    entropies: np.ndarray,
    diversity: DiversityMatrix,
    objective: ObjectiveMatrix,
    result: PowerIterationResult,
) -> None:
    """Dump the selection inputs and solver trace as versioned text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "entropies.txt", np.asarray(entropies)[None, :])
    _write_matrix(directory / "diversity.txt", diversity.distances, bandwidth=diversity.bandwidth)
    _write_matrix(
        directory / "objective.txt",
        objective.values,
        mix_weight=objective.mix_weight,
        diagonal_shift=objective.diagonal_shift,
    )
    _write_matrix(
        directory / "objective_trace.txt",
        np.asarray(result.objective_trace)[None, :],
        iterations=result.iterations,
        selected=" ".join(str(i) for i in result.selection.indices),
    )


def _write_matrix(path: Path, matrix: np.ndarray, **meta) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# version {DEBUG_EXPORT_VERSION}\n")
        fh.write(f"# shape {matrix.shape[0]} {matrix.shape[1]}\n")
        for key, value in meta.items():
            fh.write(f"# {key} {value}\n")
        for row in matrix:  # row-major
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
