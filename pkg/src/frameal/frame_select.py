"""Exemplar-frame selection for queried videos.

Given a video's per-frame embeddings and a frame budget, picks the subset an
annotator gets to see: greedy k-center (the proposed selector, a 2-approximation
of the min-max facility location optimum), k-means centroid frames, or a
uniform random subset. Short videos return all frames rather than erroring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameSubset:
    """Chosen frame indices (sorted, distinct) plus the covering radius.

    ``radius`` is the largest distance from any frame to its nearest chosen
    frame; it is None for selectors that never see the frame geometry.
    """

    indices: tuple[int, ...]
    radius: float | None

    def __post_init__(self):
        if not self.indices:
            raise ValueError("a frame subset cannot be empty")
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("indices must be sorted and distinct")
        if self.radius is not None and self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def size(self) -> int:
        return len(self.indices)


def _as_frame_matrix(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("frames must be a non-empty (n_frames, dim) matrix")
    return frames


def kcenter_greedy(frames: np.ndarray, budget: int) -> FrameSubset:
    """Greedy k-center frame selection.

    The first center is the frame farthest from the frame mean; each later
    center is the frame farthest from the already-chosen set. All ties go to
    the lowest frame index. Guaranteed within twice the optimal covering
    radius for any budget.
    """
    frames = _as_frame_matrix(frames)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = frames.shape[0]
    count = min(budget, n)

    from_mean = np.linalg.norm(frames - frames.mean(axis=0), axis=1)
    chosen = [int(np.argmax(from_mean))]
    nearest = np.linalg.norm(frames - frames[chosen[0]], axis=1)
    for _ in range(count - 1):
        candidates = nearest.copy()
        candidates[chosen] = -np.inf  # duplicates of a center must not re-enter
        u = int(np.argmax(candidates))
        chosen.append(u)
        np.minimum(nearest, np.linalg.norm(frames - frames[u], axis=1), out=nearest)
    return FrameSubset(indices=tuple(sorted(chosen)), radius=float(nearest.max()))


def kcenter_radius(frames: np.ndarray, selected) -> float:
    """Largest distance from any frame to its nearest selected frame."""
    frames = _as_frame_matrix(frames)
    selected = [int(i) for i in selected]
    if not selected:
        raise ValueError("selected set must be non-empty")
    n = frames.shape[0]
    if any(not 0 <= i < n for i in selected):
        raise IndexError(f"selected indices out of range for {n} frames")
    nearest = np.full(n, np.inf)
    for i in selected:
        np.minimum(nearest, np.linalg.norm(frames - frames[i], axis=1), out=nearest)
    return float(nearest.max())


def kmeans_frames(frames: np.ndarray, budget: int, seed: int) -> FrameSubset:
    """Frames nearest the centroids of a seeded k-means clustering.

    Initialization is farthest-point style: a seeded random first centroid,
    then repeatedly the frame farthest from the current centroids. Lloyd's
    iterations run to an assignment fixpoint (at most 100). Each centroid
    maps to its nearest frame, duplicates falling back to the next-nearest
    unused frame; ties always go to the lowest index.
    """
    frames = _as_frame_matrix(frames)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = frames.shape[0]
    count = min(budget, n)
    if count == n:
        return FrameSubset(indices=tuple(range(n)), radius=0.0)

    rng = np.random.default_rng(seed)
    centroids = [frames[int(rng.integers(n))]]
    nearest = np.linalg.norm(frames - centroids[0], axis=1)
    for _ in range(count - 1):
        u = int(np.argmax(nearest))
        centroids.append(frames[u])
        np.minimum(nearest, np.linalg.norm(frames - frames[u], axis=1), out=nearest)
    centroids = np.stack(centroids)

    assignment = None
    for _ in range(100):
        dists = np.linalg.norm(frames[:, None, :] - centroids[None, :, :], axis=2)
        new_assignment = dists.argmin(axis=1)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(count):
            members = frames[assignment == c]
            if len(members):  # empty clusters keep their previous centroid
                centroids[c] = members.mean(axis=0)

    used: set[int] = set()
    chosen = []
    for c in range(count):
        to_centroid = np.linalg.norm(frames - centroids[c], axis=1)
        for idx in np.argsort(to_centroid, kind="stable"):
            if int(idx) not in used:
                used.add(int(idx))
                chosen.append(int(idx))
                break
    indices = tuple(sorted(chosen))
    return FrameSubset(indices=indices, radius=kcenter_radius(frames, indices))


def random_frames(n_frames: int, budget: int, seed: int) -> FrameSubset:
    """Uniform subset of min(budget, n_frames) frame indices, deterministic per seed."""
    if n_frames < 1 or budget < 1:
        raise ValueError("n_frames and budget must be >= 1")
    count = min(budget, n_frames)
    indices = np.random.default_rng(seed).choice(n_frames, size=count, replace=False)
    return FrameSubset(indices=tuple(int(i) for i in np.sort(indices)), radius=None)
