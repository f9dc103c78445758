"""Embedding datasets: manifest IO, pooling, pool splits, synthetic generation.

A dataset is a collection of videos, each video a matrix of per-frame
embedding vectors. Videos optionally carry a class label and a list of
displayable image assets (one per frame) used by the annotation UI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MANIFEST_VERSION = 1


class DatasetError(ValueError):
    """Malformed dataset content; the message names the offending record."""


@dataclass(frozen=True, eq=False)
class VideoSample:
    """One video: per-frame embeddings plus optional label and image assets."""

    id: str
    frames: np.ndarray  # (n_frames, dim) float64, read-only
    label: int | None = None
    frame_assets: tuple[str, ...] | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise DatasetError(
                f"video {self.id!r}: frames must be a (n_frames, dim) matrix "
                f"with n_frames >= 1 and dim >= 1, got shape {frames.shape}"
            )
        if not np.all(np.isfinite(frames)):
            raise DatasetError(f"video {self.id!r}: non-finite embedding value in frames")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        if self.label is not None and (not isinstance(self.label, (int, np.integer)) or self.label < 0):
            raise DatasetError(f"video {self.id!r}: label must be a non-negative class index")
        if self.frame_assets is not None:
            assets = tuple(self.frame_assets)
            if len(assets) != frames.shape[0]:
                raise DatasetError(
                    f"video {self.id!r}: frame_assets has {len(assets)} entries "
                    f"for {frames.shape[0]} frames"
                )
            object.__setattr__(self, "frame_assets", assets)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class Manifest:
    """A loaded dataset: videos plus the class/dimension declaration."""

    videos: tuple[VideoSample, ...]
    num_classes: int
    dim: int
    class_names: tuple[str, ...]
    root: Path  # directory that frame_assets paths are relative to


@dataclass(frozen=True)
class DatasetSplits:
    """The five video pools of one experiment, pairwise disjoint by id."""

    labeled: tuple[VideoSample, ...]
    unlabeled: tuple[VideoSample, ...]
    test: tuple[VideoSample, ...]
    oracle_train: tuple[VideoSample, ...]
    oracle_test: tuple[VideoSample, ...]
    num_classes: int

    def pools(self) -> dict[str, tuple[VideoSample, ...]]:
        return {
            "labeled": self.labeled,
            "unlabeled": self.unlabeled,
            "test": self.test,
            "oracle_train": self.oracle_train,
            "oracle_test": self.oracle_test,
        }


def default_class_names(num_classes: int) -> tuple[str, ...]:
    return tuple(f"class {c}" for c in range(num_classes))


def load_dataset(path: str | Path) -> Manifest:
    """Load a newline-delimited manifest file.

    The first record is a header declaring ``version``, ``C`` and ``dim``
    (optionally ``class_names``); every following record is one video with
    ``id``, ``label`` (int or null), ``frames`` (list of per-frame embedding
    rows) and optionally ``frame_assets``.

    Raises:
        FileNotFoundError: missing manifest file.
        DatasetError: malformed header or record; the message carries the
            record id and offending field.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset manifest not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise DatasetError(f"{path}: empty manifest")

    header = _parse_json(lines[0], "header")
    if header.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"{path}: header must declare version {MANIFEST_VERSION}")
    try:
        num_classes = int(header["C"])
        dim = int(header["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: header must declare integer C and dim") from exc
    if num_classes < 1 or dim < 1:
        raise DatasetError(f"{path}: header C and dim must be >= 1")
    class_names = tuple(str(n) for n in header.get("class_names", default_class_names(num_classes)))
    if len(class_names) != num_classes:
        raise DatasetError(f"{path}: class_names must list exactly C={num_classes} names")

    videos = []
    seen: set[str] = set()
    for record_no, line in enumerate(lines[1:], start=2):
        rec = _parse_json(line, f"record {record_no}")
        vid = rec.get("id")
        if not isinstance(vid, str) or not vid:
            raise DatasetError(f"record {record_no}: missing or non-string field 'id'")
        if vid in seen:
            raise DatasetError(f"video {vid!r}: duplicate id")
        seen.add(vid)
        if "frames" not in rec:
            raise DatasetError(f"video {vid!r}: missing field 'frames'")
        frames = rec["frames"]
        if not isinstance(frames, list) or not frames:
            raise DatasetError(f"video {vid!r}: field 'frames' must be a non-empty list of rows")
        widths = {len(row) if isinstance(row, list) else -1 for row in frames}
        if widths != {dim}:
            raise DatasetError(
                f"video {vid!r}: frame dimension mismatch, expected every row "
                f"to have dim {dim}, got widths {sorted(widths)}"
            )
        label = rec.get("label")
        if label is not None:
            if not isinstance(label, int) or isinstance(label, bool) or not (0 <= label < num_classes):
                raise DatasetError(
                    f"video {vid!r}: label must be null or an integer in [0, {num_classes})"
                )
        assets = rec.get("frame_assets")
        if assets is not None and (
            not isinstance(assets, list) or not all(isinstance(a, str) for a in assets)
        ):
            raise DatasetError(f"video {vid!r}: frame_assets must be a list of strings")
        videos.append(
            VideoSample(
                id=vid,
                frames=np.array(frames, dtype=np.float64),
                label=label,
                frame_assets=tuple(assets) if assets is not None else None,
            )
        )
    return Manifest(
        videos=tuple(videos),
        num_classes=num_classes,
        dim=dim,
        class_names=class_names,
        root=path.parent.resolve(),
    )


def write_dataset(
    path: str | Path,
    videos: list[VideoSample] | tuple[VideoSample, ...],
    num_classes: int,
    class_names: tuple[str, ...] | None = None,
) -> None:
    """Write a manifest; ``load_dataset`` on the result reproduces the input exactly."""
    if not videos:
        raise DatasetError("cannot write an empty dataset")
    dim = videos[0].dim
    header: dict = {"version": MANIFEST_VERSION, "C": int(num_classes), "dim": int(dim)}
    if class_names is not None:
        header["class_names"] = list(class_names)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for v in videos:
            if v.dim != dim:
                raise DatasetError(f"video {v.id!r}: dim {v.dim} differs from dataset dim {dim}")
            rec: dict = {
                "id": v.id,
                "label": None if v.label is None else int(v.label),
                # float() keeps the exact float64 value; json round-trips it
                "frames": [[float(x) for x in row] for row in v.frames],
            }
            if v.frame_assets is not None:
                rec["frame_assets"] = list(v.frame_assets)
            fh.write(json.dumps(rec) + "\n")


def _parse_json(line: str, what: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{what}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DatasetError(f"{what}: expected a JSON object")
    return obj


def split_dataset(
    videos: list[VideoSample] | tuple[VideoSample, ...],
    sizes: tuple[int, int, int, int, int],
    seed: int,
    num_classes: int | None = None,
) -> DatasetSplits:
    """Randomly partition labeled videos into the five experiment pools.

    ``sizes`` gives the pool sizes in order (labeled, unlabeled, test,
    oracle_train, oracle_test). Deterministic for a fixed seed. Fails if the
    pools would not fit or if some class is missing from the labeled or
    oracle-train pool; the caller retries with a new seed in that case.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 5 or any(s < 0 for s in sizes):
        raise ValueError("sizes must be five non-negative integers")
    if sum(sizes) > len(videos):
        raise ValueError(
            f"insufficient videos: pools need {sum(sizes)} but only {len(videos)} supplied"
        )
    for v in videos:
        if v.label is None:
            raise ValueError(f"video {v.id!r} is unlabeled; split requires ground-truth labels")
    if num_classes is None:
        num_classes = max(v.label for v in videos) + 1

    order = np.random.default_rng(seed).permutation(len(videos))
    pools = []
    start = 0
    for size in sizes:
        pools.append(tuple(videos[i] for i in order[start : start + size]))
        start += size
    splits = DatasetSplits(*pools, num_classes=num_classes)

    for pool_name in ("labeled", "oracle_train"):
        present = {v.label for v in splits.pools()[pool_name]}
        missing = sorted(set(range(num_classes)) - present)
        if missing:
            raise ValueError(
                f"class coverage failure: classes {missing} absent from the "
                f"{pool_name} pool; retry with a different seed"
            )
    return splits


def pool_video(v: VideoSample) -> np.ndarray:
    """Video-level representation: arithmetic mean of the frame embeddings."""
    return pool_frames(v.frames)


def pool_frames(frames: np.ndarray) -> np.ndarray:
    return np.asarray(frames, dtype=np.float64).mean(axis=0)


def generate_synthetic(
    num_classes: int,
    videos_per_class: int,
    frames_per_video: int,
    dim: int,
    cluster_spread: float,
    frame_noise: float,
    seed: int,
) -> list[VideoSample]:
    """Generate a labeled Gaussian-cluster dataset for desk-scale experiments.

    Class ``c`` gets a center drawn from a standard normal; each video adds a
    per-video offset (scale ``cluster_spread``) and per-frame noise (scale
    ``frame_noise``). Bit-identical output for a fixed seed.
    """
    if num_classes < 1 or videos_per_class < 1 or frames_per_video < 1 or dim < 1:
        raise ValueError("num_classes, videos_per_class, frames_per_video and dim must be >= 1")
    if cluster_spread <= 0:
        raise ValueError("cluster_spread must be > 0")
    if frame_noise < 0:
        raise ValueError("frame_noise must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((num_classes, dim))
    videos = []
    for c in range(num_classes):
        for i in range(videos_per_class):
            offset = cluster_spread * rng.standard_normal(dim)
            noise = frame_noise * rng.standard_normal((frames_per_video, dim))
            videos.append(
                VideoSample(
                    id=f"syn-c{c}-{i:04d}",
                    frames=centers[c] + offset + noise,
                    label=c,
                )
            )
    return videos
