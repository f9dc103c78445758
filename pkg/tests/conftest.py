"""Shared fixtures: tiny manifest datasets for service, CLI and acceptance tests."""

from pathlib import Path

import numpy as np
import pytest

from frameal.dataset import VideoSample, generate_synthetic, write_dataset


def make_videos(num_classes=3, videos_per_class=20, frames=12, dim=4, seed=7):
    return generate_synthetic(
        num_classes=num_classes,
        videos_per_class=videos_per_class,
        frames_per_video=frames,
        dim=dim,
        cluster_spread=1.5,
        frame_noise=0.8,
        seed=seed,
    )


def write_manifest(
    directory: Path,
    num_classes=3,
    videos_per_class=20,
    frames=12,
    dim=4,
    seed=7,
    with_assets=False,
) -> Path:
    """Write a small labeled manifest; with_assets also writes one stub file per frame."""
    videos = make_videos(num_classes, videos_per_class, frames, dim, seed)
    if with_assets:
        staged = []
        for v in videos:
            paths = []
            for i in range(v.n_frames):
                rel = f"assets/{v.id}/frame_{i:04d}.png"
                target = directory / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(f"stub:{v.id}:{i}".encode())
                paths.append(rel)
            staged.append(
                VideoSample(id=v.id, frames=v.frames, label=v.label, frame_assets=tuple(paths))
            )
        videos = staged
    path = directory / "manifest.jsonl"
    write_dataset(path, videos, num_classes=num_classes)
    return path


@pytest.fixture
def small_manifest(tmp_path):
    return write_manifest(tmp_path)


@pytest.fixture
def asset_manifest(tmp_path):
    return write_manifest(tmp_path, with_assets=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
