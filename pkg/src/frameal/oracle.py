"""Simulated labeling oracle with abstention.

A classifier trained on its own pool stands in for the human annotator. It
judges a queried video from the selected frames alone (mean-pooled), returns
its predicted label when confident, and abstains when its prediction entropy
exceeds a threshold calibrated as a percentile of its entropy distribution on
a held-out pool. Returned labels may be wrong; that is the point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import Model, entropy, predict_proba, predict_proba_batch
from .dataset import VideoSample, pool_frames, pool_video
from .frame_select import FrameSubset

LABELED = "labeled"
ABSTAINED = "abstained"


@dataclass(frozen=True)
class OracleConfig:
    model: Model
    tau: float  # abstain when prediction entropy exceeds this
    percentile: float = 50.0

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError("tau must be finite and >= 0")
        if not 0 < self.percentile <= 100:
            raise ValueError("percentile must lie in (0, 100]")


@dataclass(frozen=True)
class OracleVerdict:
    outcome: str  # LABELED or ABSTAINED
    label: int | None
    oracle_entropy: float
    correct: bool | None = None  # filled by the harness from ground truth

    def __post_init__(self):
        if self.outcome not in (LABELED, ABSTAINED):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if (self.label is not None) != (self.outcome == LABELED):
            raise ValueError("label must be present exactly when the outcome is labeled")


def calibrate_threshold(
    oracle_model: Model,
    pool: list[VideoSample] | tuple[VideoSample, ...],
    percentile: float = 50.0,
) -> float:
    """Entropy threshold: a percentile of the oracle's entropies on ``pool``.

    Entropies are computed on full-video pooled features; the percentile uses
    linear interpolation between closest ranks.
    """
    if not pool:
        raise ValueError("calibration pool must be non-empty")
    if not 0 < percentile <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    features = np.stack([pool_video(v) for v in pool])
    probs = predict_proba_batch(oracle_model, features)
    entropies = np.array([entropy(p) for p in probs])
    return float(np.percentile(entropies, percentile, method="linear"))


def query_oracle(cfg: OracleConfig, video: VideoSample, subset: FrameSubset) -> OracleVerdict:
    """Judge a video from its selected frames only.

    The selected frames are mean-pooled and classified; entropy above the
    threshold means the oracle is not confident enough and abstains,
    otherwise it returns its argmax label (ties to the lowest class index),
    which may or may not match the ground truth.
    """
    indices = list(subset.indices)
    if any(not 0 <= i < video.n_frames for i in indices):
        raise IndexError(
            f"frame indices out of range for video {video.id!r} with {video.n_frames} frames"
        )
    features = pool_frames(video.frames[indices])
    probs = predict_proba(cfg.model, features)
    h = entropy(probs)
    if h > cfg.tau:
        return OracleVerdict(outcome=ABSTAINED, label=None, oracle_entropy=h)
    return OracleVerdict(outcome=LABELED, label=int(np.argmax(probs)), oracle_entropy=h)
