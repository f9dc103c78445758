"""End-to-end active-learning experiments.

Runs the query loop for one of four strategies (proposed, rr, er, ek),
keeps the pool bookkeeping honest (every queried video leaves the unlabeled
pool; abstentions are discarded and consume budget), retrains the base
classifier from scratch each iteration, and aggregates accuracy and oracle
statistics across seeded runs into a versioned report.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import Model, TrainConfig, evaluate_accuracy, model_to_dict, train
from .dataset import (
    DatasetSplits,
    VideoSample,
    generate_synthetic,
    load_dataset,
    pool_video,
    split_dataset,
)
from .frame_select import FrameSubset, kcenter_greedy, kmeans_frames, random_frames
from .oracle import LABELED, OracleConfig, OracleVerdict, calibrate_threshold, query_oracle
from .video_select import (
    DiversityMatrix,
    diversity_matrix,
    entropy_vector,
    objective_matrix,
    prune_diversity,
    select_videos_entropy,
    select_videos_random,
    shift_to_psd,
    truncated_power_select,
)

REPORT_FORMAT_VERSION = 1
STRATEGIES = ("proposed", "rr", "er", "ek")
SPLIT_RETRIES = 20


def derive_seed(*parts: int | str) -> int:
    """Stable sub-seed from a base seed and a role path (e.g. iteration, purpose)."""
    entropy_words = [
        zlib.crc32(p.encode("utf-8")) if isinstance(p, str) else int(p) & 0xFFFFFFFF
        for p in parts
    ]
    return int(np.random.SeedSequence(entropy_words).generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SyntheticSource:
    """Generate a fresh synthetic dataset per run, seeded by the run seed."""

    num_classes: int = 5
    videos_per_class: int = 340
    frames_per_video: int = 360
    dim: int = 16
    cluster_spread: float = 2.1
    frame_noise: float = 1.0


@dataclass(frozen=True)
class ManifestSource:
    """Load every run's videos from one manifest file; only the split varies."""

    path: str


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "proposed"
    video_budget: int = 25
    frame_budget: int = 100
    diversity_weight: float = 0.01
    iterations: int = 10
    seeds: tuple[int, ...] = (0, 1, 2)
    split_sizes: tuple[int, int, int, int, int] = (250, 320, 150, 697, 185)
    dataset: SyntheticSource | ManifestSource = field(default_factory=SyntheticSource)
    # Base training deliberately uses a short low-rate schedule: argmax accuracy
    # matches the converged model on this data, but the entropy scale stays
    # compressed so the diversity term meaningfully shapes video selection.
    base_training: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.01, epochs=10))
    oracle_training: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=300))
    oracle_percentile: float = 50.0
    bandwidth: float | str = "median"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.video_budget < 1 or self.frame_budget < 1 or self.iterations < 1:
            raise ValueError("video_budget, frame_budget and iterations must be >= 1")
        if self.diversity_weight < 0:
            raise ValueError("diversity_weight must be >= 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "split_sizes", tuple(int(s) for s in self.split_sizes))

    @property
    def runs(self) -> int:
        return len(self.seeds)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    if isinstance(cfg.dataset, ManifestSource):
        dataset: dict = {"manifest": cfg.dataset.path}
    else:
        s = cfg.dataset
        dataset = {
            "synthetic": {
                "num_classes": s.num_classes,
                "videos_per_class": s.videos_per_class,
                "frames_per_video": s.frames_per_video,
                "dim": s.dim,
                "cluster_spread": s.cluster_spread,
                "frame_noise": s.frame_noise,
            }
        }
    return {
        "strategy": cfg.strategy,
        "video_budget": cfg.video_budget,
        "frame_budget": cfg.frame_budget,
        "diversity_weight": cfg.diversity_weight,
        "iterations": cfg.iterations,
        "seeds": list(cfg.seeds),
        "split_sizes": list(cfg.split_sizes),
        "dataset": dataset,
        "base_training": _train_config_to_dict(cfg.base_training),
        "oracle_training": _train_config_to_dict(cfg.oracle_training),
        "oracle_percentile": cfg.oracle_percentile,
        "bandwidth": cfg.bandwidth,
    }


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a parsed key/value document (YAML or JSON)."""
    raw = dict(raw)
    kwargs: dict = {}
    for key in (
        "strategy",
        "video_budget",
        "frame_budget",
        "diversity_weight",
        "iterations",
        "oracle_percentile",
        "bandwidth",
    ):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if "seeds" in raw:
        kwargs["seeds"] = tuple(raw.pop("seeds"))
        raw.pop("runs", None)
    elif "runs" in raw:
        kwargs["seeds"] = tuple(range(int(raw.pop("runs"))))
    if "split_sizes" in raw:
        kwargs["split_sizes"] = tuple(raw.pop("split_sizes"))
    if "dataset" in raw:
        ds = raw.pop("dataset")
        if "manifest" in ds:
            kwargs["dataset"] = ManifestSource(path=str(ds["manifest"]))
        elif "synthetic" in ds:
            kwargs["dataset"] = SyntheticSource(**ds["synthetic"])
        else:
            raise ValueError("dataset must specify either 'manifest' or 'synthetic'")
    for key in ("base_training", "oracle_training"):
        if key in raw:
            kwargs[key] = TrainConfig(**raw.pop(key))
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    return ExperimentConfig(**kwargs)


def _train_config_to_dict(cfg: TrainConfig) -> dict:
    return {
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "l2": cfg.l2,
        "seed": cfg.seed,
    }


# ---------------------------------------------------------------------------
# run records


@dataclass(frozen=True)
class QueryRecord:
    video_id: str
    frame_indices: tuple[int, ...]
    outcome: str
    oracle_entropy: float
    label: int | None
    correct: bool | None


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    effective_budget: int
    queries: tuple[QueryRecord, ...]
    correct: int
    incorrect: int
    discarded: int
    labeled_pool_size: int
    unlabeled_pool_size: int
    test_accuracy: float
    objective_trace: tuple[float, ...]
    wall_clock_s: float


@dataclass(frozen=True)
class RunRecord:
    seed: int
    tau: float
    oracle_accuracy: float
    initial_accuracy: float
    initial_labeled: int
    initial_unlabeled: int
    iterations: tuple[IterationRecord, ...]
    final_model: dict


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    runs: tuple[RunRecord, ...]


# ---------------------------------------------------------------------------
# the loop


@dataclass(frozen=True)
class TrainExample:
    """A video plus the label it is trained under (which may be oracle-wrong)."""

    video: VideoSample
    label: int


@dataclass(frozen=True)
class ALState:
    labeled: tuple[TrainExample, ...]
    unlabeled: tuple[VideoSample, ...]
    model: Model
    diversity: DiversityMatrix | None  # aligned with ``unlabeled``; proposed only
    iteration: int  # completed iterations


@dataclass(frozen=True)
class RunContext:
    cfg: ExperimentConfig
    oracle: OracleConfig
    test_pool: tuple[VideoSample, ...]
    num_classes: int
    run_seed: int


def _train_on(labeled: tuple[TrainExample, ...], cfg: TrainConfig, num_classes: int) -> Model:
    features = np.stack([pool_video(ex.video) for ex in labeled])
    labels = np.array([ex.label for ex in labeled])
    return train(features, labels, cfg, num_classes)


def initial_state(splits: DatasetSplits, cfg: ExperimentConfig, num_classes: int) -> ALState:
    labeled = tuple(TrainExample(video=v, label=v.label) for v in splits.labeled)
    model = _train_on(labeled, cfg.base_training, num_classes)
    diversity = None
    if cfg.strategy == "proposed":
        # computed once up front; later iterations only prune rows/columns
        diversity = diversity_matrix(splits.unlabeled, cfg.bandwidth)
    return ALState(
        labeled=labeled,
        unlabeled=splits.unlabeled,
        model=model,
        diversity=diversity,
        iteration=0,
    )


def select_batch(
    state: ALState, cfg: ExperimentConfig, run_seed: int
) -> tuple[np.ndarray, tuple[float, ...]]:
    """Pick this iteration's video indices into ``state.unlabeled``."""
    budget = min(cfg.video_budget, len(state.unlabeled))
    iteration = state.iteration + 1
    if cfg.strategy == "proposed":
        entropies = entropy_vector(state.model, state.unlabeled)
        obj = shift_to_psd(objective_matrix(entropies, state.diversity, cfg.diversity_weight))
        result = truncated_power_select(obj, budget)
        return result.selection.indices, result.objective_trace
    if cfg.strategy == "rr":
        seed = derive_seed(run_seed, iteration, "videos")
        return select_videos_random(len(state.unlabeled), budget, seed).indices, ()
    if cfg.strategy in ("er", "ek"):
        entropies = entropy_vector(state.model, state.unlabeled)
        return select_videos_entropy(entropies, budget).indices, ()
    raise ValueError(f"unknown strategy {cfg.strategy!r}")


def select_frames(
    video: VideoSample, position: int, iteration: int, cfg: ExperimentConfig, run_seed: int
) -> FrameSubset:
    if cfg.strategy == "proposed":
        return kcenter_greedy(video.frames, cfg.frame_budget)
    if cfg.strategy == "ek":
        seed = derive_seed(run_seed, iteration, "frames", position)
        return kmeans_frames(video.frames, cfg.frame_budget, seed)
    seed = derive_seed(run_seed, iteration, "frames", position)
    return random_frames(video.n_frames, cfg.frame_budget, seed)


def advance_pools(
    state: ALState,
    cfg: ExperimentConfig,
    num_classes: int,
    selected,
    verdict_labels,
) -> ALState:
    """Fold one batch of verdicts into the pools and retrain from scratch.

    ``verdict_labels`` aligns with ``selected``; None marks an abstention.
    Every selected video leaves the unlabeled pool either way.
    """
    if len(selected) != len(verdict_labels):
        raise ValueError("verdict_labels must align with selected indices")
    new_examples = tuple(
        TrainExample(video=state.unlabeled[int(i)], label=int(lbl))
        for i, lbl in zip(selected, verdict_labels)
        if lbl is not None
    )
    selected_set = set(int(i) for i in selected)
    new_unlabeled = tuple(v for i, v in enumerate(state.unlabeled) if i not in selected_set)
    new_diversity = None
    if state.diversity is not None:
        new_diversity, _ = prune_diversity(state.diversity, selected_set)
    new_labeled = state.labeled + new_examples
    new_model = _train_on(new_labeled, cfg.base_training, num_classes)
    return ALState(
        labeled=new_labeled,
        unlabeled=new_unlabeled,
        model=new_model,
        diversity=new_diversity,
        iteration=state.iteration + 1,
    )


def run_al_iteration(state: ALState, ctx: RunContext) -> tuple[ALState, IterationRecord]:
    """One query-label-retrain-evaluate round.

    Selected videos leave the unlabeled pool whether or not the oracle labels
    them; only labeled ones (with the oracle's possibly-wrong label) join the
    training pool. The base model is retrained from scratch afterwards.
    """
    if not state.unlabeled:
        raise ValueError("unlabeled pool is empty; nothing to query")
    started = time.perf_counter()
    selected, objective_trace = select_batch(state, ctx.cfg, ctx.run_seed)

    queries = []
    verdict_labels: list[int | None] = []
    correct = incorrect = discarded = 0
    for position, index in enumerate(selected):
        video = state.unlabeled[index]
        subset = select_frames(video, position, state.iteration + 1, ctx.cfg, ctx.run_seed)
        verdict = query_oracle(ctx.oracle, video, subset)
        if verdict.outcome == LABELED and video.label is not None:
            verdict = replace(verdict, correct=verdict.label == video.label)
        if verdict.outcome == LABELED:
            verdict_labels.append(verdict.label)
            if verdict.correct:
                correct += 1
            else:
                incorrect += 1
        else:
            verdict_labels.append(None)
            discarded += 1
        queries.append(
            QueryRecord(
                video_id=video.id,
                frame_indices=subset.indices,
                outcome=verdict.outcome,
                oracle_entropy=verdict.oracle_entropy,
                label=verdict.label,
                correct=verdict.correct,
            )
        )

    new_state = advance_pools(state, ctx.cfg, ctx.num_classes, selected, verdict_labels)
    accuracy = evaluate_accuracy(new_state.model, ctx.test_pool)

    record = IterationRecord(
        iteration=new_state.iteration,
        effective_budget=len(selected),
        queries=tuple(queries),
        correct=correct,
        incorrect=incorrect,
        discarded=discarded,
        labeled_pool_size=len(new_state.labeled),
        unlabeled_pool_size=len(new_state.unlabeled),
        test_accuracy=accuracy,
        objective_trace=objective_trace,
        wall_clock_s=time.perf_counter() - started,
    )
    return new_state, record


# ---------------------------------------------------------------------------
# whole experiments


def load_run_videos(cfg: ExperimentConfig, run_seed: int) -> tuple[list[VideoSample], int]:
    if isinstance(cfg.dataset, ManifestSource):
        manifest = load_dataset(cfg.dataset.path)
        return list(manifest.videos), manifest.num_classes
    s = cfg.dataset
    videos = generate_synthetic(
        num_classes=s.num_classes,
        videos_per_class=s.videos_per_class,
        frames_per_video=s.frames_per_video,
        dim=s.dim,
        cluster_spread=s.cluster_spread,
        frame_noise=s.frame_noise,
        seed=derive_seed(run_seed, "data"),
    )
    return videos, s.num_classes


def split_with_retry(
    videos: list[VideoSample],
    sizes: tuple[int, int, int, int, int],
    seed: int,
    num_classes: int,
) -> DatasetSplits:
    """Split, retrying with derived seeds when class coverage fails."""
    last_error: Exception | None = None
    for attempt in range(SPLIT_RETRIES):
        try:
            return split_dataset(videos, sizes, derive_seed(seed, "split", attempt), num_classes)
        except ValueError as exc:
            if "class coverage" not in str(exc):
                raise
            last_error = exc
    raise ValueError(f"no class-covering split found after {SPLIT_RETRIES} attempts") from last_error


@dataclass(frozen=True)
class RunSetup:
    splits: DatasetSplits
    oracle: OracleConfig
    oracle_accuracy: float
    num_classes: int


def prepare_run(cfg: ExperimentConfig, run_seed: int) -> RunSetup:
    """Split the data and train/calibrate the oracle for one seeded run."""
    videos, num_classes = load_run_videos(cfg, run_seed)
    splits = split_with_retry(videos, cfg.split_sizes, run_seed, num_classes)
    oracle_examples = tuple(TrainExample(video=v, label=v.label) for v in splits.oracle_train)
    oracle_model = _train_on(oracle_examples, cfg.oracle_training, num_classes)
    tau = calibrate_threshold(oracle_model, splits.oracle_test, cfg.oracle_percentile)
    oracle_accuracy = evaluate_accuracy(oracle_model, splits.oracle_test)
    return RunSetup(
        splits=splits,
        oracle=OracleConfig(model=oracle_model, tau=tau, percentile=cfg.oracle_percentile),
        oracle_accuracy=oracle_accuracy,
        num_classes=num_classes,
    )


def run_single(cfg: ExperimentConfig, run_seed: int) -> RunRecord:
    setup = prepare_run(cfg, run_seed)
    ctx = RunContext(
        cfg=cfg,
        oracle=setup.oracle,
        test_pool=setup.splits.test,
        num_classes=setup.num_classes,
        run_seed=run_seed,
    )
    state = initial_state(setup.splits, cfg, setup.num_classes)
    initial_accuracy = evaluate_accuracy(state.model, ctx.test_pool)
    records = []
    for _ in range(cfg.iterations):
        if not state.unlabeled:
            break
        try:
            state, record = run_al_iteration(state, ctx)
        except Exception as exc:
            raise RuntimeError(f"iteration {state.iteration + 1} failed: {exc}") from exc
        records.append(record)
    return RunRecord(
        seed=run_seed,
        tau=setup.oracle.tau,
        oracle_accuracy=setup.oracle_accuracy,
        initial_accuracy=initial_accuracy,
        initial_labeled=len(setup.splits.labeled),
        initial_unlabeled=len(setup.splits.unlabeled),
        iterations=tuple(records),
        final_model=model_to_dict(state.model),
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the configured strategy once per seed and collect all records."""
    runs = []
    for run_seed in cfg.seeds:
        try:
            runs.append(run_single(cfg, run_seed))
        except Exception as exc:
            raise RuntimeError(f"run with seed {run_seed} failed: {exc}") from exc
    return ExperimentReport(config=cfg, runs=tuple(runs))


# ---------------------------------------------------------------------------
# aggregation and report files


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def accuracy_table(report: ExperimentReport) -> list[dict]:
    """Per-iteration mean and sample std of test accuracy across runs."""
    if not report.runs:
        raise ValueError("report has no runs")
    depth = max(len(r.iterations) for r in report.runs)
    rows = []
    for i in range(depth):
        values = [r.iterations[i].test_accuracy for r in report.runs if len(r.iterations) > i]
        mean, std = _mean_std(values)
        rows.append({"iteration": i + 1, "mean": mean, "std": std})
    return rows


def summarize_oracle_stats(report: ExperimentReport) -> dict:
    """Whole-run oracle percentages (correct / incorrect / discarded), mean +- std."""
    if not report.runs:
        raise ValueError("report has no runs")
    per_run = {"correct": [], "incorrect": [], "discarded": []}
    totals = []
    for run in report.runs:
        queried = sum(it.effective_budget for it in run.iterations)
        if queried == 0:
            raise ValueError(f"run with seed {run.seed} queried no videos")
        totals.append(queried)
        per_run["correct"].append(100.0 * sum(it.correct for it in run.iterations) / queried)
        per_run["incorrect"].append(100.0 * sum(it.incorrect for it in run.iterations) / queried)
        per_run["discarded"].append(100.0 * sum(it.discarded for it in run.iterations) / queried)
    out: dict = {"strategy": report.config.strategy, "total_queried": totals}
    for key, values in per_run.items():
        mean, std = _mean_std(values)
        out[f"{key}_pct"] = {"mean": mean, "std": std, "per_run": values}
    return out


def report_to_dict(report: ExperimentReport, include_timing: bool = True) -> dict:
    runs = []
    for run in report.runs:
        iterations = []
        for it in run.iterations:
            row = {
                "iteration": it.iteration,
                "effective_budget": it.effective_budget,
                "correct": it.correct,
                "incorrect": it.incorrect,
                "discarded": it.discarded,
                "labeled_pool_size": it.labeled_pool_size,
                "unlabeled_pool_size": it.unlabeled_pool_size,
                "test_accuracy": it.test_accuracy,
                "objective_trace": list(it.objective_trace),
                "queries": [
                    {
                        "video_id": q.video_id,
                        "frame_indices": list(q.frame_indices),
                        "outcome": q.outcome,
                        "oracle_entropy": q.oracle_entropy,
                        "label": q.label,
                        "correct": q.correct,
                    }
                    for q in it.queries
                ],
            }
            if include_timing:
                row["wall_clock_s"] = it.wall_clock_s
            iterations.append(row)
        runs.append(
            {
                "seed": run.seed,
                "tau": run.tau,
                "oracle_accuracy": run.oracle_accuracy,
                "initial_accuracy": run.initial_accuracy,
                "initial_labeled": run.initial_labeled,
                "initial_unlabeled": run.initial_unlabeled,
                "iterations": iterations,
                "final_model": run.final_model,
            }
        )
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "config": config_to_dict(report.config),
        "runs": runs,
        "aggregate": {
            "accuracy": accuracy_table(report),
            "oracle": summarize_oracle_stats(report),
        },
    }


def report_to_json(report: ExperimentReport, include_timing: bool = True) -> str:
    """Serialize a report; ``include_timing=False`` gives the canonical form,
    which is byte-identical across repeated runs of the same config + seeds."""
    return json.dumps(report_to_dict(report, include_timing), sort_keys=True, indent=2) + "\n"


def save_report(path: str | Path, report: ExperimentReport, include_timing: bool = True) -> None:
    Path(path).write_text(report_to_json(report, include_timing), encoding="utf-8")


def load_report(path: str | Path) -> dict:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if raw.get("format_version") != REPORT_FORMAT_VERSION:
        raise ValueError(f"unsupported report format version: {raw.get('format_version')!r}")
    return raw


def render_accuracy_csv(reports: list[dict]) -> str:
    """Plot-ready CSV: one row per (strategy, iteration) with mean and std."""
    lines = ["strategy,iteration,mean_accuracy,std_accuracy"]
    for raw in reports:
        strategy = raw["config"]["strategy"]
        for row in raw["aggregate"]["accuracy"]:
            lines.append(f"{strategy},{row['iteration']},{row['mean']:.6f},{row['std']:.6f}")
    return "\n".join(lines) + "\n"


def render_oracle_csv(reports: list[dict]) -> str:
    """Oracle outcome percentages per strategy, mean +- std across runs."""
    lines = [
        "strategy,total_queried,correct_mean,correct_std,"
        "incorrect_mean,incorrect_std,discarded_mean,discarded_std"
    ]
    for raw in reports:
        oracle = raw["aggregate"]["oracle"]
        total = sum(oracle["total_queried"])
        cells = [oracle["strategy"], str(total)]
        for key in ("correct_pct", "incorrect_pct", "discarded_pct"):
            cells.append(f"{oracle[key]['mean']:.2f}")
            cells.append(f"{oracle[key]['std']:.2f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
