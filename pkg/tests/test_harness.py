import dataclasses

import numpy as np
import pytest

from frameal.classifier import TrainConfig
from frameal.harness import (
    ExperimentConfig,
    ExperimentReport,
    IterationRecord,
    ManifestSource,
    QueryRecord,
    RunRecord,
    SyntheticSource,
    accuracy_table,
    config_from_dict,
    config_to_dict,
    derive_seed,
    initial_state,
    load_report,
    prepare_run,
    render_accuracy_csv,
    render_oracle_csv,
    report_to_dict,
    report_to_json,
    run_experiment,
    run_single,
    save_report,
    select_batch,
    split_with_retry,
    summarize_oracle_stats,
)
from frameal.dataset import VideoSample

from conftest import make_videos


def tiny_config(**overrides):
    """A seconds-fast experiment: 2 iterations of 3-video batches on 100 videos."""
    defaults = dict(
        strategy="proposed",
        video_budget=3,
        frame_budget=4,
        iterations=2,
        seeds=(0,),
        split_sizes=(15, 20, 12, 30, 10),
        dataset=SyntheticSource(
            num_classes=3, videos_per_class=34, frames_per_video=10, dim=4, cluster_spread=1.5
        ),
        base_training=TrainConfig(learning_rate=0.05, epochs=40),
        oracle_training=TrainConfig(learning_rate=0.5, epochs=80),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


# ---------------------------------------------------------------------------
# seeds


def test_derive_seed_is_deterministic_and_role_sensitive():
    assert derive_seed(3, "videos") == derive_seed(3, "videos")
    assert derive_seed(3, "videos") != derive_seed(3, "frames")
    assert derive_seed(3, 1, "videos") != derive_seed(3, 2, "videos")
    assert derive_seed(0) != derive_seed(1)


# ---------------------------------------------------------------------------
# configuration


def test_config_defaults_match_documented_protocol():
    cfg = ExperimentConfig()
    assert cfg.video_budget == 25
    assert cfg.frame_budget == 100
    assert cfg.diversity_weight == 0.01
    assert cfg.iterations == 10
    assert cfg.seeds == (0, 1, 2)
    assert cfg.split_sizes == (250, 320, 150, 697, 185)
    assert cfg.runs == 3


def test_config_validation():
    with pytest.raises(ValueError, match="strategy"):
        ExperimentConfig(strategy="oracle")
    with pytest.raises(ValueError):
        ExperimentConfig(video_budget=0)
    with pytest.raises(ValueError):
        ExperimentConfig(diversity_weight=-0.1)
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=())


def test_config_round_trips_through_dict():
    for cfg in (tiny_config(), tiny_config(dataset=ManifestSource(path="data.jsonl"))):
        assert config_from_dict(config_to_dict(cfg)) == cfg


def test_config_from_dict_accepts_runs_count():
    cfg = config_from_dict({"runs": 4})
    assert cfg.seeds == (0, 1, 2, 3)
    # an explicit seed list wins over runs
    cfg = config_from_dict({"runs": 4, "seeds": [7]})
    assert cfg.seeds == (7,)


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys"):
        config_from_dict({"strategy": "rr", "budget": 5})


def test_config_from_dict_rejects_bad_dataset():
    with pytest.raises(ValueError, match="manifest.*synthetic|synthetic.*manifest"):
        config_from_dict({"dataset": {"path": "x"}})


# ---------------------------------------------------------------------------
# splitting with retry


def test_split_with_retry_eventually_covers_classes():
    videos = make_videos(num_classes=3, videos_per_class=12)
    splits = split_with_retry(videos, (6, 8, 5, 9, 4), seed=0, num_classes=3)
    assert {v.label for v in splits.labeled} == {0, 1, 2}
    assert {v.label for v in splits.oracle_train} == {0, 1, 2}


def test_split_with_retry_gives_up_when_coverage_is_impossible():
    videos = make_videos(num_classes=3, videos_per_class=12)
    with pytest.raises(ValueError, match="no class-covering split"):
        split_with_retry(videos, (1, 8, 5, 9, 4), seed=0, num_classes=3)


def test_split_with_retry_reraises_other_errors():
    videos = make_videos(num_classes=2, videos_per_class=3)
    with pytest.raises(ValueError, match="insufficient"):
        split_with_retry(videos, (6, 8, 5, 9, 4), seed=0, num_classes=2)


# ---------------------------------------------------------------------------
# the loop, per strategy


@pytest.mark.parametrize("strategy", ["proposed", "rr", "er", "ek"])
def test_run_bookkeeping_invariants(strategy):
    cfg = tiny_config(strategy=strategy)
    run = run_single(cfg, run_seed=0)

    assert run.initial_labeled == 15
    assert run.initial_unlabeled == 20
    assert len(run.iterations) == 2

    labeled_size = run.initial_labeled
    unlabeled_size = run.initial_unlabeled
    seen_ids: set[str] = set()
    for it in run.iterations:
        assert it.effective_budget == min(cfg.video_budget, unlabeled_size)
        assert it.correct + it.incorrect + it.discarded == it.effective_budget
        labeled_size += it.correct + it.incorrect
        unlabeled_size -= it.effective_budget
        assert it.labeled_pool_size == labeled_size
        assert it.unlabeled_pool_size == unlabeled_size
        ids = [q.video_id for q in it.queries]
        assert len(ids) == it.effective_budget
        assert not (set(ids) & seen_ids), "a video was queried twice"
        seen_ids.update(ids)
        assert 0.0 <= it.test_accuracy <= 1.0
        for q in it.queries:
            assert len(q.frame_indices) <= cfg.frame_budget
            if q.outcome == "labeled":
                assert q.label is not None and q.correct is not None
            else:
                assert q.label is None and q.correct is None

    if strategy == "proposed":
        for it in run.iterations:
            trace = np.asarray(it.objective_trace)
            assert trace.size >= 2
            assert np.all(np.diff(trace) >= -1e-9)
    else:
        assert all(it.objective_trace == () for it in run.iterations)


def test_identical_config_and_seed_reproduce_the_report_bytes():
    cfg = tiny_config(strategy="rr")
    a = report_to_json(run_experiment(cfg), include_timing=False)
    b = report_to_json(run_experiment(cfg), include_timing=False)
    assert a == b


def test_zero_diversity_weight_reduces_to_entropy_selection():
    cfg = tiny_config(diversity_weight=0.0)
    setup = prepare_run(cfg, run_seed=0)
    state = initial_state(setup.splits, cfg, setup.num_classes)
    proposed_indices, _ = select_batch(state, cfg, run_seed=0)
    er_cfg = dataclasses.replace(cfg, strategy="er")
    er_indices, _ = select_batch(state, er_cfg, run_seed=0)
    assert np.array_equal(proposed_indices, er_indices)


def test_run_stops_early_when_pool_is_exhausted():
    cfg = tiny_config(strategy="rr", video_budget=8, iterations=10)
    run = run_single(cfg, run_seed=0)
    # 20 unlabeled videos in batches of 8: 8 + 8 + 4, then the pool is empty
    assert [it.effective_budget for it in run.iterations] == [8, 8, 4]
    assert run.iterations[-1].unlabeled_pool_size == 0


def test_oracle_setup_reports_threshold_and_accuracy():
    setup = prepare_run(tiny_config(), run_seed=0)
    assert setup.oracle.tau >= 0
    assert 0.0 <= setup.oracle_accuracy <= 1.0
    pools = setup.splits.pools()
    assert len(pools["oracle_train"]) == 30
    assert len(pools["oracle_test"]) == 10


# ---------------------------------------------------------------------------
# aggregation over hand-built records


def fake_run(seed, accuracies, correct, incorrect, discarded, budget=25):
    iterations = []
    labeled = 250
    unlabeled = 320
    for i, acc in enumerate(accuracies, start=1):
        labeled += correct + incorrect
        unlabeled -= budget
        iterations.append(
            IterationRecord(
                iteration=i,
                effective_budget=budget,
                queries=(),
                correct=correct,
                incorrect=incorrect,
                discarded=discarded,
                labeled_pool_size=labeled,
                unlabeled_pool_size=unlabeled,
                test_accuracy=acc,
                objective_trace=(),
                wall_clock_s=0.01,
            )
        )
    return RunRecord(
        seed=seed,
        tau=0.5,
        oracle_accuracy=0.72,
        initial_accuracy=0.6,
        initial_labeled=250,
        initial_unlabeled=320,
        iterations=tuple(iterations),
        final_model={"format_version": 1},
    )


def test_accuracy_table_mean_and_sample_std():
    report = ExperimentReport(
        config=ExperimentConfig(strategy="rr"),
        runs=(
            fake_run(0, [0.5, 0.6], 10, 5, 10),
            fake_run(1, [0.7, 0.8], 10, 5, 10),
        ),
    )
    rows = accuracy_table(report)
    assert rows[0]["iteration"] == 1
    assert rows[0]["mean"] == pytest.approx(0.6)
    # sample std of {0.5, 0.7} is sqrt(0.02)
    assert rows[0]["std"] == pytest.approx(np.sqrt(0.02))
    assert rows[1]["mean"] == pytest.approx(0.7)


def test_oracle_stats_percentages_hand_case():
    """146 correct, 78 incorrect and 26 discarded of 250 queried give
    58.4, 31.2 and 10.4 percent."""
    big = IterationRecord(
        iteration=1,
        effective_budget=250,
        queries=(),
        correct=146,
        incorrect=78,
        discarded=26,
        labeled_pool_size=250 + 224,
        unlabeled_pool_size=320 - 250,
        test_accuracy=0.7,
        objective_trace=(),
        wall_clock_s=0.1,
    )
    run = dataclasses.replace(fake_run(0, [0.5], 10, 5, 10), iterations=(big,))
    report = ExperimentReport(config=ExperimentConfig(strategy="proposed"), runs=(run,))
    stats = summarize_oracle_stats(report)
    assert stats["correct_pct"]["mean"] == pytest.approx(58.4)
    assert stats["incorrect_pct"]["mean"] == pytest.approx(31.2)
    assert stats["discarded_pct"]["mean"] == pytest.approx(10.4)
    assert stats["total_queried"] == [250]


def test_oracle_stats_percentages_sum_to_100():
    report = ExperimentReport(
        config=ExperimentConfig(strategy="rr"),
        runs=(fake_run(0, [0.5, 0.6], 9, 6, 10), fake_run(1, [0.6, 0.7], 12, 3, 10)),
    )
    stats = summarize_oracle_stats(report)
    total = sum(stats[k]["mean"] for k in ("correct_pct", "incorrect_pct", "discarded_pct"))
    assert total == pytest.approx(100.0, abs=0.1)


def test_aggregation_rejects_empty_reports():
    report = ExperimentReport(config=ExperimentConfig(), runs=())
    with pytest.raises(ValueError):
        accuracy_table(report)
    with pytest.raises(ValueError):
        summarize_oracle_stats(report)


# ---------------------------------------------------------------------------
# report files


def small_report():
    return ExperimentReport(
        config=ExperimentConfig(strategy="rr"),
        runs=(fake_run(0, [0.5, 0.6], 10, 5, 10),),
    )


def test_report_round_trips_through_file(tmp_path):
    path = tmp_path / "report.json"
    save_report(path, small_report())
    raw = load_report(path)
    assert raw["format_version"] == 1
    assert raw["config"]["strategy"] == "rr"
    assert len(raw["runs"]) == 1
    assert raw["runs"][0]["iterations"][0]["test_accuracy"] == 0.5
    assert raw["aggregate"]["accuracy"][0]["mean"] == 0.5


def test_report_timing_is_optional():
    with_timing = report_to_dict(small_report(), include_timing=True)
    without = report_to_dict(small_report(), include_timing=False)
    assert "wall_clock_s" in with_timing["runs"][0]["iterations"][0]
    assert "wall_clock_s" not in without["runs"][0]["iterations"][0]


def test_load_report_rejects_unknown_version(tmp_path):
    path = tmp_path / "report.json"
    path.write_text('{"format_version": 99}', encoding="utf-8")
    with pytest.raises(ValueError, match="format version"):
        load_report(path)


def test_accuracy_csv_layout(tmp_path):
    path = tmp_path / "report.json"
    save_report(path, small_report())
    csv = render_accuracy_csv([load_report(path)])
    lines = csv.strip().split("\n")
    assert lines[0] == "strategy,iteration,mean_accuracy,std_accuracy"
    assert lines[1] == "rr,1,0.500000,0.000000"
    assert lines[2] == "rr,2,0.600000,0.000000"


def test_oracle_csv_layout(tmp_path):
    path = tmp_path / "report.json"
    save_report(path, small_report())
    csv = render_oracle_csv([load_report(path)])
    lines = csv.strip().split("\n")
    assert lines[0].startswith("strategy,total_queried,correct_mean")
    cells = lines[1].split(",")
    assert cells[0] == "rr"
    assert cells[1] == "50"  # two iterations of 25
    assert cells[2] == "40.00"  # 20 correct of 50 queried


# ---------------------------------------------------------------------------
# manifest-backed experiments


def test_manifest_source_runs_end_to_end(small_manifest):
    cfg = tiny_config(
        strategy="rr",
        dataset=ManifestSource(path=str(small_manifest)),
        split_sizes=(12, 12, 10, 15, 8),
    )
    report = run_experiment(cfg)
    assert len(report.runs) == 1
    assert len(report.runs[0].iterations) == 2


def test_failed_run_names_the_seed():
    cfg = tiny_config(dataset=ManifestSource(path="/nonexistent/manifest.jsonl"))
    with pytest.raises(RuntimeError, match="seed 0"):
        run_experiment(cfg)
