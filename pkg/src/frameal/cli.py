"""Command-line entry point: run experiments, emit synthetic data, render reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from .dataset import VideoSample, generate_synthetic, write_dataset
from .harness import (
    config_from_dict,
    load_report,
    render_accuracy_csv,
    render_oracle_csv,
    report_to_json,
    run_experiment,
    summarize_oracle_stats,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="frameal",
        description="Frame-level active learning: experiments, datasets, reports, annotation service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="YAML/JSON config file mirroring ExperimentConfig")
    p_run.add_argument("--strategy", choices=("proposed", "rr", "er", "ek"), help="override the configured strategy")
    p_run.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    p_run.add_argument("--out", default=".", metavar="DIR", help="directory for the report file")

    p_synth = sub.add_parser("synth", help="emit a synthetic dataset manifest")
    p_synth.add_argument("--out", required=True, metavar="FILE", help="manifest file to write")
    p_synth.add_argument("--classes", type=int, default=5)
    p_synth.add_argument("--videos-per-class", type=int, default=340)
    p_synth.add_argument("--frames", type=int, default=360, help="frames per video")
    p_synth.add_argument("--dim", type=int, default=16, help="embedding dimension")
    p_synth.add_argument("--spread", type=float, default=2.1, help="per-video cluster spread")
    p_synth.add_argument("--noise", type=float, default=1.0, help="per-frame noise scale")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--assets",
        action="store_true",
        help="also render one PNG per frame (requires pillow) so the manifest can drive annotation sessions",
    )

    p_report = sub.add_parser("report", help="render plot-ready CSVs from report files")
    p_report.add_argument("reports", nargs="+", metavar="REPORT", help="report files from `frameal run`")
    p_report.add_argument("--out", default=".", metavar="DIR", help="directory for the CSV files")

    p_serve = sub.add_parser("serve", help="start the annotation service")
    p_serve.add_argument("--state-dir", required=True, help="directory for session audit logs")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "report":
        return _cmd_report(args)
    if args.command == "serve":
        return _cmd_serve(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


def _cmd_run(args) -> int:
    raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        print(f"error: config must be a key/value document, got {type(raw).__name__}", file=sys.stderr)
        return 2
    if args.strategy is not None:
        raw["strategy"] = args.strategy
    if args.seed is not None:
        raw.pop("runs", None)
        raw["seeds"] = [args.seed]
    try:
        cfg = config_from_dict(raw)
    except (ValueError, TypeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2

    report = run_experiment(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"report_{cfg.strategy}.json"
    out_path.write_text(report_to_json(report), encoding="utf-8")

    finals = [r.iterations[-1].test_accuracy for r in report.runs if r.iterations]
    oracle = summarize_oracle_stats(report)
    print(f"strategy {cfg.strategy}: {len(report.runs)} runs x {cfg.iterations} iterations")
    print(f"final accuracy {np.mean(finals):.4f} +- {np.std(finals, ddof=1) if len(finals) > 1 else 0.0:.4f}")
    print(
        "oracle verdicts: "
        f"correct {oracle['correct_pct']['mean']:.2f}% "
        f"incorrect {oracle['incorrect_pct']['mean']:.2f}% "
        f"discarded {oracle['discarded_pct']['mean']:.2f}%"
    )
    print(f"report written to {out_path}")
    return 0


def _cmd_synth(args) -> int:
    try:
        videos = generate_synthetic(
            num_classes=args.classes,
            videos_per_class=args.videos_per_class,
            frames_per_video=args.frames,
            dim=args.dim,
            cluster_spread=args.spread,
            frame_noise=args.noise,
            seed=args.seed,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    if args.assets:
        asset_dir = out.parent / "assets"
        videos = [attach_rendered_assets(v, out.parent, asset_dir) for v in videos]
    write_dataset(out, videos, num_classes=args.classes)
    n_frames = sum(v.n_frames for v in videos)
    print(f"wrote {len(videos)} videos ({n_frames} frames, dim {args.dim}) to {out}")
    if args.assets:
        print(f"rendered {n_frames} frame images under {out.parent / 'assets'}")
    return 0


def attach_rendered_assets(video: VideoSample, manifest_root: Path, asset_dir: Path) -> VideoSample:
    """Render one small PNG per frame and return the video with asset paths."""
    try:
        from PIL import Image
    except ImportError as exc:
        raise SystemExit(
            "rendering frame assets requires pillow; install with `pip install frameal[assets]`"
        ) from exc
    video_dir = asset_dir / video.id
    video_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(video.frames):
        side = int(np.ceil(np.sqrt(frame.size)))
        cells = np.zeros(side * side)
        cells[: frame.size] = frame
        lo, hi = cells.min(), cells.max()
        scale = (hi - lo) if hi > lo else 1.0
        gray = ((cells - lo) / scale * 255).astype(np.uint8).reshape(side, side)
        rgb = np.stack([gray, np.flipud(gray), np.fliplr(gray)], axis=-1)
        image = Image.fromarray(rgb, mode="RGB").resize((64, 64), Image.NEAREST)
        path = video_dir / f"frame_{i:04d}.png"
        image.save(path)
        paths.append(str(path.relative_to(manifest_root)))
    return VideoSample(
        id=video.id, frames=video.frames, label=video.label, frame_assets=tuple(paths)
    )


def _cmd_report(args) -> int:
    try:
        reports = [load_report(p) for p in args.reports]
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    accuracy_path = out_dir / "accuracy.csv"
    oracle_path = out_dir / "oracle.csv"
    accuracy_path.write_text(render_accuracy_csv(reports), encoding="utf-8")
    oracle_path.write_text(render_oracle_csv(reports), encoding="utf-8")
    print(f"wrote {accuracy_path} and {oracle_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.state_dir), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
