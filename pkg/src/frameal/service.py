"""HTTP annotation service: a human (or scripted client) stands in for the oracle.

Each session runs the proposed query loop over a manifest dataset. The service
selects videos and exemplar frames exactly like the in-process experiment loop,
then waits for label/abstain verdicts over HTTP before folding them in and
retraining. Verdicts are appended to a per-session audit log before they are
applied, so a restarted service reconstructs every session by replay.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import threading
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .classifier import Model, evaluate_accuracy
from .dataset import DatasetError, VideoSample, load_dataset
from .harness import (
    ALState,
    ExperimentConfig,
    advance_pools,
    config_from_dict,
    initial_state,
    select_batch,
    select_frames,
    split_with_retry,
)

log = logging.getLogger(__name__)

ABSTAIN = "abstain"

SELECTING = "selecting"
AWAITING_LABELS = "awaiting_labels"
TRAINING = "training"
FINISHED = "finished"


class ServiceError(HTTPException):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(status_code=status_code, detail={"code": code, "message": message})


@dataclass(frozen=True)
class QueryItem:
    video_id: str
    pool_index: int  # position in the unlabeled pool at selection time
    frame_indices: tuple[int, ...]
    asset_paths: tuple[str, ...]


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot of one session; every transition builds a new one."""

    id: str
    manifest_path: str
    seed: int
    cfg: ExperimentConfig
    num_classes: int
    class_names: tuple[str, ...]
    asset_root: str
    asset_paths: frozenset[str]
    test_pool: tuple[VideoSample, ...]
    al: ALState
    status: str
    batch: tuple[QueryItem, ...]
    verdicts: tuple[tuple[str, int | None], ...]  # accepted this batch, submit order
    accuracies: tuple[float, ...]
    initial_accuracy: float
    labeled_total: int
    abstained_total: int

    @property
    def pending(self) -> tuple[QueryItem, ...]:
        done = {vid for vid, _ in self.verdicts}
        return tuple(item for item in self.batch if item.video_id not in done)


class CreateSessionRequest(BaseModel):
    manifest: str
    seed: int = 0
    config: dict = {}


class SubmitLabelRequest(BaseModel):
    video_id: str
    verdict: int | str


# ---------------------------------------------------------------------------
# pure session transitions


def build_config(user_config: dict, manifest: str, seed: int) -> ExperimentConfig:
    overrides = dict(user_config)
    if overrides.get("strategy", "proposed") != "proposed":
        raise ValueError("annotation sessions always run the proposed strategy")
    for key in ("dataset", "seeds", "runs", "oracle_training", "oracle_percentile"):
        if key in overrides:
            raise ValueError(f"config key {key!r} is not settable for an annotation session")
    overrides["strategy"] = "proposed"
    overrides["seeds"] = [seed]
    overrides["dataset"] = {"manifest": manifest}
    return config_from_dict(overrides)


def create_session_state(session_id: str, request: CreateSessionRequest) -> SessionState:
    try:
        cfg = build_config(request.config, request.manifest, request.seed)
    except (ValueError, TypeError) as exc:
        raise ServiceError(422, "invalid_config", str(exc)) from exc
    try:
        manifest = load_dataset(request.manifest)
    except FileNotFoundError as exc:
        raise ServiceError(422, "invalid_config", f"manifest not found: {request.manifest}") from exc
    except DatasetError as exc:
        raise ServiceError(422, "invalid_config", str(exc)) from exc
    missing = [v.id for v in manifest.videos if v.frame_assets is None]
    if missing:
        raise ServiceError(
            422,
            "missing_assets",
            f"manifest must list frame_assets for every video so frames can be shown "
            f"to the annotator; {len(missing)} videos have none (first: {missing[0]})",
        )
    try:
        splits = split_with_retry(
            list(manifest.videos), cfg.split_sizes, request.seed, manifest.num_classes
        )
    except ValueError as exc:
        raise ServiceError(422, "invalid_config", str(exc)) from exc
    asset_paths = frozenset(
        path for v in manifest.videos if v.frame_assets for path in v.frame_assets
    )
    al = initial_state(splits, cfg, manifest.num_classes)
    state = SessionState(
        id=session_id,
        manifest_path=request.manifest,
        seed=request.seed,
        cfg=cfg,
        num_classes=manifest.num_classes,
        class_names=manifest.class_names,
        asset_root=str(Path(manifest.root).resolve()),
        asset_paths=asset_paths,
        test_pool=splits.test,
        al=al,
        status=SELECTING,
        batch=(),
        verdicts=(),
        accuracies=(),
        initial_accuracy=evaluate_accuracy(al.model, splits.test),
        labeled_total=0,
        abstained_total=0,
    )
    return start_iteration(state)


def start_iteration(state: SessionState) -> SessionState:
    """Select the next batch, or finish when the loop is done."""
    if state.al.iteration >= state.cfg.iterations or not state.al.unlabeled:
        return replace(state, status=FINISHED, batch=(), verdicts=())
    selected, _ = select_batch(state.al, state.cfg, state.seed)
    batch = []
    for position, index in enumerate(selected):
        video = state.al.unlabeled[int(index)]
        subset = select_frames(video, position, state.al.iteration + 1, state.cfg, state.seed)
        batch.append(
            QueryItem(
                video_id=video.id,
                pool_index=int(index),
                frame_indices=subset.indices,
                asset_paths=tuple(video.frame_assets[i] for i in subset.indices),
            )
        )
    return replace(state, status=AWAITING_LABELS, batch=tuple(batch), verdicts=())


def record_verdict(state: SessionState, video_id: str, verdict: int | None) -> SessionState:
    """Accept one verdict. Raises ServiceError when it cannot be accepted."""
    if state.status != AWAITING_LABELS:
        raise ServiceError(
            409, "wrong_status", f"session is {state.status}, not awaiting labels"
        )
    if video_id not in {item.video_id for item in state.batch}:
        raise ServiceError(404, "unknown_video", f"video {video_id!r} is not in the pending batch")
    if video_id in {vid for vid, _ in state.verdicts}:
        raise ServiceError(409, "duplicate_verdict", f"video {video_id!r} already has a verdict")
    if verdict is not None and not (0 <= verdict < state.num_classes):
        raise ServiceError(
            422,
            "invalid_verdict",
            f"label {verdict} out of range for {state.num_classes} classes",
        )
    return replace(state, verdicts=state.verdicts + ((video_id, verdict),))


def finish_batch(state: SessionState) -> SessionState:
    """Apply a complete batch of verdicts in selection order, retrain, advance."""
    by_video = dict(state.verdicts)
    selected = [item.pool_index for item in state.batch]
    labels = [by_video[item.video_id] for item in state.batch]
    al = advance_pools(state.al, state.cfg, state.num_classes, selected, labels)
    accuracy = evaluate_accuracy(al.model, state.test_pool)
    labeled = sum(1 for v in labels if v is not None)
    state = replace(
        state,
        al=al,
        accuracies=state.accuracies + (accuracy,),
        labeled_total=state.labeled_total + labeled,
        abstained_total=state.abstained_total + (len(labels) - labeled),
        batch=(),
        verdicts=(),
    )
    return start_iteration(state)


# ---------------------------------------------------------------------------
# registry, audit log, recovery


class SessionRuntime:
    def __init__(self, state: SessionState, audit_path: Path):
        self.lock = threading.RLock()
        self.state = state  # replaced atomically; readers take no lock
        self.audit_path = audit_path

    def append_audit(self, event: dict) -> None:
        # write-ahead: the event hits disk before the transition is applied
        with open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


class SessionRegistry:
    def __init__(self, state_dir: Path):
        self.state_dir = state_dir
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionRuntime] = {}

    def get(self, session_id: str) -> SessionRuntime:
        with self._lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return runtime

    def create(self, request: CreateSessionRequest) -> SessionState:
        session_id = uuid.uuid4().hex
        # validate and compute before anything becomes durable
        state = create_session_state(session_id, request)
        session_dir = self.state_dir / session_id
        session_dir.mkdir(parents=True)
        runtime = SessionRuntime(state=state, audit_path=session_dir / "audit.jsonl")
        runtime.append_audit(
            {"event": "created", "session_id": session_id, "request": request.model_dump()}
        )
        with self._lock:
            self._sessions[session_id] = runtime
        return state

    def submit(self, session_id: str, video_id: str, verdict: int | None) -> SessionState:
        runtime = self.get(session_id)
        with runtime.lock:
            state = record_verdict(runtime.state, video_id, verdict)
            runtime.append_audit({"event": "verdict", "video_id": video_id, "verdict": verdict})
            if len(state.verdicts) == len(state.batch):
                # publish the transitional status so reads see it mid-retrain
                runtime.state = replace(state, status=TRAINING)
                state = finish_batch(state)
            runtime.state = state
        return state

    def recover(self) -> None:
        """Rebuild every session from its audit log (after a restart)."""
        for session_dir in sorted(self.state_dir.iterdir()):
            audit_path = session_dir / "audit.jsonl"
            if not audit_path.is_file():
                continue
            try:
                runtime = _replay(session_dir.name, audit_path)
            except Exception:
                log.exception("could not recover session %s; skipping", session_dir.name)
                continue
            if runtime is not None:
                with self._lock:
                    self._sessions[session_dir.name] = runtime


def _replay(session_id: str, audit_path: Path) -> SessionRuntime | None:
    events = []
    for line in audit_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            # a crash mid-append leaves a torn final line; nothing follows it
            break
    if not events or events[0].get("event") != "created":
        return None
    request = CreateSessionRequest(**events[0]["request"])
    state = create_session_state(session_id, request)
    for event in events[1:]:
        if event.get("event") != "verdict":
            raise ValueError(f"unexpected audit event: {event.get('event')!r}")
        state = record_verdict(state, event["video_id"], event["verdict"])
        if len(state.verdicts) == len(state.batch):
            state = finish_batch(state)
    return SessionRuntime(state=state, audit_path=audit_path)


# ---------------------------------------------------------------------------
# HTTP layer


def _asset_url(session_id: str, path: str) -> str:
    return f"/v1/assets/{session_id}/{path}"


def _status_payload(state: SessionState) -> dict:
    return {
        "id": state.id,
        "status": state.status,
        "iteration": state.al.iteration,
        "total_iterations": state.cfg.iterations,
        "pending": len(state.pending),
        "batch_size": len(state.batch),
        "counts": {"labeled": state.labeled_total, "abstained": state.abstained_total},
        "labeled_pool_size": len(state.al.labeled),
        "unlabeled_pool_size": len(state.al.unlabeled),
        "initial_accuracy": state.initial_accuracy,
        "accuracies": list(state.accuracies),
        "class_names": list(state.class_names),
    }


def create_app(state_dir: str | Path) -> FastAPI:
    """Build the annotation service; sessions persist under ``state_dir``."""
    app = FastAPI(title="frameal annotation service", version="1.0")
    # the browser UI is served as static files from a different origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    registry = SessionRegistry(Path(state_dir))
    registry.recover()
    app.state.registry = registry

    @app.exception_handler(HTTPException)
    def _structured_errors(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict) or set(detail) != {"code", "message"}:
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.post("/v1/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        state = registry.create(request)
        return _status_payload(state)

    @app.get("/v1/sessions/{session_id}")
    def session_status(session_id: str):
        return _status_payload(registry.get(session_id).state)

    @app.get("/v1/sessions/{session_id}/next")
    def next_query(session_id: str):
        state = registry.get(session_id).state
        if state.status != AWAITING_LABELS:
            raise ServiceError(
                409, "wrong_status", f"session is {state.status}; no query is pending"
            )
        pending = state.pending
        head = pending[0]
        return {
            "video_id": head.video_id,
            "frame_urls": [_asset_url(state.id, p) for p in head.asset_paths],
            "class_names": list(state.class_names),
            "progress": {
                "iteration": state.al.iteration + 1,
                "total_iterations": state.cfg.iterations,
                "position": len(state.batch) - len(pending) + 1,
                "batch_size": len(state.batch),
                "labeled": state.labeled_total,
                "abstained": state.abstained_total,
            },
        }

    @app.post("/v1/sessions/{session_id}/labels")
    def submit_label(session_id: str, request: SubmitLabelRequest):
        if isinstance(request.verdict, str):
            if request.verdict != ABSTAIN:
                raise ServiceError(
                    422,
                    "invalid_verdict",
                    f"verdict must be a class index or {ABSTAIN!r}, got {request.verdict!r}",
                )
            verdict = None
        else:
            verdict = int(request.verdict)
        state = registry.submit(session_id, request.video_id, verdict)
        return {
            "accepted": True,
            "video_id": request.video_id,
            "status": state.status,
            "pending": len(state.pending),
        }

    @app.get("/v1/assets/{session_id}/{asset_path:path}")
    def get_asset(session_id: str, asset_path: str):
        state = registry.get(session_id).state
        if asset_path not in state.asset_paths:
            raise ServiceError(404, "unknown_asset", f"no such asset: {asset_path!r}")
        root = Path(state.asset_root)
        resolved = (root / asset_path).resolve()
        if not resolved.is_relative_to(root):
            raise ServiceError(404, "unknown_asset", f"no such asset: {asset_path!r}")
        if not resolved.is_file():
            raise ServiceError(404, "unknown_asset", f"asset file missing: {asset_path!r}")
        media_type = mimetypes.guess_type(resolved.name)[0] or "application/octet-stream"
        return FileResponse(resolved, media_type=media_type)

    return app
