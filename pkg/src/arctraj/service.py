"""HTTP facade over tasks, live recording sessions, replay, and analytics.

The server owns all game state: a browser client posts actions and renders
whatever state comes back, which keeps every recorded trajectory engine-
verified by construction.  Sessions live in memory, optionally journaled
to append-only files, and expire after a configurable idle TTL.  Grids
travel as nested row-major arrays and cell coordinates as [row, col]
pairs everywhere in this API.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .engine import (
    ActionRequest,
    AlreadySubmitted,
    EngineError,
    StepOutcome,
)
from .grid import Grid
from .ingest import (
    OPERATIONS,
    TaskSpec,
    Trajectory,
    serialize_action,
    serialize_trajectory,
)
from .record import Recorder
from .replay import ReplayError, replay
from .analytics.summary import summaries_by_task

DEFAULT_TTL_SECONDS = 2 * 60 * 60.0

__all__ = ["SessionHandle", "SessionStore", "create_app", "DEFAULT_TTL_SECONDS"]


@dataclass
class SessionHandle:
    session_id: str
    task_id: str
    test_index: int
    created_at: str
    last_active: str


class _LiveSession:
    def __init__(self, handle: SessionHandle, recorder: Recorder):
        self.handle = handle
        self.recorder = recorder
        self.lock = threading.Lock()
        self.touched = time.time()


def _iso(ts: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(ts))


def _grid_rows(g: Grid) -> list[list[int]]:
    return [list(row) for row in g.rows()]


class SessionStore:
    """In-memory session registry with TTL eviction and optional journals."""

    def __init__(
        self,
        tasks: dict[str, TaskSpec],
        ttl_seconds: float = DEFAULT_TTL_SECONDS,
        journal_dir: str | Path | None = None,
        time_fn=time.time,
    ):
        self.tasks = tasks
        self.ttl = ttl_seconds
        self.journal_dir = Path(journal_dir) if journal_dir else None
        self.time_fn = time_fn
        self._sessions: dict[str, _LiveSession] = {}
        self._lock = threading.Lock()
        if self.journal_dir:
            self.journal_dir.mkdir(parents=True, exist_ok=True)

    def create(self, task_id: str, test_index: int) -> _LiveSession:
        task = self.tasks.get(task_id)
        if task is None:
            raise KeyError(task_id)
        if not 0 <= test_index < len(task.tests):
            raise IndexError(test_index)
        now = self.time_fn()
        session_id = uuid.uuid4().hex
        handle = SessionHandle(
            session_id=session_id,
            task_id=task_id,
            test_index=test_index,
            created_at=_iso(now),
            last_active=_iso(now),
        )
        live = _LiveSession(
            handle, Recorder(task, test_index, trajectory_id=session_id)
        )
        live.touched = now
        with self._lock:
            self._sessions[session_id] = live
        self._journal(
            session_id,
            {"meta": {"task_id": task_id, "test_index": test_index,
                      "created_at": handle.created_at}},
        )
        return live

    def get(self, session_id: str, touch: bool = True) -> _LiveSession:
        self.purge()
        with self._lock:
            live = self._sessions.get(session_id)
        if live is None:
            raise KeyError(session_id)
        if touch:
            live.touched = self.time_fn()
            live.handle.last_active = _iso(live.touched)
        return live

    def purge(self) -> int:
        """Evict idle sessions, flushing their journals first."""
        now = self.time_fn()
        evicted = 0
        with self._lock:
            stale = [
                sid
                for sid, live in self._sessions.items()
                if now - live.touched > self.ttl
            ]
            for sid in stale:
                self._flush_one(self._sessions.pop(sid))
                evicted += 1
        return evicted

    def flush_all(self) -> None:
        with self._lock:
            for live in self._sessions.values():
                self._flush_one(live)

    def _flush_one(self, live: _LiveSession) -> None:
        self._journal(
            live.handle.session_id,
            {"closed": {"actions": len(live.recorder.records)}},
        )

    def _journal(self, session_id: str, doc: dict) -> None:
        if not self.journal_dir:
            return
        path = self.journal_dir / f"{session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(doc, separators=(",", ":")) + "\n")

    def journal_action(self, session_id: str, record_doc: dict) -> None:
        self._journal(session_id, {"action": record_doc})


def _state_payload(live: _LiveSession) -> dict:
    s = live.recorder.state
    return {
        "session_id": live.handle.session_id,
        "task_id": live.handle.task_id,
        "test_index": live.handle.test_index,
        "created_at": live.handle.created_at,
        "last_active": live.handle.last_active,
        "grid": _grid_rows(s.grid),
        "height": s.grid.height,
        "width": s.grid.width,
        "selection": sorted([r, c] for r, c in s.selection),
        "step_count": s.step_count,
        "submitted": s.submitted,
        "target_height": s.target.height,
        "target_width": s.target.width,
    }


def _outcome_payload(outcome: StepOutcome) -> dict:
    return {
        "reward": outcome.reward,
        "overlapped": outcome.overlapped,
        "terminal": outcome.terminal,
        "note": outcome.note,
    }


def _parse_request(doc: dict) -> ActionRequest:
    operation = doc.get("operation")
    if operation not in OPERATIONS:
        raise HTTPException(
            422, {"error": "UnknownOperation", "message": f"{operation!r}"}
        )
    try:
        return ActionRequest(
            operation=operation,
            position=tuple(doc["position"]) if doc.get("position") else None,
            cells=(
                frozenset((int(r), int(c)) for r, c in doc["cells"])
                if doc.get("cells") is not None
                else None
            ),
            color=doc.get("color"),
            direction=doc.get("direction"),
            rotation=doc.get("rotation"),
            axis=doc.get("axis"),
            dims=tuple(doc["dims"]) if doc.get("dims") else None,
        )
    except (TypeError, ValueError) as e:
        raise HTTPException(
            422, {"error": "BadParameters", "message": str(e)}
        ) from e


def _action_summary(req: ActionRequest) -> dict:
    out: dict = {"operation": req.operation}
    if req.position is not None:
        out["position"] = list(req.position)
    if req.cells is not None:
        out["cells"] = sorted([r, c] for r, c in req.cells)
    for field in ("color", "direction", "rotation", "axis"):
        value = getattr(req, field)
        if value is not None:
            out[field] = value
    if req.dims is not None:
        out["dims"] = list(req.dims)
    return out


def create_app(
    tasks: dict[str, TaskSpec],
    trajectories: dict[str, Trajectory] | None = None,
    ttl_seconds: float = DEFAULT_TTL_SECONDS,
    journal_dir: str | Path | None = None,
    cors_origins: tuple[str, ...] = (),
    time_fn=time.time,
    precompute_analytics: bool = True,
    analytics_params: dict | None = None,
) -> FastAPI:
    """Build the HTTP app around a task corpus and optional trajectories."""

    store = SessionStore(tasks, ttl_seconds, journal_dir, time_fn)
    corpus: dict[str, Trajectory] = dict(trajectories or {})
    summaries: dict[str, dict] = {}
    if precompute_analytics and corpus:
        summaries = summaries_by_task(
            tasks, list(corpus.values()), **(analytics_params or {})
        )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.flush_all()

    app = FastAPI(title="trajectory service", lifespan=lifespan)
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    app.state.store = store
    app.state.tasks = tasks
    app.state.trajectories = corpus
    app.state.analytics = summaries

    def _task_or_404(task_id: str) -> TaskSpec:
        task = tasks.get(task_id)
        if task is None:
            raise HTTPException(
                404, {"error": "TaskNotFound", "message": task_id}
            )
        return task

    def _session_or_404(session_id: str, touch: bool = True) -> _LiveSession:
        try:
            return store.get(session_id, touch)
        except KeyError:
            raise HTTPException(
                404, {"error": "SessionNotFound", "message": session_id}
            ) from None

    @app.get("/tasks")
    def list_tasks() -> dict:
        return {
            "tasks": [
                {
                    "task_id": tid,
                    "demos": len(task.demos),
                    "tests": len(task.tests),
                    "test_dims": [
                        [pair[0].height, pair[0].width] for pair in task.tests
                    ],
                }
                for tid, task in sorted(tasks.items())
            ]
        }

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str) -> dict:
        task = _task_or_404(task_id)
        return {
            "task_id": task.task_id,
            "demos": [
                {"input": _grid_rows(i), "output": _grid_rows(o)}
                for i, o in task.demos
            ],
            # test targets are withheld; only their dims are revealed
            "tests": [
                {
                    "input": _grid_rows(i),
                    "target_height": o.height,
                    "target_width": o.width,
                }
                for i, o in task.tests
            ],
        }

    @app.post("/sessions", status_code=201)
    def start_session(body: dict) -> dict:
        task_id = body.get("task_id")
        if not isinstance(task_id, str):
            raise HTTPException(
                422, {"error": "BadParameters", "message": "task_id required"}
            )
        _task_or_404(task_id)
        test_index = body.get("test_index", 0)
        try:
            live = store.create(task_id, int(test_index))
        except IndexError:
            raise HTTPException(
                422,
                {"error": "BadParameters", "message": f"test index {test_index}"},
            ) from None
        return _state_payload(live)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _state_payload(_session_or_404(session_id))

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, body: dict) -> dict:
        live = _session_or_404(session_id)
        request = _parse_request(body)
        with live.lock:
            try:
                outcome = live.recorder.step(request)
            except AlreadySubmitted as e:
                raise HTTPException(
                    409, {"error": "AlreadySubmitted", "message": str(e)}
                ) from e
            except EngineError as e:
                raise HTTPException(
                    422, {"error": type(e).__name__, "message": str(e)}
                ) from e
            record = live.recorder.records[-1]
        store.journal_action(session_id, serialize_action(record))
        payload = _state_payload(live)
        payload["outcome"] = _outcome_payload(outcome)
        return payload

    @app.get("/sessions/{session_id}/trajectory")
    def download_trajectory(session_id: str) -> dict:
        live = _session_or_404(session_id, touch=False)
        with live.lock:
            return serialize_trajectory(live.recorder.trajectory())

    @app.get("/trajectories")
    def list_trajectories() -> dict:
        return {
            "trajectories": [
                {
                    "trajectory_id": t.trajectory_id,
                    "task_id": t.task_id,
                    "actions": len(t.actions),
                    "success": t.success,
                }
                for t in sorted(corpus.values(), key=lambda t: t.trajectory_id)
            ]
        }

    @app.get("/trajectories/{trajectory_id}/frames")
    def replay_frames(trajectory_id: str) -> dict:
        t = corpus.get(trajectory_id)
        if t is None:
            raise HTTPException(
                404, {"error": "TrajectoryNotFound", "message": trajectory_id}
            )
        task = tasks.get(t.task_id)
        if task is None:
            raise HTTPException(
                404, {"error": "TaskNotFound", "message": t.task_id}
            )
        try:
            result = replay(t, task)
        except ReplayError as e:
            raise HTTPException(
                422, {"error": type(e).__name__, "message": str(e)}
            ) from e
        initial = (
            result.frames[0].state_before
            if result.frames
            else task.tests[result.test_index][0]
        )
        frames = [
            {"step": 0, "grid": _grid_rows(initial), "action": None,
             "diverged": False}
        ]
        frames += [
            {
                "step": f.index + 1,
                "grid": _grid_rows(f.state_after),
                "action": _action_summary(f.action),
                "diverged": f.diverged,
            }
            for f in result.frames
        ]
        return {
            "trajectory_id": trajectory_id,
            "task_id": t.task_id,
            "mode": result.mode,
            "success_check": result.success_check,
            "frames": frames,
        }

    @app.get("/analytics/tasks/{task_id}")
    def analytics_summary(task_id: str) -> dict:
        _task_or_404(task_id)
        payload = app.state.analytics.get(task_id)
        if payload is None:
            raise HTTPException(
                409,
                {"error": "NotYetComputed",
                 "message": f"no analytics computed for {task_id}"},
            )
        return payload

    return app
