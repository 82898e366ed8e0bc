"""Turn live engine sessions into trajectory logs.

The recorder mirrors how the capture interface writes its logs: one
record per action carrying the grid after the action, and an object
field holding the post-action selection for Selection operations or the
acted-on cells (with their prior colors) for everything else. The
overlapped flag is logged for Selection, Move, and Paste, where it is
meaningful.

Records produced here round-trip through ingest and replay with zero
divergences; that equivalence is what the replay audit tests pin down.
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Callable

from .engine import (
    DEFAULT_POLICY,
    ActionRequest,
    Policy,
    SessionState,
    StepOutcome,
    apply_action,
    open_session,
)
from .ingest import (
    OPERATION_CATEGORY,
    ActionRecord,
    ObjectCell,
    TaskSpec,
    Trajectory,
)

_OVERLAP_LOGGED = frozenset({"SelectCell", "SelectGrid", "SelectObject", "Move", "Paste"})


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def _request_params(a: ActionRequest) -> dict | None:
    p = {}
    if a.color is not None:
        p["color"] = a.color
    if a.direction is not None:
        p["direction"] = a.direction
    if a.rotation is not None:
        p["rotation"] = a.rotation
    if a.axis is not None:
        p["axis"] = a.axis
    if a.dims is not None:
        p["height"], p["width"] = a.dims
    return p or None


class Recorder:
    """One live session plus the growing log of what happened in it."""

    def __init__(
        self,
        task: TaskSpec,
        test_index: int = 0,
        trajectory_id: str = "",
        user_id: str = "",
        policy: Policy = DEFAULT_POLICY,
        clock: Callable[[], str] = _utc_now,
    ):
        self.task = task
        self.test_index = test_index
        self.trajectory_id = trajectory_id
        self.user_id = user_id
        self.policy = policy
        self.clock = clock
        self.state: SessionState = open_session(task, test_index)
        self.records: list[ActionRecord] = []
        self.last_outcome: StepOutcome | None = None

    def step(self, request: ActionRequest) -> StepOutcome:
        """Apply one action and append its log record."""
        before = self.state
        self.state, outcome = apply_action(before, request, self.policy)
        op = request.operation
        if OPERATION_CATEGORY[op] == "Selection":
            cells = tuple(
                ObjectCell(r, c, self.state.grid.at(r, c))
                for r, c in sorted(self.state.selection)
            )
        else:
            cells = tuple(
                ObjectCell(r, c, before.grid.at(r, c))
                for r, c in sorted(before.selection)
            )
        self.records.append(
            ActionRecord(
                category=OPERATION_CATEGORY[op],
                operation=op,
                grid=self.state.grid,
                timestamp=self.clock(),
                position=request.position,
                object_cells=cells if cells else None,
                overlapped=outcome.overlapped if op in _OVERLAP_LOGGED else None,
                params=_request_params(request),
            )
        )
        self.last_outcome = outcome
        return outcome

    def trajectory(self, success: bool | None = None) -> Trajectory:
        """The log so far; success defaults to the last Submit's reward."""
        if success is None:
            success = bool(
                self.state.submitted
                and self.last_outcome
                and self.last_outcome.reward == 1
            )
        return Trajectory(
            trajectory_id=self.trajectory_id,
            task_id=self.task.task_id,
            user_id=self.user_id,
            actions=tuple(self.records),
            success=success,
        )
