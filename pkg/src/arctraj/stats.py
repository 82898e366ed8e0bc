"""Corpus-level statistics over an ingested trajectory dataset.

Counts actions under three conventions (raw, merged selection runs,
operations only), measures object-level interaction, and assembles the
headline table: trajectory totals, distinct grids visited, and per-task
averages.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .ingest import OPERATION_CATEGORY, Trajectory
from .replay import GridAccount

__all__ = [
    "StatsReport",
    "action_counts",
    "object_action_stats",
    "compute_basic_stats",
]

ACTION_COUNT_MODES = ("raw", "merged", "ops_only")

# Object-level interaction shows up as layout or clipboard work.
_OBJECT_CATEGORIES = ("O2", "Clipboard")

_PARTICIPANT_NOTE = (
    "participants = distinct user ids observed in the corpus; "
    "published participant counts vary by source and are not reconciled here"
)


@dataclass(frozen=True)
class StatsReport:
    tasks: int
    participants: int
    trajectories_total: int
    trajectories_valid: int
    actions_raw: int
    actions_merged: int
    actions_ops_only: int
    object_actions: int
    object_ratio_incl: float
    object_ratio_excl: float
    unique_grids: int
    cross_grids: int
    cross_ratio: float
    avg_participants_per_task: float
    avg_trajectories_per_task: float

    def _check(self) -> None:
        # ratios must always be recomputable from their counts
        assert math.isclose(
            self.object_ratio_incl, _ratio(self.object_actions, self.actions_raw)
        )
        assert math.isclose(
            self.object_ratio_excl,
            _ratio(self.object_actions, self.actions_ops_only),
        )
        assert math.isclose(
            self.cross_ratio, _ratio(self.cross_grids, self.unique_grids)
        )

    def to_json(self) -> dict:
        self._check()
        return {
            "tasks": self.tasks,
            "participants": self.participants,
            "participants_note": _PARTICIPANT_NOTE,
            "trajectories_total": self.trajectories_total,
            "trajectories_valid": self.trajectories_valid,
            "actions_raw": self.actions_raw,
            "actions_merged": self.actions_merged,
            "actions_ops_only": self.actions_ops_only,
            "object_actions": self.object_actions,
            "object_ratio_incl": self.object_ratio_incl,
            "object_ratio_excl": self.object_ratio_excl,
            "unique_grids": self.unique_grids,
            "cross_grids": self.cross_grids,
            "cross_ratio": self.cross_ratio,
            "avg_participants_per_task": self.avg_participants_per_task,
            "avg_trajectories_per_task": self.avg_trajectories_per_task,
        }

    def to_text(self) -> str:
        self._check()
        rows = [
            ("Tasks", f"{self.tasks}"),
            ("Participants", f"{self.participants}"),
            ("Trajectories (total)", f"{self.trajectories_total}"),
            ("Trajectories (valid)", f"{self.trajectories_valid}"),
            ("Actions (raw)", f"{self.actions_raw}"),
            ("Actions (merged selections)", f"{self.actions_merged}"),
            ("Actions (operations only)", f"{self.actions_ops_only}"),
            ("Object-level actions", f"{self.object_actions}"),
            ("Object ratio (of raw)", f"{100 * self.object_ratio_incl:.1f}%"),
            ("Object ratio (of operations)", f"{100 * self.object_ratio_excl:.1f}%"),
            ("Unique visited grids", f"{self.unique_grids}"),
            ("Cross-trajectory grids", f"{self.cross_grids}"),
            ("Cross-trajectory ratio", f"{100 * self.cross_ratio:.1f}%"),
            ("Avg participants per task", f"{self.avg_participants_per_task:.1f}"),
            ("Avg trajectories per task", f"{self.avg_trajectories_per_task:.1f}"),
        ]
        width = max(len(label) for label, _ in rows)
        lines = [f"{label:<{width}}  {value}" for label, value in rows]
        lines.append("")
        lines.append(f"note: {_PARTICIPANT_NOTE}")
        return "\n".join(lines) + "\n"


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _merged_count(t: Trajectory) -> int:
    """Actions remaining after collapsing each selection run to one."""
    count = 0
    in_run = False
    for a in t.actions:
        if OPERATION_CATEGORY[a.operation] == "Selection":
            if not in_run:
                count += 1
                in_run = True
        else:
            count += 1
            in_run = False
    return count


def action_counts(trajectories: Iterable[Trajectory], mode: str = "raw") -> int:
    if mode not in ACTION_COUNT_MODES:
        raise ValueError(f"mode must be one of {ACTION_COUNT_MODES}, got {mode!r}")
    total = 0
    for t in trajectories:
        if mode == "raw":
            total += len(t.actions)
        elif mode == "merged":
            total += _merged_count(t)
        else:
            total += sum(
                1
                for a in t.actions
                if OPERATION_CATEGORY[a.operation] != "Selection"
            )
    return total


def object_action_stats(
    trajectories: Sequence[Trajectory],
) -> tuple[int, float, float]:
    """Count layout/clipboard actions and their share of raw and op counts."""

    count = sum(
        1
        for t in trajectories
        for a in t.actions
        if OPERATION_CATEGORY[a.operation] in _OBJECT_CATEGORIES
    )
    raw = action_counts(trajectories, "raw")
    ops = action_counts(trajectories, "ops_only")
    return count, _ratio(count, raw), _ratio(count, ops)


def compute_basic_stats(
    trajectories: Sequence[Trajectory],
    account: GridAccount | None = None,
) -> StatsReport:
    """Assemble the headline statistics table for a corpus.

    Grid-visitation numbers come from ``account`` (see replay-side grid
    accounting); without one they are reported as zero.  Per-task averages
    run over tasks that appear in the corpus, so every task in the mean
    has at least one trajectory.
    """

    ordered = sorted(trajectories, key=lambda t: t.trajectory_id)
    users_by_task: dict[str, set[str]] = {}
    count_by_task: dict[str, int] = {}
    users: set[str] = set()
    valid = 0
    for t in ordered:
        users.add(t.user_id)
        users_by_task.setdefault(t.task_id, set()).add(t.user_id)
        count_by_task[t.task_id] = count_by_task.get(t.task_id, 0) + 1
        if t.success:
            valid += 1

    task_ids = sorted(count_by_task)
    n_tasks = len(task_ids)
    avg_users = (
        sum(len(users_by_task[tid]) for tid in task_ids) / n_tasks if n_tasks else 0.0
    )
    avg_trajs = (
        sum(count_by_task[tid] for tid in task_ids) / n_tasks if n_tasks else 0.0
    )

    obj_count, ratio_incl, ratio_excl = object_action_stats(ordered)
    unique = account.unique_count if account else 0
    cross = account.cross_count if account else 0

    return StatsReport(
        tasks=n_tasks,
        participants=len(users),
        trajectories_total=len(ordered),
        trajectories_valid=valid,
        actions_raw=action_counts(ordered, "raw"),
        actions_merged=action_counts(ordered, "merged"),
        actions_ops_only=action_counts(ordered, "ops_only"),
        object_actions=obj_count,
        object_ratio_incl=ratio_incl,
        object_ratio_excl=ratio_excl,
        unique_grids=unique,
        cross_grids=cross,
        cross_ratio=_ratio(cross, unique),
        avg_participants_per_task=avg_users,
        avg_trajectories_per_task=avg_trajs,
    )
