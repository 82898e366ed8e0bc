"""Per-task roll-up of the three analytics families.

One JSON-ready payload per task: selection bias and dispersion, color
classification and per-source painting ratios, and intention-level
run-length and uniqueness measures.  Both the batch reports and the
HTTP summary endpoint serve exactly this structure, so their values
always agree.
"""

from __future__ import annotations

from collections.abc import Sequence

from ..grid import BACKGROUND
from ..ingest import TaskSpec, Trajectory
from .color import classify_task, source_ratios
from .intention import selection_runlength_table, uniqueness_ratio
from .selection import (
    NoObjectCells,
    NoSelections,
    aggregate_object_distribution,
    kl_bias,
    misalignment,
    selection_distribution,
    selection_events,
    spatial_entropy,
)

__all__ = ["task_summary", "summaries_by_task"]


def task_summary(
    task: TaskSpec,
    trajectories: Sequence[Trajectory],
    epsilon: float = 1e-9,
    tau: float = 0.5,
    window: int = 5,
    scale_mode: str = "native",
    background: int = BACKGROUND,
    include_background: bool = True,
) -> dict:
    """Aggregate analytics for one task over its trajectories.

    Selection-dependent numbers degrade to null when the trajectories
    contain no usable selections (or no colored content for the bias
    baseline) rather than failing the whole summary.
    """

    ordered = sorted(trajectories, key=lambda t: t.trajectory_id)

    bias = None
    entropy_nats = None
    entropy_normalized = None
    misalign = None
    try:
        p_sel = selection_distribution(ordered)
        entropy_nats, entropy_normalized = spatial_entropy(p_sel)
        misalign = misalignment(ordered, background)
        events = [e for t in ordered for e in selection_events(t)]
        p_obj = aggregate_object_distribution(events, background)
        bias = kl_bias(p_sel, p_obj, epsilon)
    except NoSelections:
        pass
    except NoObjectCells:
        pass  # entropy and misalignment survive; bias has no baseline

    table = selection_runlength_table(ordered)
    ratios = source_ratios(ordered, {task.task_id: task}, include_background)

    return {
        "task_id": task.task_id,
        "trajectories": len(ordered),
        "bias": bias,
        "entropy_nats": entropy_nats,
        "entropy_normalized": entropy_normalized,
        "misalignment": misalign,
        "color_class": classify_task(task, include_background).value,
        "source_ratios": ratios.get(task.task_id),
        "run_length": {
            "rows": [list(row) for row in table.rows],
            "zero_count": table.zero_count,
            "total_operations": table.total_operations,
        },
        "uniqueness_ratio": (
            uniqueness_ratio(ordered, scale_mode) if ordered else None
        ),
        "params": {
            "epsilon": epsilon,
            "tau": tau,
            "window": window,
            "scale_mode": scale_mode,
            "background": background,
            "include_background": include_background,
        },
    }


def summaries_by_task(
    tasks: dict[str, TaskSpec],
    trajectories: Sequence[Trajectory],
    **params,
) -> dict[str, dict]:
    """One summary per task that has at least one trajectory."""

    grouped: dict[str, list[Trajectory]] = {}
    for t in trajectories:
        if t.task_id in tasks:
            grouped.setdefault(t.task_id, []).append(t)
    return {
        task_id: task_summary(tasks[task_id], group, **params)
        for task_id, group in sorted(grouped.items())
    }
