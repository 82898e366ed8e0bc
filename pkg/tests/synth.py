"""Builders for synthetic tasks and trajectories used across the tests.

Everything here drives the real engine through the real Recorder, so
synthetic logs are exactly what a live capture session would emit. A
scripted random walk over the operation set produces varied but always
replayable corpora.
"""

from __future__ import annotations

import random
from dataclasses import replace as dc_replace

from arctraj.engine import ActionRequest, EngineError
from arctraj.grid import Grid, make_grid
from arctraj.ingest import TaskSpec, Trajectory
from arctraj.record import Recorder


def make_task(test_in, test_out, task_id="toy", demos=None) -> TaskSpec:
    gi, go = make_grid(test_in), make_grid(test_out)
    demo_pairs = (
        tuple((make_grid(a), make_grid(b)) for a, b in demos)
        if demos
        else ((gi, go),)
    )
    return TaskSpec(task_id, demo_pairs, ((gi, go),))


def ticking_clock(start: str = "2024-05-01T09:00:00"):
    """Deterministic strictly increasing ISO timestamps."""
    counter = [0]

    def clock() -> str:
        counter[0] += 1
        return f"{start}.{counter[0]:03d}Z"

    return clock


def record_script(
    task: TaskSpec, requests, trajectory_id="s1", success=None, user_id="synthetic"
) -> Trajectory:
    """Run a request script through a Recorder and return its log."""
    rec = Recorder(
        task,
        trajectory_id=trajectory_id,
        user_id=user_id,
        clock=ticking_clock(),
    )
    for req in requests:
        rec.step(req)
    return rec.trajectory(success=success)


def strip_params(t: Trajectory) -> Trajectory:
    """Drop explicit params so replay has to infer them from snapshots."""
    return dc_replace(
        t, actions=tuple(dc_replace(a, params=None) for a in t.actions)
    )


def random_walk(
    task: TaskSpec,
    rng: random.Random,
    steps: int = 8,
    submit: bool = True,
    trajectory_id: str = "walk",
) -> Trajectory:
    """A replayable random editing session on the task's test grid."""
    rec = Recorder(task, trajectory_id=trajectory_id, clock=ticking_clock())
    for _ in range(steps):
        g = rec.state.grid
        all_cells = [(r, c) for r in range(g.height) for c in range(g.width)]
        candidates = [
            ActionRequest("SelectCell", position=rng.choice(all_cells)),
            ActionRequest("SelectObject", position=rng.choice(all_cells)),
            ActionRequest("SelectGrid"),
        ]
        if rec.state.selection:
            candidates += [
                ActionRequest("Paint", color=rng.randrange(10)),
                ActionRequest("Move", direction=rng.choice(["up", "down", "left", "right"])),
                ActionRequest("Rotate", rotation=rng.choice(["cw", "ccw"])),
                ActionRequest("Flip", axis=rng.choice(["horizontal", "vertical"])),
                ActionRequest("Copy"),
            ]
        if rec.state.clipboard:
            candidates.append(ActionRequest("Paste"))
        if rec.state.undo_stack:
            candidates.append(ActionRequest("Undo"))
        if rec.state.redo_stack:
            candidates.append(ActionRequest("Redo"))
        if rng.random() < 0.1:
            candidates.append(
                ActionRequest("ResizeGrid", dims=(rng.randint(1, 6), rng.randint(1, 6)))
            )
        try:
            rec.step(rng.choice(candidates))
        except EngineError:
            continue
    if submit:
        rec.step(ActionRequest("Submit"))
    return rec.trajectory()


def solve_task(task: TaskSpec, trajectory_id="solver") -> Trajectory:
    """A cheap always-successful script: resize then paint cell by cell."""
    target: Grid = task.tests[0][1]
    rec = Recorder(task, trajectory_id=trajectory_id, clock=ticking_clock())
    if (rec.state.grid.height, rec.state.grid.width) != (target.height, target.width):
        rec.step(ActionRequest("ResizeGrid", dims=(target.height, target.width)))
    for r in range(target.height):
        for c in range(target.width):
            if rec.state.grid.at(r, c) != target.at(r, c):
                rec.step(ActionRequest("SelectCell", position=(r, c)))
                rec.step(ActionRequest("Paint", color=target.at(r, c)))
    rec.step(ActionRequest("Submit"))
    assert rec.last_outcome.reward == 1
    return rec.trajectory()
