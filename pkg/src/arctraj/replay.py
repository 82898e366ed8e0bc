"""Replay logged trajectories through the engine and audit the results.

A log gives, per action, the operation name and the grid snapshot that
followed it, but not always the parameters (a Move record does not say
which way). Replay reconstructs the missing pieces by simulating every
candidate parameterization and keeping the one that reproduces the
logged grid, then walks the whole trajectory keeping the engine and the
log reconciled.

Two modes:

* ``resync`` (default): logged grids are treated as ground truth; when
  the engine's prediction disagrees, the divergence is recorded and the
  logged grid is adopted before continuing.
* ``strict``: predictions are kept; divergences are recorded only.

Snapshot convention: logs carry one grid per action without saying
whether it was taken before or after the action. Replay assumes "after"
(``snapshot='post'``); the audit runs both readings and reports both
divergence rates so the corpus itself can settle the question.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace

from .engine import (
    DEFAULT_POLICY,
    ActionRequest,
    Clipboard,
    EngineError,
    Policy,
    SessionState,
    apply_action,
)
from .grid import Grid, grid_hash, grids_equal
from .ingest import ActionRecord, TaskSpec, Trajectory

DIRECTION_ORDER = ("up", "down", "left", "right")
ROTATION_ORDER = ("cw", "ccw")
AXIS_ORDER = ("horizontal", "vertical")


class ReplayError(Exception):
    pass


class TaskMissing(ReplayError):
    pass


class StepFailed(ReplayError):
    """Engine rejected an action during strict replay."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step


class Ambiguous(ReplayError):
    """Two or more parameterizations reproduce the logged grid."""

    def __init__(self, message: str, candidates: tuple):
        super().__init__(message)
        self.candidates = candidates


class NoCandidateMatches(ReplayError):
    pass


@dataclass(frozen=True)
class Frame:
    """One replayed action: the s -> a -> s' triple plus audit flags.

    selection_before and clipboard_before capture the engine context the
    action ran in, enough to re-apply it against state_before later.
    """

    index: int
    state_before: Grid
    action: ActionRequest
    state_after: Grid
    diverged: bool = False
    ambiguous: bool = False
    selection_adopted: bool = False
    note: str | None = None
    selection_before: frozenset = frozenset()
    clipboard_before: Clipboard | None = None


@dataclass(frozen=True)
class Divergence:
    step: int
    predicted: Grid
    logged: Grid


@dataclass(frozen=True)
class ReplayResult:
    trajectory_id: str
    task_id: str
    test_index: int
    mode: str
    snapshot: str
    frames: tuple[Frame, ...]
    divergences: tuple[Divergence, ...]
    selection_mismatches: int
    success_check: bool


@dataclass(frozen=True)
class Transition:
    state: Grid
    action: ActionRequest
    next_state: Grid
    reward: int


@dataclass(frozen=True)
class GridAccount:
    unique_count: int
    cross_count: int

    @property
    def cross_ratio(self) -> float:
        # always derived from the two counts, never stored separately
        return self.cross_count / self.unique_count if self.unique_count else 0.0


def pick_test_index(t: Trajectory, task: TaskSpec) -> int:
    """Guess which test pair a log belongs to from its first snapshot."""
    first = t.actions[0].grid
    for i, (test_in, _) in enumerate(task.tests):
        if grids_equal(first, test_in):
            return i
    for i, (test_in, _) in enumerate(task.tests):
        if (test_in.height, test_in.width) == (first.height, first.width):
            return i
    return 0


def _simulate(
    grid: Grid, selection: frozenset, req: ActionRequest, policy: Policy
) -> Grid | None:
    probe = SessionState(grid=grid, target=grid, selection=selection)
    try:
        ns, _ = apply_action(probe, req, policy)
    except EngineError:
        return None
    return ns.grid


def infer_action_parameters(
    a: ActionRecord,
    s_before: Grid,
    s_after_logged: Grid,
    selection: frozenset | None = None,
    policy: Policy = DEFAULT_POLICY,
) -> ActionRequest:
    """Resolve implicit parameters by simulating every candidate.

    ``selection`` defaults to the record's own object cells (the cells
    the operation acted on). Raises Ambiguous when several candidates
    reproduce the logged grid, NoCandidateMatches when none does.
    """
    if selection is None:
        selection = a.selection
    op = a.operation

    if op == "ResizeGrid":
        dims = (s_after_logged.height, s_after_logged.width)
        return ActionRequest(op, dims=dims)

    if op == "Paint":
        changed = {
            s_after_logged.at(r, c)
            for r in range(s_before.height)
            for c in range(s_before.width)
            if s_before.at(r, c) != s_after_logged.at(r, c)
        }
        if changed:
            colors = sorted(changed)
        elif selection:
            colors = sorted({s_after_logged.at(r, c) for r, c in selection})
        else:
            raise NoCandidateMatches("Paint with no diff and no selection")
        candidates = [ActionRequest(op, color=c) for c in colors]
    elif op == "Move":
        candidates = [ActionRequest(op, direction=d) for d in DIRECTION_ORDER]
    elif op == "Rotate":
        candidates = [ActionRequest(op, rotation=r) for r in ROTATION_ORDER]
    elif op == "Flip":
        candidates = [ActionRequest(op, axis=x) for x in AXIS_ORDER]
    else:
        raise NoCandidateMatches(f"{op} has no inferable parameters")

    matches = tuple(
        req
        for req in candidates
        if (sim := _simulate(s_before, selection, req, policy)) is not None
        and grids_equal(sim, s_after_logged)
    )
    if not matches:
        raise NoCandidateMatches(f"no {op} parameterization reproduces the logged grid")
    if len(matches) > 1:
        raise Ambiguous(f"{len(matches)} {op} parameterizations match", matches)
    return matches[0]


def _request_from_params(a: ActionRecord) -> ActionRequest | None:
    """Build a request from an explicit params map when it is complete."""
    p = a.params or {}
    op = a.operation
    if op == "Paint" and "color" in p:
        return ActionRequest(op, color=int(p["color"]))
    if op == "Move" and "direction" in p:
        return ActionRequest(op, direction=str(p["direction"]).lower())
    if op == "Rotate" and ("rotation" in p or "direction" in p):
        return ActionRequest(op, rotation=str(p.get("rotation", p.get("direction"))).lower())
    if op == "Flip" and ("axis" in p or "direction" in p):
        return ActionRequest(op, axis=str(p.get("axis", p.get("direction"))).lower())
    if op == "ResizeGrid" and "height" in p and "width" in p:
        return ActionRequest(op, dims=(int(p["height"]), int(p["width"])))
    if op == "ResizeGrid" and "dims" in p:
        h, w = p["dims"]
        return ActionRequest(op, dims=(int(h), int(w)))
    return None


def _selection_request(a: ActionRecord) -> ActionRequest:
    op = a.operation
    if op == "SelectGrid":
        cells = a.selection
        return ActionRequest(op, cells=cells) if cells else ActionRequest(op)
    pos = a.position
    if pos is None and a.object_cells:
        pos = min((c.row, c.col) for c in a.object_cells)
    if pos is None:
        raise NoCandidateMatches(f"{op} without position or object cells")
    return ActionRequest(op, position=pos)


def _build_request(
    a: ActionRecord, s: SessionState, logged_after: Grid | None, policy: Policy
) -> tuple[ActionRequest, bool, str | None]:
    """Resolve one record to a concrete request.

    Returns (request, ambiguous, note). Falls back to the first
    candidate in the fixed order when the log cannot adjudicate.
    """
    op = a.operation
    if a.category == "Selection":
        return _selection_request(a), False, None
    if op in ("Copy", "Paste", "Undo", "Redo", "Submit"):
        return ActionRequest(op), False, None
    explicit = _request_from_params(a)
    if explicit is not None:
        return explicit, False, None
    if logged_after is None:
        # nothing to adjudicate against: take the first candidate order
        fallback = {
            "Move": ActionRequest(op, direction=DIRECTION_ORDER[0]),
            "Rotate": ActionRequest(op, rotation=ROTATION_ORDER[0]),
            "Flip": ActionRequest(op, axis=AXIS_ORDER[0]),
            "ResizeGrid": ActionRequest(op, dims=(s.grid.height, s.grid.width)),
        }.get(op)
        if fallback is None:
            raise NoCandidateMatches(f"cannot resolve {op} without a logged snapshot")
        return fallback, False, "unadjudicated parameters; fixed-order fallback"
    try:
        req = infer_action_parameters(a, s.grid, logged_after, s.selection, policy)
        return req, False, None
    except Ambiguous as e:
        return e.candidates[0], True, str(e)
    except NoCandidateMatches as e:
        if op == "Paint":
            fallback = _paint_fallback(s, logged_after)
        else:
            fallback = {
                "Move": ActionRequest(op, direction=DIRECTION_ORDER[0]),
                "Rotate": ActionRequest(op, rotation=ROTATION_ORDER[0]),
                "Flip": ActionRequest(op, axis=AXIS_ORDER[0]),
                "ResizeGrid": ActionRequest(
                    op, dims=(logged_after.height, logged_after.width)
                ),
            }.get(op)
        if fallback is None:
            raise
        return fallback, False, f"fallback parameters: {e}"


def _paint_fallback(s: SessionState, logged_after: Grid) -> ActionRequest | None:
    """Best-effort paint color when no candidate reproduces the log:
    the most frequent changed-to color, then the selection's logged color."""
    changed = [
        logged_after.at(r, c)
        for r in range(min(s.grid.height, logged_after.height))
        for c in range(min(s.grid.width, logged_after.width))
        if s.grid.at(r, c) != logged_after.at(r, c)
    ]
    pool = changed or [
        logged_after.at(r, c) for r, c in s.selection if logged_after.in_bounds(r, c)
    ]
    if not pool:
        return None
    counts = Counter(pool)
    top = max(counts.values())
    return ActionRequest("Paint", color=min(c for c, n in counts.items() if n == top))


def replay(
    t: Trajectory,
    task: TaskSpec,
    mode: str = "resync",
    snapshot: str = "post",
    test_index: int | None = None,
    policy: Policy = DEFAULT_POLICY,
) -> ReplayResult:
    """Drive the engine along a logged trajectory; see module docstring."""
    if task is None:
        raise TaskMissing(f"no task document for {t.task_id!r}")
    if mode not in ("strict", "resync"):
        raise ReplayError(f"mode must be strict or resync, not {mode!r}")
    if snapshot not in ("post", "pre"):
        raise ReplayError(f"snapshot must be post or pre, not {snapshot!r}")
    if test_index is None:
        test_index = pick_test_index(t, task)
    if not 0 <= test_index < len(task.tests):
        raise ReplayError(f"test index {test_index} out of range")
    target = task.tests[test_index][1]
    s = SessionState(grid=task.tests[test_index][0], target=target)
    resync = mode == "resync"

    frames: list[Frame] = []
    divergences: list[Divergence] = []
    mismatches = 0
    last = len(t.actions) - 1

    for i, a in enumerate(t.actions):
        note = None
        sel_adopted = False
        # pre convention: the snapshot belongs to the state before action i
        if snapshot == "pre" and not grids_equal(s.grid, a.grid):
            divergences.append(Divergence(i, s.grid, a.grid))
            if resync:
                s = replace(s, grid=a.grid, selection=_clip(s.selection, a.grid))
        logged_after = a.grid if snapshot == "post" else (
            t.actions[i + 1].grid if i < last else None
        )

        # an operation record's object field is the selection it acted on
        if a.category != "Selection" and a.object_cells:
            if a.selection != s.selection:
                mismatches += 1
                if resync:
                    s = replace(s, selection=_clip(a.selection, s.grid))
                    sel_adopted = True

        before = s.grid
        sel_before = s.selection
        clip_before = s.clipboard
        diverged = False
        ambiguous = False
        try:
            req, ambiguous, note_r = _build_request(a, s, logged_after, policy)
            note = note_r
            ns, _ = apply_action(s, req, policy)
        except (EngineError, NoCandidateMatches) as e:
            if not resync:
                raise StepFailed(i, e) from e
            # the log remains authoritative: skip the engine, adopt its grid
            adopted = a.grid if snapshot == "post" else s.grid
            divergences.append(Divergence(i, s.grid, adopted))
            req = ActionRequest(a.operation) if a.category != "Selection" else (
                ActionRequest("SelectGrid")
            )
            frames.append(
                Frame(i, before, req, adopted, diverged=True,
                      note=f"engine rejected: {e}",
                      selection_before=sel_before, clipboard_before=clip_before)
            )
            s = replace(s, grid=adopted, selection=_clip(s.selection, adopted),
                        step_count=s.step_count + 1)
            continue
        s = ns

        if a.operation == "Submit" and i != last:
            s = replace(s, submitted=False)
            note = (note + "; " if note else "") + "resumed after non-final submit"

        if snapshot == "post":
            if not grids_equal(s.grid, a.grid):
                diverged = True
                divergences.append(Divergence(i, s.grid, a.grid))
                if resync:
                    s = replace(s, grid=a.grid, selection=_clip(s.selection, a.grid))
            # a Selection record's object field is the post-action selection
            if a.category == "Selection" and a.object_cells is not None:
                if a.selection != s.selection:
                    mismatches += 1
                    if resync:
                        s = replace(s, selection=_clip(a.selection, s.grid))
                        sel_adopted = True

        frames.append(
            Frame(i, before, req, s.grid, diverged=diverged,
                  ambiguous=ambiguous, selection_adopted=sel_adopted, note=note,
                  selection_before=sel_before, clipboard_before=clip_before)
        )

    return ReplayResult(
        trajectory_id=t.trajectory_id,
        task_id=t.task_id,
        test_index=test_index,
        mode=mode,
        snapshot=snapshot,
        frames=tuple(frames),
        divergences=tuple(divergences),
        selection_mismatches=mismatches,
        success_check=grids_equal(s.grid, target),
    )


def _clip(selection: frozenset, grid: Grid) -> frozenset:
    return frozenset((r, c) for r, c in selection if grid.in_bounds(r, c))


def extract_transitions(r: ReplayResult) -> tuple[Transition, ...]:
    """MDP tuples, one per frame; reward 1 only on a verified success end."""
    n = len(r.frames)
    return tuple(
        Transition(
            state=f.state_before,
            action=f.action,
            next_state=f.state_after,
            reward=1 if (r.success_check and f.index == n - 1) else 0,
        )
        for f in r.frames
    )


def visited_grids(r: ReplayResult) -> Iterator[Grid]:
    """The initial grid plus the grid after every action."""
    if r.frames:
        yield r.frames[0].state_before
    for f in r.frames:
        yield f.state_after


def grid_accounting(results: Iterable[tuple[str, ReplayResult]]) -> GridAccount:
    """Distinct visited grids, and those shared across trajectories.

    A grid counts as cross-trajectory when at least two distinct
    trajectories of the same task visit it.
    """
    seen: dict[str, set] = {}  # hash -> {(task_id, trajectory_id)}
    task_pairs: dict[tuple[str, str], set] = {}  # (task, hash) -> {traj}
    for traj_id, r in results:
        for g in visited_grids(r):
            h = grid_hash(g)
            seen.setdefault(h, set()).add((r.task_id, traj_id))
            task_pairs.setdefault((r.task_id, h), set()).add(traj_id)
    cross_hashes = {h for (task, h), trajs in task_pairs.items() if len(trajs) >= 2}
    return GridAccount(unique_count=len(seen), cross_count=len(cross_hashes))


def divergence_records(r: ReplayResult) -> list[dict]:
    """Audit lines, one per divergence, ready for JSONL emission."""
    ops = {f.index: f.action.operation for f in r.frames}
    return [
        {
            "trajectory_id": r.trajectory_id,
            "step": d.step,
            "operation": ops.get(d.step),
            "predicted_hash": grid_hash(d.predicted),
            "logged_hash": grid_hash(d.logged),
        }
        for d in r.divergences
    ]


@dataclass
class AuditReport:
    """Corpus-level replay accounting under both snapshot readings."""

    trajectories: int = 0
    actions: int = 0
    replay_errors: int = 0
    success_labeled: int = 0
    success_consistent: int = 0  # success-labeled and ends at the test output
    diverged_steps_post: int = 0
    diverged_steps_pre: int = 0
    selection_mismatches: int = 0

    @property
    def divergence_rate_post(self) -> float:
        return self.diverged_steps_post / self.actions if self.actions else 0.0

    @property
    def divergence_rate_pre(self) -> float:
        return self.diverged_steps_pre / self.actions if self.actions else 0.0

    @property
    def success_consistency(self) -> float:
        return (
            self.success_consistent / self.success_labeled
            if self.success_labeled
            else 1.0
        )


def audit(
    trajectories: Iterable[Trajectory],
    tasks: dict[str, TaskSpec],
    policy: Policy = DEFAULT_POLICY,
) -> tuple[AuditReport, list[dict]]:
    """Replay a corpus in resync mode; compare both snapshot readings."""
    report = AuditReport()
    lines: list[dict] = []
    for t in trajectories:
        task = tasks.get(t.task_id)
        report.trajectories += 1
        report.actions += len(t.actions)
        if t.success:
            report.success_labeled += 1
        if task is None:
            report.replay_errors += 1
            continue
        try:
            post = replay(t, task, mode="resync", snapshot="post", policy=policy)
            pre = replay(t, task, mode="resync", snapshot="pre", policy=policy)
        except ReplayError:
            report.replay_errors += 1
            continue
        report.diverged_steps_post += len(post.divergences)
        report.diverged_steps_pre += len(pre.divergences)
        report.selection_mismatches += post.selection_mismatches
        if t.success and post.success_check:
            report.success_consistent += 1
        lines.extend(divergence_records(post))
    return report, lines
