"""Deterministic interpreter for the grid-editing operation set.

A session is the MDP: the state is the working grid (plus editing
context: selection, clipboard, history), actions are the thirteen
operations, and reward is binary, earned exactly when a Submit leaves
the grid equal to the hidden test output.

All transitions are pure: ``apply_action`` returns a fresh SessionState
and never touches its input, so states can sit on undo stacks or be
shipped between workers freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .grid import (
    BACKGROUND,
    MAX_SIDE,
    BoundingBox,
    DihedralTransform,
    Grid,
    bounding_box,
    flood_component,
    grids_equal,
    transform_subgrid,
    map_cell,
)
from .ingest import OPERATION_CATEGORY, TaskSpec


class EngineError(Exception):
    """Base class for rejected transitions."""


class IndexOutOfRange(EngineError):
    pass


class EmptySelectionForOperation(EngineError):
    pass


class ClipboardEmpty(EngineError):
    pass


class AlreadySubmitted(EngineError):
    pass


class BadParameters(EngineError):
    pass


DIRECTIONS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
ROTATIONS = {"cw": DihedralTransform.ROT90, "ccw": DihedralTransform.ROT270}
AXES = {"horizontal": DihedralTransform.FLIP_H, "vertical": DihedralTransform.FLIP_V}

# Operations that rewrite the grid; exactly these push an undo snapshot.
MUTATING_OPS = frozenset({"Paint", "Move", "Rotate", "Flip", "Paste", "ResizeGrid"})


class Snapshot(NamedTuple):
    grid: Grid
    selection: frozenset


@dataclass(frozen=True)
class Clipboard:
    """Copied cells with their colors, kept at their original coords."""

    cells: tuple[tuple[int, int, int], ...]  # (row, col, color)
    bbox: BoundingBox


@dataclass(frozen=True)
class Policy:
    """Semantics switches for behaviors the logs underdetermine."""

    # Count a Move/Paste destination as overlap only when it was not
    # part of the moving selection itself (a solid block sliding one
    # cell always lands on itself; that is not an overlap).
    overlap_excludes_self: bool = True
    # Neighborhood used by SelectObject's flood fill (4 or 8).
    connectivity: int = 4


DEFAULT_POLICY = Policy()


@dataclass(frozen=True)
class ActionRequest:
    """One operation plus exactly the parameters it needs."""

    operation: str
    position: tuple[int, int] | None = None
    cells: frozenset | None = None  # explicit selection set (SelectGrid)
    color: int | None = None
    direction: str | None = None
    rotation: str | None = None
    axis: str | None = None
    dims: tuple[int, int] | None = None


@dataclass(frozen=True)
class StepOutcome:
    reward: int
    overlapped: bool
    terminal: bool
    note: str | None = None


@dataclass(frozen=True)
class SessionState:
    grid: Grid
    target: Grid
    selection: frozenset = frozenset()
    clipboard: Clipboard | None = None
    undo_stack: tuple[Snapshot, ...] = ()
    redo_stack: tuple[Snapshot, ...] = ()
    step_count: int = 0
    submitted: bool = False


def open_session(task: TaskSpec, test_index: int = 0) -> SessionState:
    """Fresh session on one test pair: working grid = the test input."""
    if not 0 <= test_index < len(task.tests):
        raise IndexOutOfRange(
            f"test_index {test_index} out of range for {len(task.tests)} test pair(s)"
        )
    test_in, test_out = task.tests[test_index]
    return SessionState(grid=test_in, target=test_out)


def current_reward(s: SessionState) -> int:
    return 1 if grids_equal(s.grid, s.target) else 0


_REQUIRED = {
    "SelectCell": ("position",),
    "SelectObject": ("position",),
    "SelectGrid": (),
    "Paint": ("color",),
    "Move": ("direction",),
    "Rotate": ("rotation",),
    "Flip": ("axis",),
    "ResizeGrid": ("dims",),
    "Copy": (),
    "Paste": (),
    "Undo": (),
    "Redo": (),
    "Submit": (),
}
_ALLOWED = {
    op: set(req) | ({"cells", "position", "dims"} if op == "SelectGrid" else set())
    for op, req in _REQUIRED.items()
}


def _validate(a: ActionRequest) -> None:
    if a.operation not in OPERATION_CATEGORY:
        raise BadParameters(f"unknown operation {a.operation!r}")
    required = _REQUIRED[a.operation]
    allowed = _ALLOWED[a.operation]
    for name in ("position", "cells", "color", "direction", "rotation", "axis", "dims"):
        value = getattr(a, name)
        if value is None:
            if name in required:
                raise BadParameters(f"{a.operation} requires {name}")
        elif name not in allowed:
            raise BadParameters(f"{a.operation} does not take {name}")
    if a.color is not None and not 0 <= a.color <= 9:
        raise BadParameters(f"color {a.color} outside 0..9")
    if a.direction is not None and a.direction not in DIRECTIONS:
        raise BadParameters(f"direction must be one of {sorted(DIRECTIONS)}")
    if a.rotation is not None and a.rotation not in ROTATIONS:
        raise BadParameters(f"rotation must be one of {sorted(ROTATIONS)}")
    if a.axis is not None and a.axis not in AXES:
        raise BadParameters(f"axis must be one of {sorted(AXES)}")
    if a.dims is not None:
        h, w = a.dims
        if not (1 <= h <= MAX_SIDE and 1 <= w <= MAX_SIDE):
            raise BadParameters(f"dims {a.dims} outside 1..{MAX_SIDE}")


def _need_selection(s: SessionState, op: str) -> frozenset:
    if not s.selection:
        raise EmptySelectionForOperation(f"{op} needs a non-empty selection")
    return s.selection


def _non_background_selected(s: SessionState, selection) -> bool:
    return any(s.grid.at(r, c) != BACKGROUND for r, c in selection)


def _select(s: SessionState, a: ActionRequest, policy: Policy = DEFAULT_POLICY) -> frozenset:
    g = s.grid
    if a.operation == "SelectCell":
        r, c = a.position
        if not g.in_bounds(r, c):
            raise BadParameters(f"position {a.position} outside grid")
        return frozenset({(r, c)})
    if a.operation == "SelectObject":
        r, c = a.position
        if not g.in_bounds(r, c):
            raise BadParameters(f"position {a.position} outside grid")
        return flood_component(g, r, c, connectivity=policy.connectivity)
    # SelectGrid: explicit cell set, a position+dims rectangle, or everything
    if a.cells is not None:
        for r, c in a.cells:
            if not g.in_bounds(r, c):
                raise BadParameters(f"selection cell ({r},{c}) outside grid")
        return frozenset(a.cells)
    if a.position is not None:
        top, left = a.position
        h, w = a.dims if a.dims else (1, 1)
        cells = frozenset(
            (r, c)
            for r in range(top, top + h)
            for c in range(left, left + w)
            if g.in_bounds(r, c)
        )
        if not cells:
            raise BadParameters("rectangle lies entirely outside the grid")
        return cells
    return frozenset((r, c) for r in range(g.height) for c in range(g.width))


def _move(s: SessionState, direction: str, policy: Policy):
    sel = _need_selection(s, "Move")
    dr, dc = DIRECTIONS[direction]
    g = s.grid
    moved = {}  # destination -> color
    for r, c in sel:
        nr, nc = r + dr, c + dc
        if g.in_bounds(nr, nc):
            moved[(nr, nc)] = g.at(r, c)
    ignore = sel if policy.overlap_excludes_self else frozenset()
    overlapped = any(
        g.at(r, c) != BACKGROUND for (r, c) in moved if (r, c) not in ignore
    )
    cells = list(g.cells)
    for r, c in sel:
        cells[r * g.width + c] = BACKGROUND
    for (r, c), color in moved.items():
        cells[r * g.width + c] = color
    new_grid = Grid(g.height, g.width, tuple(cells))
    return new_grid, frozenset(moved), overlapped


def _block_of(g: Grid, bbox: BoundingBox) -> Grid:
    rows = [
        [g.at(r, c) for c in range(bbox.left, bbox.left + bbox.w)]
        for r in range(bbox.top, bbox.top + bbox.h)
    ]
    return Grid(bbox.h, bbox.w, tuple(v for row in rows for v in row))


def _stamp_block(s: SessionState, t: DihedralTransform):
    """Shared core of Rotate and Flip: transform the bbox block in place."""
    sel = _need_selection(s, "Rotate/Flip")
    g = s.grid
    bbox = bounding_box(sel)
    block = transform_subgrid(_block_of(g, bbox), t)
    cells = list(g.cells)
    for r, c in bbox.cells():
        cells[r * g.width + c] = BACKGROUND
    for br in range(block.height):
        for bc in range(block.width):
            r, c = bbox.top + br, bbox.left + bc
            if g.in_bounds(r, c):
                cells[r * g.width + c] = block.at(br, bc)
    new_sel = set()
    for r, c in sel:
        nr, nc = map_cell(t, r - bbox.top, c - bbox.left, bbox.h, bbox.w)
        dest = (bbox.top + nr, bbox.left + nc)
        if g.in_bounds(*dest):
            new_sel.add(dest)
    return Grid(g.height, g.width, tuple(cells)), frozenset(new_sel)


def _paste(s: SessionState, policy: Policy):
    if s.clipboard is None or not s.clipboard.cells:
        raise ClipboardEmpty("Paste with nothing on the clipboard")
    g = s.grid
    clip = s.clipboard
    if s.selection:
        anchor = bounding_box(s.selection)
        dr, dc = anchor.top - clip.bbox.top, anchor.left - clip.bbox.left
    else:
        dr = dc = 0  # land where it was copied from
    cells = list(g.cells)
    new_sel = set()
    overlapped = False
    for r, c, color in clip.cells:
        nr, nc = r + dr, c + dc
        if not g.in_bounds(nr, nc):
            continue
        new_sel.add((nr, nc))
        if color != BACKGROUND:
            if g.at(nr, nc) != BACKGROUND:
                overlapped = True
            cells[nr * g.width + nc] = color
    return Grid(g.height, g.width, tuple(cells)), frozenset(new_sel), overlapped


def _resize(s: SessionState, dims: tuple[int, int]):
    nh, nw = dims
    g = s.grid
    cells = [BACKGROUND] * (nh * nw)
    for r in range(min(nh, g.height)):
        for c in range(min(nw, g.width)):
            cells[r * nw + c] = g.at(r, c)
    new_sel = frozenset((r, c) for r, c in s.selection if r < nh and c < nw)
    return Grid(nh, nw, tuple(cells)), new_sel


def apply_action(
    s: SessionState, a: ActionRequest, policy: Policy = DEFAULT_POLICY
) -> tuple[SessionState, StepOutcome]:
    """One MDP transition. Raises EngineError subclasses on bad requests."""
    if s.submitted:
        raise AlreadySubmitted("session already submitted")
    _validate(a)
    op = a.operation
    stepped = s.step_count + 1
    outcome = StepOutcome(reward=0, overlapped=False, terminal=False)

    if op in ("SelectCell", "SelectObject", "SelectGrid"):
        sel = _select(s, a, policy)
        ns = replace(s, selection=sel, step_count=stepped)
        return ns, replace(outcome, overlapped=_non_background_selected(s, sel))

    if op == "Copy":
        sel = _need_selection(s, "Copy")
        clip = Clipboard(
            cells=tuple(sorted((r, c, s.grid.at(r, c)) for r, c in sel)),
            bbox=bounding_box(sel),
        )
        return replace(s, clipboard=clip, step_count=stepped), outcome

    if op == "Undo":
        if not s.undo_stack:
            return replace(s, step_count=stepped), replace(
                outcome, note="undo stack empty; no-op"
            )
        snap = s.undo_stack[-1]
        ns = replace(
            s,
            grid=snap.grid,
            selection=snap.selection,
            undo_stack=s.undo_stack[:-1],
            redo_stack=s.redo_stack + (Snapshot(s.grid, s.selection),),
            step_count=stepped,
        )
        return ns, outcome

    if op == "Redo":
        if not s.redo_stack:
            return replace(s, step_count=stepped), replace(
                outcome, note="redo stack empty; no-op"
            )
        snap = s.redo_stack[-1]
        ns = replace(
            s,
            grid=snap.grid,
            selection=snap.selection,
            redo_stack=s.redo_stack[:-1],
            undo_stack=s.undo_stack + (Snapshot(s.grid, s.selection),),
            step_count=stepped,
        )
        return ns, outcome

    if op == "Submit":
        reward = current_reward(s)
        ns = replace(s, submitted=True, step_count=stepped)
        return ns, replace(outcome, reward=reward, terminal=True)

    # Grid-mutating operations from here on.
    if op == "Paint":
        sel = _need_selection(s, "Paint")
        cells = list(s.grid.cells)
        for r, c in sel:
            cells[r * s.grid.width + c] = a.color
        new_grid = Grid(s.grid.height, s.grid.width, tuple(cells))
        new_sel, overlapped = sel, False
    elif op == "Move":
        new_grid, new_sel, overlapped = _move(s, a.direction, policy)
    elif op == "Rotate":
        new_grid, new_sel = _stamp_block(s, ROTATIONS[a.rotation])
        overlapped = False
    elif op == "Flip":
        new_grid, new_sel = _stamp_block(s, AXES[a.axis])
        overlapped = False
    elif op == "Paste":
        new_grid, new_sel, overlapped = _paste(s, policy)
    elif op == "ResizeGrid":
        new_grid, new_sel = _resize(s, a.dims)
        overlapped = False
    else:  # pragma: no cover - _validate guarantees coverage of all 13
        raise BadParameters(f"unhandled operation {op!r}")

    ns = replace(
        s,
        grid=new_grid,
        selection=new_sel,
        undo_stack=s.undo_stack + (Snapshot(s.grid, s.selection),),
        redo_stack=(),
        step_count=stepped,
    )
    return ns, replace(outcome, overlapped=overlapped)
