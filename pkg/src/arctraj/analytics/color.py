"""Color-origin analytics.

Where do the colors people paint with come from?  Each task exposes three
candidate pools: the colors visible in the demonstration inputs, in the
demonstration outputs, and in the test input itself.  This module builds
those pools, classifies tasks by which pools suffice to produce the test
output, attributes individual colors to their most likely origin, and
summarizes painting behaviour across trajectories.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from ..grid import Grid, colors_of
from ..ingest import Trajectory, TaskSpec

__all__ = [
    "ColorSets",
    "ColorSourceClass",
    "SourceLabel",
    "RoleMap",
    "ColorUsage",
    "colorsets",
    "classify_task",
    "trajectory_color_usage",
    "attribute_color",
    "role_map",
    "covered_by_union",
    "classification_csv",
    "source_ratios",
]


@dataclass(frozen=True)
class ColorSets:
    """The candidate color pools of one task."""

    demo_in: frozenset[int]
    demo_out: frozenset[int]
    test_in: frozenset[int]

    @property
    def union(self) -> frozenset[int]:
        return self.demo_in | self.demo_out | self.test_in


class ColorSourceClass(enum.Enum):
    """Smallest pool ladder rung whose colors cover the test output."""

    TEST_INPUT_ONLY = "TestInputOnly"
    PLUS_EXAMPLE_OUTPUT = "PlusExampleOutput"
    PLUS_EXAMPLE_INPUT = "PlusExampleInput"
    UNSATISFIABLE = "Unsatisfiable"


class SourceLabel(enum.Enum):
    """Most likely origin of a single color, by fixed precedence."""

    TEST_IN = "test_in"
    DEMO_OUT = "demo_out"
    DEMO_IN = "demo_in"
    NONE = "none"


@dataclass(frozen=True)
class RoleMap:
    """Per-cell split of a grid into background and object cells.

    The background is the most frequent color; frequency ties break toward
    color 0 and then toward the lowest color code.
    """

    height: int
    width: int
    background_color: int
    object_cells: frozenset[tuple[int, int]]

    def role_at(self, row: int, col: int) -> str:
        return "object" if (row, col) in self.object_cells else "background"

    @property
    def background_cells(self) -> frozenset[tuple[int, int]]:
        every = {
            (r, c) for r in range(self.height) for c in range(self.width)
        }
        return frozenset(every - self.object_cells)


@dataclass(frozen=True)
class ColorUsage:
    """Which pools cover the colors one trajectory painted with.

    The three flags mirror the classification ladder: painted colors drawn
    entirely from the test input, from the test input plus demonstration
    outputs, and from the full union.  A trajectory that never paints gets
    ``no_paint`` set and vacuously true flags.
    """

    painted: frozenset[int]
    no_paint: bool
    from_test_in: bool
    with_demo_out: bool
    with_demo_in: bool


def _grid_colors(grids: Iterable[Grid]) -> frozenset[int]:
    out: set[int] = set()
    for g in grids:
        out |= colors_of(g)
    return frozenset(out)


def colorsets(task: TaskSpec, include_background: bool = True) -> ColorSets:
    """Collect the three candidate color pools of a task.

    ``include_background=False`` drops color 0 from every pool, a
    calibration switch for reproducing published counts under either
    convention.
    """

    demo_in = _grid_colors(pair[0] for pair in task.demos)
    demo_out = _grid_colors(pair[1] for pair in task.demos)
    test_in = _grid_colors(pair[0] for pair in task.tests)
    if not include_background:
        demo_in -= {0}
        demo_out -= {0}
        test_in -= {0}
    return ColorSets(frozenset(demo_in), frozenset(demo_out), frozenset(test_in))


def _test_output_colors(task: TaskSpec, include_background: bool) -> frozenset[int]:
    # a task "requires" a color if any of its test outputs does
    needed = _grid_colors(pair[1] for pair in task.tests)
    if not include_background:
        needed -= {0}
    return frozenset(needed)


def classify_task(
    task: TaskSpec, include_background: bool = True
) -> ColorSourceClass:
    """Rank the smallest pool that covers every test-output color."""

    cs = colorsets(task, include_background=include_background)
    needed = _test_output_colors(task, include_background)
    if needed <= cs.test_in:
        return ColorSourceClass.TEST_INPUT_ONLY
    if needed <= cs.test_in | cs.demo_out:
        return ColorSourceClass.PLUS_EXAMPLE_OUTPUT
    if needed <= cs.union:
        return ColorSourceClass.PLUS_EXAMPLE_INPUT
    return ColorSourceClass.UNSATISFIABLE


def covered_by_union(task: TaskSpec, include_background: bool = True) -> bool:
    cs = colorsets(task, include_background=include_background)
    return _test_output_colors(task, include_background) <= cs.union


def _painted_colors(t: Trajectory) -> tuple[frozenset[int], bool]:
    """All colors applied by Paint actions, with a saw-any-paint flag.

    Explicit color parameters win.  Records without one fall back to the
    post-action snapshot: the logged object cells show where paint landed,
    and failing that the diff against the previous snapshot shows what
    changed.  Paints that stay unreadable are skipped.
    """

    painted: set[int] = set()
    saw_paint = False
    prev_grid: Grid | None = None
    for a in t.actions:
        if a.operation == "Paint":
            saw_paint = True
            color = (a.params or {}).get("color")
            if color is not None:
                painted.add(int(color))
            elif a.grid is not None and a.object_cells:
                for cell in a.object_cells:
                    if a.grid.in_bounds(cell.row, cell.col):
                        painted.add(a.grid.at(cell.row, cell.col))
            elif a.grid is not None and prev_grid is not None:
                if (prev_grid.height, prev_grid.width) == (
                    a.grid.height,
                    a.grid.width,
                ):
                    for r in range(a.grid.height):
                        for c in range(a.grid.width):
                            after = a.grid.at(r, c)
                            if prev_grid.at(r, c) != after:
                                painted.add(after)
        if a.grid is not None:
            prev_grid = a.grid
    return frozenset(painted), saw_paint


def trajectory_color_usage(t: Trajectory, cs: ColorSets) -> ColorUsage:
    """Flag which pools cover everything the trajectory painted."""

    painted, saw_paint = _painted_colors(t)
    return ColorUsage(
        painted=painted,
        no_paint=not saw_paint,
        from_test_in=painted <= cs.test_in,
        with_demo_out=painted <= cs.test_in | cs.demo_out,
        with_demo_in=painted <= cs.union,
    )


def attribute_color(c: int, cs: ColorSets) -> SourceLabel:
    """Pick the color's origin by precedence test_in > demo_out > demo_in."""

    if c in cs.test_in:
        return SourceLabel.TEST_IN
    if c in cs.demo_out:
        return SourceLabel.DEMO_OUT
    if c in cs.demo_in:
        return SourceLabel.DEMO_IN
    return SourceLabel.NONE


def role_map(g: Grid) -> RoleMap:
    counts = Counter(g.cells)
    top = max(counts.values())
    candidates = {color for color, n in counts.items() if n == top}
    background = 0 if 0 in candidates else min(candidates)
    objects = frozenset(
        (r, c)
        for r in range(g.height)
        for c in range(g.width)
        if g.at(r, c) != background
    )
    return RoleMap(g.height, g.width, background, objects)


def classification_csv(
    tasks: Iterable[TaskSpec], include_background: bool = True
) -> str:
    lines = ["task_id,class"]
    for task in tasks:
        label = classify_task(task, include_background=include_background)
        lines.append(f"{task.task_id},{label.value}")
    return "\n".join(lines) + "\n"


def source_ratios(
    trajectories: Iterable[Trajectory],
    tasks: Mapping[str, TaskSpec],
    include_background: bool = True,
) -> dict[str, dict[str, float | int]]:
    """Per task, the share of trajectories each pool fully covers.

    Tasks the mapping does not know are skipped.  Output maps task_id to
    the three ladder ratios plus the no-paint share and trajectory count.
    """

    grouped: dict[str, list[ColorUsage]] = {}
    sets_cache: dict[str, ColorSets] = {}
    for t in trajectories:
        task = tasks.get(t.task_id)
        if task is None:
            continue
        cs = sets_cache.get(t.task_id)
        if cs is None:
            cs = colorsets(task, include_background=include_background)
            sets_cache[t.task_id] = cs
        grouped.setdefault(t.task_id, []).append(trajectory_color_usage(t, cs))

    out: dict[str, dict[str, float | int]] = {}
    for task_id, usages in grouped.items():
        n = len(usages)
        out[task_id] = {
            "trajectories": n,
            "test_in": sum(u.from_test_in for u in usages) / n,
            "plus_demo_out": sum(u.with_demo_out for u in usages) / n,
            "plus_demo_in": sum(u.with_demo_in for u in usages) / n,
            "no_paint": sum(u.no_paint for u in usages) / n,
        }
    return out
