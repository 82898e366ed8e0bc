"""Selection-bias analytics.

Where do people select, relative to where the colored content is? The
tools here build empirical per-cell selection distributions, compare
them against an object-region baseline (KL bias), measure dispersion
(spatial entropy) and misalignment (selected mass off the content), and
segment each trajectory into explore/exploit phases from the entropy of
a sliding window over selection centroids.

A "selection event" is a Selection-category record together with the
grid it was made on; since records snapshot the grid after the action
and selecting never edits cells, the record's own grid is exactly the
state at selection time.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from ..grid import BACKGROUND, Grid, bounding_box
from ..ingest import Trajectory

LATTICE = 30  # fractional-coordinate binning for mixed-shape aggregation


class AnalyticsError(ValueError):
    pass


class NoSelections(AnalyticsError):
    pass


class NoObjectCells(AnalyticsError):
    pass


class DimensionMismatch(AnalyticsError):
    pass


class TooFewSelections(AnalyticsError):
    pass


@dataclass(frozen=True)
class CellDistribution:
    """Probability mass over the cells of an h x w frame."""

    height: int
    width: int
    probs: dict  # (row, col) -> weight, nonzero entries only

    def __post_init__(self):
        total = sum(self.probs.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise AnalyticsError(f"weights sum to {total}, not 1")
        for (r, c), w in self.probs.items():
            if w < 0 or not (0 <= r < self.height and 0 <= c < self.width):
                raise AnalyticsError(f"bad entry {(r, c)}: {w}")

    def to_json(self) -> dict:
        weights = [0.0] * (self.height * self.width)
        for (r, c), w in self.probs.items():
            weights[r * self.width + c] = w
        return {"height": self.height, "width": self.width, "weights": weights}


@dataclass(frozen=True)
class SelectionEvent:
    """One logged selection: trajectory position, cells, and the state."""

    trajectory_id: str
    index: int
    cells: frozenset
    grid: Grid


@dataclass(frozen=True)
class Phase:
    start: int  # inclusive selection-event index
    end: int  # exclusive
    label: str  # explore | exploit


@dataclass(frozen=True)
class PhaseSegmentation:
    phases: tuple[Phase, ...]
    window: int
    threshold: float

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "threshold": self.threshold,
            "phases": [[p.start, p.end, p.label] for p in self.phases],
        }


@dataclass(frozen=True)
class ShapeHistogram:
    by_hw: dict  # (h, w) -> count
    by_area: dict  # selected-cell count -> count

    @property
    def total(self) -> int:
        return sum(self.by_hw.values())

    def to_json(self) -> dict:
        return {
            "by_hw": {f"{h}x{w}": n for (h, w), n in sorted(self.by_hw.items())},
            "by_area": {str(a): n for a, n in sorted(self.by_area.items())},
        }

    def to_csv(self) -> str:
        lines = ["kind,key,count"]
        lines += [f"hw,{h}x{w},{n}" for (h, w), n in sorted(self.by_hw.items())]
        lines += [f"area,{a},{n}" for a, n in sorted(self.by_area.items())]
        return "\n".join(lines) + "\n"


def selection_events(t: Trajectory) -> list[SelectionEvent]:
    """All usable Selection records of one trajectory, in order."""
    out = []
    for i, a in enumerate(t.actions):
        if a.category != "Selection":
            continue
        cells = a.selection
        if not cells and a.position is not None:
            cells = frozenset({a.position})
        if not cells:
            continue
        out.append(SelectionEvent(t.trajectory_id, i, cells, a.grid))
    return out


def _normalize(counts: Counter, height: int, width: int) -> CellDistribution:
    total = sum(counts.values())
    return CellDistribution(
        height, width, {cell: n / total for cell, n in counts.items()}
    )


def _lattice_cell(r: int, c: int, h: int, w: int) -> tuple[int, int]:
    return (r * LATTICE) // h, (c * LATTICE) // w


def selection_distribution(
    trajectories: Iterable[Trajectory],
) -> CellDistribution:
    """How often each cell is covered by a selection, normalized.

    Uses native grid coordinates when every selection happened on one
    shape; mixed shapes fall back to fractional binning on a fixed
    30x30 lattice.
    """
    events = [e for t in trajectories for e in selection_events(t)]
    if not events:
        raise NoSelections("no selection events to aggregate")
    shapes = {(e.grid.height, e.grid.width) for e in events}
    counts = Counter()
    if len(shapes) == 1:
        (h, w) = next(iter(shapes))
        for e in events:
            counts.update(e.cells)
        return _normalize(counts, h, w)
    for e in events:
        h, w = e.grid.height, e.grid.width
        counts.update(_lattice_cell(r, c, h, w) for r, c in e.cells)
    return _normalize(counts, LATTICE, LATTICE)


def object_distribution(grid: Grid, background: int = BACKGROUND) -> CellDistribution:
    """Uniform mass over the grid's non-background cells."""
    cells = [
        (r, c)
        for r in range(grid.height)
        for c in range(grid.width)
        if grid.at(r, c) != background
    ]
    if not cells:
        raise NoObjectCells("grid is entirely background")
    p = 1.0 / len(cells)
    return CellDistribution(grid.height, grid.width, {cell: p for cell in cells})


def aggregate_object_distribution(
    events: Sequence[SelectionEvent], background: int = BACKGROUND
) -> CellDistribution:
    """Mean of the per-event object baselines (state at selection time).

    Events on all-background states contribute nothing; if every state
    is blank this raises NoObjectCells.
    """
    if not events:
        raise NoSelections("no selection events")
    shapes = {(e.grid.height, e.grid.width) for e in events}
    mixed = len(shapes) > 1
    sums: Counter = Counter()
    used = 0
    for e in events:
        try:
            d = object_distribution(e.grid, background)
        except NoObjectCells:
            continue
        used += 1
        for (r, c), w in d.probs.items():
            key = (
                _lattice_cell(r, c, e.grid.height, e.grid.width) if mixed else (r, c)
            )
            sums[key] += w
    if not used:
        raise NoObjectCells("every selection-time state is entirely background")
    h, w = (LATTICE, LATTICE) if mixed else next(iter(shapes))
    return CellDistribution(h, w, {cell: v / used for cell, v in sums.items()})


def kl_bias(
    p_sel: CellDistribution, p_obj: CellDistribution, epsilon: float = 1e-9
) -> float:
    """KL(p_sel || p_obj) in nats, with additive smoothing on p_obj.

    The reference gets epsilon added on every cell and is renormalized,
    which keeps the divergence finite when selections land where the
    baseline has no mass; p_sel is used as-is.
    """
    if (p_sel.height, p_sel.width) != (p_obj.height, p_obj.width):
        raise DimensionMismatch(
            f"{p_sel.height}x{p_sel.width} vs {p_obj.height}x{p_obj.width}"
        )
    if epsilon <= 0:
        raise AnalyticsError("epsilon must be positive")
    n = p_obj.height * p_obj.width
    z = 1.0 + epsilon * n
    total = 0.0
    for cell, p in p_sel.probs.items():
        if p == 0.0:
            continue
        q = (p_obj.probs.get(cell, 0.0) + epsilon) / z
        total += p * math.log(p / q)
    return max(total, 0.0)  # clamp -0.0 and float dust on identical inputs


def spatial_entropy(p: CellDistribution) -> tuple[float, float]:
    """Shannon entropy in nats and its fraction of the ln(h*w) maximum."""
    h = -sum(w * math.log(w) for w in p.probs.values() if w > 0)
    h = max(h, 0.0)
    cap = math.log(p.height * p.width)
    return h, (h / cap if cap > 0 else 0.0)


def misalignment(
    trajectories: Iterable[Trajectory], background: int = BACKGROUND
) -> float:
    """Share of selected-cell mass landing on background cells."""
    on_content = 0
    total = 0
    for t in trajectories:
        for e in selection_events(t):
            for r, c in e.cells:
                total += 1
                if e.grid.at(r, c) != background:
                    on_content += 1
    if total == 0:
        raise NoSelections("no selection events")
    return 1.0 - on_content / total


def overlap_ratio(
    trajectories: Iterable[Trajectory], background: int = BACKGROUND
) -> float:
    return 1.0 - misalignment(trajectories, background)


def _centroid(cells: frozenset) -> tuple[int, int]:
    rs = [r for r, _ in cells]
    cs = [c for _, c in cells]
    return round(sum(rs) / len(rs)), round(sum(cs) / len(cs))


def _entropy_of_counts(counts: Counter) -> float:
    total = sum(counts.values())
    return -sum((n / total) * math.log(n / total) for n in counts.values())


def segment_phases(
    t: Trajectory, window: int = 5, min_len: int = 2
) -> PhaseSegmentation:
    """Explore/exploit segmentation of the selection sequence.

    The entropy of the trailing ``window`` selection centroids is
    compared to its per-trajectory median: above median reads as
    exploration (scattered attention), at or below as exploitation.
    Segments shorter than ``min_len`` are merged into their neighbor.
    """
    events = selection_events(t)
    n = len(events)
    if n < window:
        raise TooFewSelections(f"{n} selections < window {window}")
    centroids = [_centroid(e.cells) for e in events]
    full = [
        _entropy_of_counts(Counter(centroids[i - window + 1 : i + 1]))
        for i in range(window - 1, n)
    ]
    threshold = sorted(full)[len(full) // 2] if len(full) % 2 else (
        sum(sorted(full)[len(full) // 2 - 1 : len(full) // 2 + 1]) / 2
    )
    entropies = [full[0]] * (window - 1) + full  # pad the warm-up indices
    labels = ["explore" if e > threshold else "exploit" for e in entropies]

    phases: list[list] = []
    for i, lab in enumerate(labels):
        if phases and phases[-1][2] == lab:
            phases[-1][1] = i + 1
        else:
            phases.append([i, i + 1, lab])
    # fold short segments into a neighbor until all meet min_len
    while len(phases) > 1:
        short = next((k for k, p in enumerate(phases) if p[1] - p[0] < min_len), None)
        if short is None:
            break
        if short > 0:
            phases[short - 1][1] = phases[short][1]
        else:
            phases[1][0] = phases[0][0]
        del phases[short]
        merged = []
        for p in phases:  # re-coalesce equal-label neighbors after the fold
            if merged and merged[-1][2] == p[2]:
                merged[-1][1] = p[1]
            else:
                merged.append(p)
        phases = merged
    return PhaseSegmentation(
        tuple(Phase(s, e, lab) for s, e, lab in phases), window, threshold
    )


def bbox_stats(trajectories: Iterable[Trajectory]) -> ShapeHistogram:
    """Bounding-box shapes and cell counts over every selection."""
    by_hw: Counter = Counter()
    by_area: Counter = Counter()
    for t in trajectories:
        for e in selection_events(t):
            bb = bounding_box(e.cells)
            by_hw[(bb.h, bb.w)] += 1
            by_area[len(e.cells)] += 1
    return ShapeHistogram(dict(by_hw), dict(by_area))


def entropy_decay(t: Trajectory) -> list[float]:
    """Entropy of the selection distribution over growing prefixes."""
    events = selection_events(t)
    if not events:
        raise NoSelections("no selection events")
    counts: Counter = Counter()
    out = []
    for e in events:
        counts.update(e.cells)
        out.append(_entropy_of_counts(counts))
    return out
