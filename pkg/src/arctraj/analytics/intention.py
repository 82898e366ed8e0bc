"""Shared-intention analytics.

An intention is the pairing of a selection region with the operation then
applied to it.  Canonicalizing the region's shape (rotation, reflection,
optionally scale) makes intentions comparable across users and grids, which
supports trajectory similarity, clustering into recurring editing motifs,
and per-task uniqueness measurements.
"""

from __future__ import annotations

import warnings
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from ..grid import DihedralTransform, EmptySelection, map_cell, transform_dims
from ..ingest import OPERATION_CATEGORY, Trajectory
from .selection import AnalyticsError

__all__ = [
    "BadThreshold",
    "ScaleModeMismatch",
    "BothEmptyWarning",
    "IntentionKey",
    "IntentionInstance",
    "IntentionClusters",
    "RunLengthTable",
    "canonical_key",
    "extract_intentions",
    "traj_similarity",
    "key_similarity",
    "cluster_intentions",
    "selection_runlength_table",
    "uniqueness_ratio",
    "cluster_report",
    "runlength_csv",
    "uniqueness_csv",
]

SCALE_MODES = ("native", "unit8")

Mask = tuple[tuple[int, ...], ...]


class BadThreshold(AnalyticsError):
    pass


class ScaleModeMismatch(AnalyticsError):
    pass


class BothEmptyWarning(UserWarning):
    """Similarity of two intention-free trajectories is 1 by convention."""


@dataclass(frozen=True)
class IntentionKey:
    """Canonical form of one (selection shape, operation) pair.

    The mask is the selection cropped to its bounding box and replaced by
    the lexicographically smallest member of its dihedral orbit, so any
    rotation or reflection of the same shape produces the same key.  In
    unit8 mode the mask is first resampled to an 8x8 occupancy grid, which
    also collapses scale.
    """

    canonical_mask: Mask
    op_kind: str
    scale_mode: str

    @property
    def mask_cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (r, c)
            for r, row in enumerate(self.canonical_mask)
            for c, bit in enumerate(row)
            if bit
        )


@dataclass(frozen=True)
class IntentionInstance:
    trajectory_id: str
    index: int
    cells: frozenset[tuple[int, int]]
    op_kind: str
    key: IntentionKey


@dataclass(frozen=True)
class IntentionClusters:
    clusters: tuple[frozenset[IntentionKey], ...]
    threshold: float


@dataclass(frozen=True)
class RunLengthTable:
    """Distribution of selection-run lengths preceding operations.

    ``rows`` lists (length, count, pct, cumulative pct) for runs of at
    least one selection; operations with no preceding selection are kept
    apart in ``zero_count``.
    """

    rows: tuple[tuple[int, int, float, float], ...]
    zero_count: int
    total_operations: int

    @property
    def max_length(self) -> int:
        return self.rows[-1][0] if self.rows else 0


def _crop(cells: frozenset[tuple[int, int]]) -> Mask:
    top = min(r for r, _ in cells)
    left = min(c for _, c in cells)
    height = max(r for r, _ in cells) - top + 1
    width = max(c for _, c in cells) - left + 1
    rows = [[0] * width for _ in range(height)]
    for r, c in cells:
        rows[r - top][c - left] = 1
    return tuple(tuple(row) for row in rows)


def _resample_unit8(mask: Mask) -> Mask:
    h, w = len(mask), len(mask[0])
    return tuple(
        tuple(mask[(i * h) // 8][(j * w) // 8] for j in range(8))
        for i in range(8)
    )


def _orbit_minimum(mask: Mask) -> Mask:
    h, w = len(mask), len(mask[0])
    best: Mask | None = None
    for t in DihedralTransform:
        nh, nw = transform_dims(t, h, w)
        out = [[0] * nw for _ in range(nh)]
        for r in range(h):
            for c in range(w):
                nr, nc = map_cell(t, r, c, h, w)
                out[nr][nc] = mask[r][c]
        candidate = tuple(tuple(row) for row in out)
        if best is None or candidate < best:
            best = candidate
    assert best is not None
    return best


def canonical_key(
    cells: Iterable[tuple[int, int]], op_kind: str, scale_mode: str = "native"
) -> IntentionKey:
    cellset = frozenset(cells)
    if not cellset:
        raise EmptySelection("an intention needs a non-empty selection")
    if scale_mode not in SCALE_MODES:
        raise AnalyticsError(f"unknown scale mode {scale_mode!r}")
    mask = _crop(cellset)
    if scale_mode == "unit8":
        mask = _resample_unit8(mask)
    return IntentionKey(_orbit_minimum(mask), op_kind, scale_mode)


def extract_intentions(
    t: Trajectory, scale_mode: str = "native"
) -> tuple[IntentionInstance, ...]:
    """Pair every substantive operation with its latest preceding selection.

    Selection actions update the tracked region, History actions are
    skipped entirely, and an operation fired before any selection gets the
    whole grid (taken from the latest known snapshot).
    """

    out: list[IntentionInstance] = []
    latest: frozenset[tuple[int, int]] | None = None
    grid_dims: tuple[int, int] | None = None
    for i, a in enumerate(t.actions):
        category = OPERATION_CATEGORY[a.operation]
        if category == "Selection":
            cells = a.selection
            if not cells and a.position is not None:
                cells = frozenset({a.position})
            if cells:
                latest = cells
            if a.grid is not None:
                grid_dims = (a.grid.height, a.grid.width)
            continue
        if category == "History":
            continue
        cells = latest
        if cells is None:
            dims = grid_dims
            if dims is None and a.grid is not None:
                dims = (a.grid.height, a.grid.width)
            if dims is None:
                continue  # no way to reconstruct a region
            cells = frozenset(
                (r, c) for r in range(dims[0]) for c in range(dims[1])
            )
        out.append(
            IntentionInstance(
                trajectory_id=t.trajectory_id,
                index=i,
                cells=cells,
                op_kind=a.operation,
                key=canonical_key(cells, a.operation, scale_mode),
            )
        )
        if a.grid is not None:
            grid_dims = (a.grid.height, a.grid.width)
    return tuple(out)


def traj_similarity(
    a: Trajectory, b: Trajectory, scale_mode: str = "native"
) -> float:
    """Jaccard overlap of the two trajectories' distinct intention keys."""

    ka = {inst.key for inst in extract_intentions(a, scale_mode)}
    kb = {inst.key for inst in extract_intentions(b, scale_mode)}
    if not ka and not kb:
        warnings.warn(
            "both trajectories have no intentions; similarity is 1 by convention",
            BothEmptyWarning,
            stacklevel=2,
        )
        return 1.0
    return len(ka & kb) / len(ka | kb)


def key_similarity(a: IntentionKey, b: IntentionKey) -> float:
    """Mask Jaccard of two canonical keys; 0 across operation kinds."""

    if a.scale_mode != b.scale_mode:
        raise ScaleModeMismatch(f"{a.scale_mode} vs {b.scale_mode}")
    if a.op_kind != b.op_kind:
        return 0.0
    ca, cb = a.mask_cells, b.mask_cells
    union = ca | cb
    if not union:
        return 1.0
    return len(ca & cb) / len(union)


def cluster_intentions(
    instances: Iterable[IntentionInstance], tau: float = 0.5
) -> IntentionClusters:
    """Single-linkage grouping of distinct keys at threshold tau.

    Merging while the best inter-cluster similarity stays at or above tau
    is exactly the connected components of the pairwise >= tau graph.
    """

    if not 0.0 < tau <= 1.0:
        raise BadThreshold(f"tau must lie in (0, 1], got {tau}")
    keys = sorted(
        {inst.key for inst in instances},
        key=lambda k: (k.op_kind, k.canonical_mask),
    )
    parent = list(range(len(keys)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if keys[i].op_kind != keys[j].op_kind:
                continue
            if key_similarity(keys[i], keys[j]) >= tau:
                parent[find(j)] = find(i)

    groups: dict[int, set[IntentionKey]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(find(i), set()).add(key)
    clusters = sorted(
        (frozenset(g) for g in groups.values()),
        key=lambda g: min((k.op_kind, k.canonical_mask) for k in g),
    )
    return IntentionClusters(tuple(clusters), tau)


def selection_runlength_table(
    trajectories: Iterable[Trajectory],
) -> RunLengthTable:
    """How many consecutive selections immediately precede each operation.

    Every non-Selection action books the length of the selection run built
    up right before it, so booked counts sum to the number of non-Selection
    actions.  Runs never cross trajectory boundaries.
    """

    lengths: Counter[int] = Counter()
    for t in trajectories:
        run = 0
        for a in t.actions:
            if OPERATION_CATEGORY[a.operation] == "Selection":
                run += 1
            else:
                lengths[run] += 1
                run = 0
    zero = lengths.pop(0, 0)
    total = sum(lengths.values())
    rows: list[tuple[int, int, float, float]] = []
    cum = 0
    for length in sorted(lengths):
        count = lengths[length]
        cum += count
        rows.append((length, count, 100.0 * count / total, 100.0 * cum / total))
    return RunLengthTable(tuple(rows), zero, total + zero)


def uniqueness_ratio(
    trajectories: Sequence[Trajectory], scale_mode: str = "native"
) -> float:
    """Distinct intention-key sequences over trajectory count."""

    if not trajectories:
        raise AnalyticsError("uniqueness needs at least one trajectory")
    signatures = {
        tuple(inst.key for inst in extract_intentions(t, scale_mode))
        for t in trajectories
    }
    return len(signatures) / len(trajectories)


# ------------------------------------------------------------------ reports

def _rle(mask: Mask) -> list[list[int]]:
    flat = [bit for row in mask for bit in row]
    runs: list[list[int]] = []
    for bit in flat:
        if runs and runs[-1][0] == bit:
            runs[-1][1] += 1
        else:
            runs.append([bit, 1])
    return runs


def cluster_report(
    clusters: IntentionClusters,
    instances: Iterable[IntentionInstance] = (),
) -> dict:
    """JSON-ready cluster summary with run-length-encoded exemplar masks."""

    by_key: Counter[IntentionKey] = Counter(inst.key for inst in instances)
    out = []
    for members in clusters.clusters:
        exemplar = min(members, key=lambda k: (k.op_kind, k.canonical_mask))
        out.append(
            {
                "op_kind": exemplar.op_kind,
                "member_count": len(members),
                "instance_count": sum(by_key[k] for k in members),
                "exemplar": {
                    "height": len(exemplar.canonical_mask),
                    "width": len(exemplar.canonical_mask[0]),
                    "rle": _rle(exemplar.canonical_mask),
                },
            }
        )
    return {
        "threshold": clusters.threshold,
        "cluster_count": len(clusters.clusters),
        "clusters": out,
    }


def runlength_csv(table: RunLengthTable) -> str:
    lines = ["Length,Count,%,Cum. %"]
    for length, count, pct, cum in table.rows:
        lines.append(f"{length},{count},{pct:.1f},{cum:.1f}")
    return "\n".join(lines) + "\n"


def uniqueness_csv(
    by_task: dict[str, Sequence[Trajectory]], scale_mode: str = "native"
) -> str:
    lines = ["task_id,trajectories,unique_ratio"]
    for task_id in sorted(by_task):
        group = by_task[task_id]
        ratio = uniqueness_ratio(group, scale_mode)
        lines.append(f"{task_id},{len(group)},{ratio:.6f}")
    return "\n".join(lines) + "\n"
