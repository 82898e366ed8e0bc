"""Grid values and geometry primitives.

The grid is the unit of state everywhere in this package: a rectangular
field of color codes 0-9, at most 30x30 (the ARC bounds). Grids are
immutable values; every function here is pure, so they can be shared
freely across undo stacks, replay frames, and worker processes.

Coordinate convention: (row, col), row-major. Wire formats use x=col,
y=row and are converted at the parsing boundary, never here.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

MAX_SIDE = 30
NUM_COLORS = 10
BACKGROUND = 0


class GridError(ValueError):
    """Base class for grid construction/operation failures."""


class NonRectangular(GridError):
    """Rows of differing lengths."""


class ColorOutOfRange(GridError):
    """Cell value outside 0..9."""


class DimensionOutOfBounds(GridError):
    """Height or width outside 1..30."""


class EmptySelection(GridError):
    """An operation that needs cells received none."""


@dataclass(frozen=True)
class Grid:
    """Immutable rectangular grid of colors, row-major flat storage."""

    height: int
    width: int
    cells: tuple[int, ...]

    def at(self, row: int, col: int) -> int:
        return self.cells[row * self.width + col]

    def rows(self) -> list[list[int]]:
        """Nested-list view, the shape used by all JSON wire formats."""
        w = self.width
        return [list(self.cells[r * w : (r + 1) * w]) for r in range(self.height)]

    def with_cell(self, row: int, col: int, color: int) -> "Grid":
        idx = row * self.width + col
        cells = self.cells[:idx] + (color,) + self.cells[idx + 1 :]
        return Grid(self.height, self.width, cells)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def __str__(self) -> str:
        return "\n".join("".join(str(c) for c in row) for row in self.rows())


@dataclass(frozen=True)
class BoundingBox:
    """Smallest axis-aligned rectangle around a cell set."""

    top: int
    left: int
    h: int
    w: int

    @property
    def bottom(self) -> int:
        return self.top + self.h - 1

    @property
    def right(self) -> int:
        return self.left + self.w - 1

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right

    def cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (r, c)
            for r in range(self.top, self.top + self.h)
            for c in range(self.left, self.left + self.w)
        )


@dataclass(frozen=True)
class GridObject:
    """One connected same-color component."""

    cells: frozenset[tuple[int, int]]
    color: int
    bbox: BoundingBox


class DihedralTransform(Enum):
    """The eight symmetries of the square (composition-closed)."""

    IDENTITY = "identity"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    FLIP_H = "flipH"
    FLIP_V = "flipV"
    TRANSPOSE = "transpose"
    ANTITRANSPOSE = "antitranspose"


# (row, col) -> destination under each transform, for a source grid of h x w.
# Transforms that swap the axes also swap output dims.
_SWAPS_DIMS = {
    DihedralTransform.ROT90,
    DihedralTransform.ROT270,
    DihedralTransform.TRANSPOSE,
    DihedralTransform.ANTITRANSPOSE,
}


def transform_dims(t: DihedralTransform, h: int, w: int) -> tuple[int, int]:
    """Output dims of an h x w block under a transform."""
    return (w, h) if t in _SWAPS_DIMS else (h, w)


def map_cell(t: DihedralTransform, r: int, c: int, h: int, w: int) -> tuple[int, int]:
    """Destination of (row, col) within an h x w frame under a transform."""
    if t is DihedralTransform.IDENTITY:
        return r, c
    if t is DihedralTransform.ROT90:
        return c, h - 1 - r
    if t is DihedralTransform.ROT180:
        return h - 1 - r, w - 1 - c
    if t is DihedralTransform.ROT270:
        return w - 1 - c, r
    if t is DihedralTransform.FLIP_H:
        return r, w - 1 - c
    if t is DihedralTransform.FLIP_V:
        return h - 1 - r, c
    if t is DihedralTransform.TRANSPOSE:
        return c, r
    if t is DihedralTransform.ANTITRANSPOSE:
        return w - 1 - c, h - 1 - r
    raise AssertionError(t)


def make_grid(rows: Sequence[Sequence[int]]) -> Grid:
    """Build a validated Grid from nested rows.

    Raises NonRectangular, ColorOutOfRange, or DimensionOutOfBounds.
    """
    if not rows:
        raise DimensionOutOfBounds("grid must have at least one row")
    height = len(rows)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise NonRectangular("rows have differing lengths")
    if width == 0:
        raise DimensionOutOfBounds("grid must have at least one column")
    if height > MAX_SIDE or width > MAX_SIDE:
        raise DimensionOutOfBounds(f"{height}x{width} exceeds {MAX_SIDE}x{MAX_SIDE}")
    cells = []
    for row in rows:
        for v in row:
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < NUM_COLORS:
                raise ColorOutOfRange(f"cell value {v!r} not a color 0..9")
            cells.append(v)
    return Grid(height, width, tuple(cells))


def grids_equal(a: Grid, b: Grid) -> bool:
    return a.height == b.height and a.width == b.width and a.cells == b.cells


def grid_hash(g: Grid) -> str:
    """Digest of the canonical form "h,w|row-major colors".

    Dimensions are part of the canonical form so transposed grids with
    identical cell streams hash differently.
    """
    canon = f"{g.height},{g.width}|" + ",".join(map(str, g.cells))
    return hashlib.blake2b(canon.encode("ascii"), digest_size=16).hexdigest()


def colors_of(g: Grid) -> set[int]:
    return set(g.cells)


def bounding_box(cells: Iterable[tuple[int, int]]) -> BoundingBox:
    """Smallest box enclosing the (row, col) set; EmptySelection if empty."""
    cells = list(cells)
    if not cells:
        raise EmptySelection("bounding_box of empty cell set")
    rows = [r for r, _ in cells]
    cols = [c for _, c in cells]
    top, left = min(rows), min(cols)
    return BoundingBox(top, left, max(rows) - top + 1, max(cols) - left + 1)


_NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def flood_component(
    g: Grid, row: int, col: int, connectivity: int = 4
) -> frozenset[tuple[int, int]]:
    """All cells reachable from (row, col) through same-color neighbors."""
    if not g.in_bounds(row, col):
        raise GridError(f"({row},{col}) outside {g.height}x{g.width} grid")
    if connectivity not in (4, 8):
        raise GridError(f"connectivity must be 4 or 8, got {connectivity}")
    offsets = _NEIGHBORS_4 if connectivity == 4 else _NEIGHBORS_8
    color = g.at(row, col)
    seen = {(row, col)}
    frontier = [(row, col)]
    while frontier:
        r, c = frontier.pop()
        for dr, dc in offsets:
            nr, nc = r + dr, c + dc
            if (nr, nc) not in seen and g.in_bounds(nr, nc) and g.at(nr, nc) == color:
                seen.add((nr, nc))
                frontier.append((nr, nc))
    return frozenset(seen)


def connected_components(
    g: Grid, connectivity: int = 4, background: int = BACKGROUND
) -> list[GridObject]:
    """Maximal same-color components of non-background cells.

    Deterministic order: by first cell encountered in a row-major scan
    (i.e. by the component's topmost, then leftmost cell).
    """
    out: list[GridObject] = []
    claimed: set[tuple[int, int]] = set()
    for r in range(g.height):
        for c in range(g.width):
            if (r, c) in claimed or g.at(r, c) == background:
                continue
            cells = flood_component(g, r, c, connectivity)
            claimed |= cells
            out.append(GridObject(cells, g.at(r, c), bounding_box(cells)))
    return out


def transform_subgrid(sub: Grid, t: DihedralTransform) -> Grid:
    """Apply one of the eight square symmetries to a whole grid."""
    h, w = sub.height, sub.width
    nh, nw = (w, h) if t in _SWAPS_DIMS else (h, w)
    cells = [0] * (nh * nw)
    for r in range(h):
        for c in range(w):
            nr, nc = map_cell(t, r, c, h, w)
            cells[nr * nw + nc] = sub.at(r, c)
    return Grid(nh, nw, tuple(cells))


def transform_cells(
    cells: Iterable[tuple[int, int]], t: DihedralTransform, h: int, w: int
) -> frozenset[tuple[int, int]]:
    """Map a (row, col) set through a transform of an h x w frame."""
    return frozenset(map_cell(t, r, c, h, w) for r, c in cells)
