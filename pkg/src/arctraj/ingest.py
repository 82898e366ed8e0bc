"""Parsing and validation for task documents and trajectory logs.

Two document families come in from outside:

* ARC task JSON: ``{"train": [{"input": [[..]], "output": [[..]]}], "test": [...]}``.
* Trajectory logs: an ``actionSequence`` array of per-action records
  (category, operation, position{x,y}, grid, object[{x,y,color}],
  overlapped, timestamp) plus envelope metadata whose key spelling
  varies by source; a thin alias layer normalizes it.

Everything downstream works in (row, col); the x=col / y=row swap
happens here and in the matching serializers, nowhere else.

Unknown envelope or action fields are kept verbatim in ``extras`` so a
parse/serialize round trip is lossless.
"""

from __future__ import annotations

import gzip
import io
import json
from collections.abc import Iterator
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import NamedTuple
from urllib.request import urlopen

from .grid import Grid, GridError, make_grid

CATEGORY_OPERATIONS: dict[str, frozenset[str]] = {
    "Selection": frozenset({"SelectCell", "SelectGrid", "SelectObject"}),
    "Coloring": frozenset({"Paint"}),
    "Critical": frozenset({"ResizeGrid", "Submit"}),
    "O2": frozenset({"Flip", "Move", "Rotate"}),
    "History": frozenset({"Redo", "Undo"}),
    "Clipboard": frozenset({"Copy", "Paste"}),
}
OPERATION_CATEGORY: dict[str, str] = {
    op: cat for cat, ops in CATEGORY_OPERATIONS.items() for op in ops
}
CATEGORIES = frozenset(CATEGORY_OPERATIONS)
OPERATIONS = frozenset(OPERATION_CATEGORY)


class IngestError(ValueError):
    """Base class for document parsing failures."""


class MalformedDocument(IngestError):
    pass


class GridInvalid(IngestError):
    pass


class MissingSplit(IngestError):
    pass


class UnknownCategory(IngestError):
    pass


class UnknownOperation(IngestError):
    pass


class CategoryOperationMismatch(IngestError):
    pass


class CellOutOfGrid(IngestError):
    pass


class BadTimestamp(IngestError):
    pass


class SourceUnreadable(IngestError):
    pass


class ObjectCell(NamedTuple):
    row: int
    col: int
    color: int


@dataclass(frozen=True)
class TaskSpec:
    """One ARC task: demonstration pairs plus held-out test pairs."""

    task_id: str
    demos: tuple[tuple[Grid, Grid], ...]
    tests: tuple[tuple[Grid, Grid], ...]


@dataclass(frozen=True)
class ActionRecord:
    """A single logged action: what was done, and the grid after it."""

    category: str
    operation: str
    grid: Grid
    timestamp: str
    position: tuple[int, int] | None = None  # (row, col)
    object_cells: tuple[ObjectCell, ...] | None = None
    overlapped: bool | None = None
    params: dict | None = None
    extras: dict = field(default_factory=dict)

    @property
    def selection(self) -> frozenset[tuple[int, int]]:
        """Logged object as a bare cell set (empty when absent)."""
        if not self.object_cells:
            return frozenset()
        return frozenset((c.row, c.col) for c in self.object_cells)


@dataclass(frozen=True)
class Trajectory:
    """One solving attempt: ordered actions plus envelope metadata."""

    trajectory_id: str
    task_id: str
    user_id: str
    actions: tuple[ActionRecord, ...]
    success: bool
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Finding:
    index: int
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Finding, ...]
    warnings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class StreamError:
    """A record that failed to parse, yielded in place of a Trajectory."""

    source: str
    index: int
    code: str
    message: str


def parse_timestamp(ts: str) -> datetime:
    """ISO-8601 instant; tolerates the trailing-Z spelling."""
    try:
        return datetime.fromisoformat(ts.replace("Z", "+00:00"))
    except (ValueError, AttributeError, TypeError) as e:
        raise BadTimestamp(f"unparseable timestamp {ts!r}") from e


def _require_list(doc: dict, key: str) -> list:
    v = doc.get(key)
    if not isinstance(v, list) or not v:
        raise MissingSplit(f"'{key}' must be a non-empty array")
    return v


def _pair_grids(entry: dict, where: str) -> tuple[Grid, Grid]:
    if not isinstance(entry, dict) or "input" not in entry or "output" not in entry:
        raise MalformedDocument(f"{where}: each pair needs 'input' and 'output'")
    try:
        return make_grid(entry["input"]), make_grid(entry["output"])
    except GridError as e:
        raise GridInvalid(f"{where}: {e}") from e
    except TypeError as e:
        raise GridInvalid(f"{where}: not a matrix") from e


def _load_json(document: bytes | str | dict) -> dict:
    if isinstance(document, dict):
        return document
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedDocument(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise MalformedDocument("top level must be a JSON object")
    return doc


def parse_task(document: bytes | str | dict, task_id: str | None = None) -> TaskSpec:
    """Parse one task document in the public train/test layout."""
    doc = _load_json(document)
    demos = tuple(
        _pair_grids(e, f"train[{i}]") for i, e in enumerate(_require_list(doc, "train"))
    )
    tests = tuple(
        _pair_grids(e, f"test[{i}]") for i, e in enumerate(_require_list(doc, "test"))
    )
    tid = task_id or doc.get("task_id") or doc.get("id") or doc.get("name") or ""
    return TaskSpec(str(tid), demos, tests)


_PARAM_KEYS = ("direction", "color", "height", "width", "axis", "rotation", "dims")

_ACTION_KNOWN = {
    "category",
    "operation",
    "position",
    "grid",
    "object",
    "overlapped",
    "timestamp",
    "params",
    *_PARAM_KEYS,
}


def parse_action(doc: dict, index: int = 0) -> ActionRecord:
    """Validate one action record against the operation table."""
    if not isinstance(doc, dict):
        raise MalformedDocument(f"action[{index}]: not an object")
    where = f"action[{index}]"
    category = doc.get("category")
    operation = doc.get("operation")
    if category not in CATEGORIES:
        raise UnknownCategory(f"{where}: unknown category {category!r}")
    if operation not in OPERATIONS:
        raise UnknownOperation(f"{where}: unknown operation {operation!r}")
    if OPERATION_CATEGORY[operation] != category:
        raise CategoryOperationMismatch(
            f"{where}: {operation} belongs to {OPERATION_CATEGORY[operation]}, "
            f"not {category}"
        )
    if "grid" not in doc:
        raise MalformedDocument(f"{where}: missing grid snapshot")
    try:
        grid = make_grid(doc["grid"])
    except (GridError, TypeError) as e:
        raise GridInvalid(f"{where}: {e}") from e

    position = None
    if doc.get("position") is not None:
        pos = doc["position"]
        if not isinstance(pos, dict) or "x" not in pos or "y" not in pos:
            raise MalformedDocument(f"{where}: position needs x and y")
        position = (int(pos["y"]), int(pos["x"]))

    object_cells = None
    if doc.get("object") is not None:
        if not isinstance(doc["object"], list):
            raise MalformedDocument(f"{where}: object must be an array")
        cells = []
        for cell in doc["object"]:
            try:
                oc = ObjectCell(int(cell["y"]), int(cell["x"]), int(cell["color"]))
            except (KeyError, TypeError, ValueError) as e:
                raise MalformedDocument(f"{where}: bad object cell {cell!r}") from e
            if not grid.in_bounds(oc.row, oc.col):
                raise CellOutOfGrid(
                    f"{where}: object cell (x={oc.col}, y={oc.row}) outside "
                    f"{grid.height}x{grid.width} grid"
                )
            cells.append(oc)
        object_cells = tuple(cells)

    ts = doc.get("timestamp")
    if not isinstance(ts, str):
        raise BadTimestamp(f"{where}: missing timestamp")
    parse_timestamp(ts)

    params = dict(doc["params"]) if isinstance(doc.get("params"), dict) else None
    # Some sources flatten parameters onto the action itself.
    loose = {k: doc[k] for k in _PARAM_KEYS if k in doc}
    if loose:
        params = {**loose, **(params or {})}

    overlapped = doc.get("overlapped")
    if overlapped is not None and not isinstance(overlapped, bool):
        raise MalformedDocument(f"{where}: overlapped must be boolean")

    extras = {k: v for k, v in doc.items() if k not in _ACTION_KNOWN}
    return ActionRecord(
        category=category,
        operation=operation,
        grid=grid,
        timestamp=ts,
        position=position,
        object_cells=object_cells,
        overlapped=overlapped,
        params=params,
        extras=extras,
    )


_TRAJ_ALIASES = {
    "trajectory_id": ("trajectory_id", "trajectoryId", "traj_id", "id"),
    "task_id": ("task_id", "taskId", "task"),
    "user_id": ("user_id", "userId", "user"),
    "success": ("success", "isSuccess", "is_success", "solved"),
    "actions": ("actionSequence", "action_sequence", "actions"),
}
_TRAJ_KNOWN = frozenset(k for names in _TRAJ_ALIASES.values() for k in names)


def _first_key(doc: dict, names: tuple[str, ...]):
    for n in names:
        if n in doc:
            return doc[n]
    return None


def parse_trajectory(document: bytes | str | dict) -> Trajectory:
    """Parse one trajectory log, normalizing envelope key spellings."""
    doc = _load_json(document)
    raw_actions = _first_key(doc, _TRAJ_ALIASES["actions"])
    if isinstance(raw_actions, str):
        # sources that keep the sequence as an embedded JSON string
        try:
            raw_actions = json.loads(raw_actions)
        except json.JSONDecodeError as e:
            raise MalformedDocument(f"actionSequence string not JSON: {e}") from e
    if not isinstance(raw_actions, list) or not raw_actions:
        raise MalformedDocument("missing or empty actionSequence")
    actions = tuple(parse_action(a, i) for i, a in enumerate(raw_actions))

    def _str(key: str) -> str:
        v = _first_key(doc, _TRAJ_ALIASES[key])
        return "" if v is None else str(v)

    success = _first_key(doc, _TRAJ_ALIASES["success"])
    extras = {k: v for k, v in doc.items() if k not in _TRAJ_KNOWN}
    return Trajectory(
        trajectory_id=_str("trajectory_id"),
        task_id=_str("task_id"),
        user_id=_str("user_id"),
        actions=actions,
        success=bool(success),
        extras=extras,
    )


def serialize_action(a: ActionRecord) -> dict:
    """Inverse of parse_action, back to the wire layout (x=col, y=row)."""
    doc: dict = {"category": a.category, "operation": a.operation}
    if a.position is not None:
        doc["position"] = {"x": a.position[1], "y": a.position[0]}
    doc["grid"] = a.grid.rows()
    if a.object_cells is not None:
        doc["object"] = [
            {"x": c.col, "y": c.row, "color": c.color} for c in a.object_cells
        ]
    if a.overlapped is not None:
        doc["overlapped"] = a.overlapped
    doc["timestamp"] = a.timestamp
    if a.params:
        doc["params"] = dict(a.params)
    doc.update(a.extras)
    return doc


def serialize_trajectory(t: Trajectory) -> dict:
    return {
        "trajectory_id": t.trajectory_id,
        "task_id": t.task_id,
        "user_id": t.user_id,
        "success": t.success,
        "actionSequence": [serialize_action(a) for a in t.actions],
        **t.extras,
    }


def validate_trajectory(t: Trajectory, task: TaskSpec | None = None) -> ValidationReport:
    """Cross-document consistency findings; never raises, never mutates."""
    errors: list[Finding] = []
    warnings: list[Finding] = []
    if task is not None and t.task_id and task.task_id and t.task_id != task.task_id:
        errors.append(
            Finding(-1, "TaskMismatch", f"trajectory is for {t.task_id!r}, "
                    f"task document is {task.task_id!r}")
        )
    if not t.actions:
        errors.append(Finding(-1, "EmptyTrajectory", "no actions"))
    prev = None
    for i, a in enumerate(t.actions):
        ts = parse_timestamp(a.timestamp)
        if prev is not None and ts < prev:
            warnings.append(
                Finding(i, "TimestampOrder", f"timestamp decreases at action {i}")
            )
        prev = ts
        if a.operation == "Submit" and i != len(t.actions) - 1:
            warnings.append(
                Finding(i, "SubmitNotLast", f"Submit at action {i} is not final")
            )
    return ValidationReport(tuple(errors), tuple(warnings))


def _iter_lines(fh: io.IOBase, source: str) -> Iterator[Trajectory | StreamError]:
    text = io.TextIOWrapper(fh, encoding="utf-8")
    first = text.read(1)
    if first == "":
        return
    if first == "[":
        # a whole-array file cannot be streamed line-wise; parse it in one go
        try:
            docs = json.loads(first + text.read())
        except json.JSONDecodeError as e:
            yield StreamError(source, 0, "MalformedDocument", str(e))
            return
        for i, doc in enumerate(docs):
            yield _parse_record(doc, source, i)
        return
    index = 0
    prefix = first  # the sniffed char belongs to the first line
    for line in text:
        line = (prefix + line).strip()
        prefix = ""
        if not line:
            continue
        yield _parse_record(line, source, index)
        index += 1


def _parse_record(raw, source: str, index: int) -> Trajectory | StreamError:
    try:
        return parse_trajectory(raw)
    except IngestError as e:
        return StreamError(source, index, type(e).__name__, str(e))


def _open_stream(source: str):
    if source.startswith(("http://", "https://", "file://")):
        try:
            fh = urlopen(source)  # noqa: S310 (explicit dataset URL from the user)
        except Exception as e:
            raise SourceUnreadable(f"cannot open {source}: {e}") from e
        if source.rstrip("/").endswith(".gz"):
            return gzip.GzipFile(fileobj=fh)
        return fh
    path = Path(source)
    try:
        if path.suffix == ".gz":
            return gzip.open(path, "rb")
        return open(path, "rb")
    except OSError as e:
        raise SourceUnreadable(f"cannot open {source}: {e}") from e


def stream_dataset(source: str | Path) -> Iterator[Trajectory | StreamError]:
    """Lazily yield trajectories from a JSONL file, directory, or URL.

    Bad records come out as StreamError items; the stream keeps going.
    Gzip is transparent (by .gz suffix). Memory use is bounded by the
    largest single record, not the corpus.
    """
    src = str(source)
    path = Path(src)
    if not src.startswith(("http://", "https://", "file://")) and path.is_dir():
        names = sorted(
            p for p in path.iterdir()
            if p.suffix in (".json", ".jsonl") or p.name.endswith((".json.gz", ".jsonl.gz"))
        )
        if not names:
            raise SourceUnreadable(f"no .json/.jsonl files under {src}")
        for p in names:
            yield from stream_dataset(p)
        return
    fh = _open_stream(src)
    try:
        yield from _iter_lines(fh, src)
    finally:
        fh.close()


def load_tasks(source: str | Path) -> dict[str, TaskSpec]:
    """Load a directory of task JSON files; filename stem is the task id."""
    path = Path(source)
    if path.is_file():
        t = parse_task(path.read_bytes(), task_id=path.stem.removesuffix(".json"))
        return {t.task_id: t}
    if not path.is_dir():
        raise SourceUnreadable(f"no such file or directory: {source}")
    out: dict[str, TaskSpec] = {}
    for p in sorted(path.glob("*.json")):
        out[p.stem] = parse_task(p.read_bytes(), task_id=p.stem)
    if not out:
        raise SourceUnreadable(f"no task .json files under {source}")
    return out
