"""Training-data exports from replayed trajectories.

Two formats come out of a replay.  Markov samples keep full editing
fidelity: each one is a (grid, object, operation, next grid, reward)
record whose transition re-verifies against the engine before emission.
Return-to-go tuples serve sequence modeling: the running reward-to-come
plus the state and an operation token, with the acted-on object and an
intention-cluster id as optional extra columns.
"""

from __future__ import annotations

import json
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .analytics.intention import IntentionClusters, canonical_key
from .engine import ActionRequest, Clipboard, EngineError, SessionState, apply_action
from .grid import Grid, grids_equal, make_grid
from .ingest import OPERATION_CATEGORY
from .replay import Frame, ReplayResult

__all__ = [
    "ExportError",
    "UnresolvedAction",
    "MissingIntentionIndex",
    "SinkUnwritable",
    "NoOperationsWarning",
    "MarkovSample",
    "DTSample",
    "to_markov_pairs",
    "to_dt_tuples",
    "build_intention_index",
    "write_jsonl",
    "read_markov_jsonl",
    "read_dt_jsonl",
]

DT_VARIANTS = ("triple", "quadruple", "pentuple")


class ExportError(Exception):
    pass


class UnresolvedAction(ExportError):
    """The frame cannot be turned into a verified state transition."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class MissingIntentionIndex(ExportError):
    pass


class SinkUnwritable(ExportError):
    pass


class NoOperationsWarning(UserWarning):
    """The trajectory held only selections; nothing to export."""


@dataclass(frozen=True)
class MarkovSample:
    """One verified engine transition, selection folded into the object."""

    grid: Grid
    object_cells: frozenset[tuple[int, int]]
    operation: ActionRequest
    next_grid: Grid
    reward: int

    def to_json(self) -> dict:
        return {
            "grid": [list(row) for row in self.grid.rows()],
            "object": sorted([r, c] for r, c in self.object_cells),
            "operation": _request_to_json(self.operation),
            "next_grid": [list(row) for row in self.next_grid.rows()],
            "reward": self.reward,
        }


@dataclass(frozen=True)
class DTSample:
    """Return-to-go tuple; object and intention appear variant-wise."""

    return_to_go: int
    state: Grid
    action: str
    t: int
    object_cells: frozenset[tuple[int, int]] | None = None
    intention: int | None = None

    def to_json(self) -> dict:
        out: dict = {
            "rtg": self.return_to_go,
            "state": [list(row) for row in self.state.rows()],
            "action": self.action,
            "t": self.t,
        }
        if self.object_cells is not None:
            out["object"] = sorted([r, c] for r, c in self.object_cells)
        if self.intention is not None:
            out["intention"] = self.intention
        return out


def _request_to_json(req: ActionRequest) -> dict:
    out: dict = {"name": req.operation}
    if req.position is not None:
        out["position"] = list(req.position)
    if req.cells is not None:
        out["cells"] = sorted([r, c] for r, c in req.cells)
    if req.color is not None:
        out["color"] = req.color
    if req.direction is not None:
        out["direction"] = req.direction
    if req.rotation is not None:
        out["rotation"] = req.rotation
    if req.axis is not None:
        out["axis"] = req.axis
    if req.dims is not None:
        out["dims"] = list(req.dims)
    return out


def _request_from_json(doc: dict) -> ActionRequest:
    return ActionRequest(
        operation=doc["name"],
        position=tuple(doc["position"]) if "position" in doc else None,
        cells=(
            frozenset((r, c) for r, c in doc["cells"]) if "cells" in doc else None
        ),
        color=doc.get("color"),
        direction=doc.get("direction"),
        rotation=doc.get("rotation"),
        axis=doc.get("axis"),
        dims=tuple(doc["dims"]) if "dims" in doc else None,
    )


def _retained(frames: Sequence[Frame]) -> list[Frame]:
    return [
        f
        for f in frames
        if OPERATION_CATEGORY[f.action.operation] not in ("Selection", "History")
    ]


def verify_sample(sample: MarkovSample, clipboard: Clipboard | None = None) -> bool:
    """Re-apply the operation and compare grids; the soundness check."""

    state = SessionState(
        grid=sample.grid,
        target=sample.grid,  # target only matters for reward, not the grid
        selection=sample.object_cells,
        clipboard=clipboard,
    )
    try:
        after, _ = apply_action(state, sample.operation)
    except EngineError:
        return False
    return grids_equal(after.grid, sample.next_grid)


def to_markov_pairs(r: ReplayResult) -> tuple[MarkovSample, ...]:
    """One verified sample per retained operation of a replay.

    Selection and History actions were already applied during replay;
    their effect survives as each operation's object field and state.
    Frames whose transition cannot be reproduced by re-application (log
    divergence, rejected steps) raise UnresolvedAction rather than emit
    an unsound sample.
    """

    ops = _retained(r.frames)
    if not ops:
        warnings.warn(
            f"trajectory {r.trajectory_id!r} has no operations to export",
            NoOperationsWarning,
            stacklevel=2,
        )
        return ()
    last_index = ops[-1].index
    samples: list[MarkovSample] = []
    for f in ops:
        sample = MarkovSample(
            grid=f.state_before,
            object_cells=f.selection_before,
            operation=f.action,
            next_grid=f.state_after,
            reward=1 if (r.success_check and f.index == last_index) else 0,
        )
        if not verify_sample(sample, clipboard=f.clipboard_before):
            raise UnresolvedAction(
                f"step {f.index} of {r.trajectory_id!r} does not re-apply "
                f"cleanly ({f.note or 'divergent frame'})",
                f.index,
            )
        samples.append(sample)
    return tuple(samples)


def to_dt_tuples(
    r: ReplayResult,
    variant: str = "triple",
    intention_index: dict | None = None,
) -> tuple[DTSample, ...]:
    """Return-to-go tuples over the retained operations of a replay.

    The reward is binary and terminal, so the undiscounted suffix sum is
    1 at every step of a verified success and 0 throughout a failure.
    The action column is the bare operation token; parameters live in the
    Markov export.  ``intention_index`` maps IntentionKey to cluster id
    (see analytics) and is required for the pentuple variant; shapes it
    does not know stay null.
    """

    if variant not in DT_VARIANTS:
        raise ExportError(f"variant must be one of {DT_VARIANTS}, got {variant!r}")
    if variant == "pentuple" and intention_index is None:
        raise MissingIntentionIndex("pentuple export needs an intention index")

    scale_mode = "native"
    if intention_index:
        scale_mode = next(k.scale_mode for k in intention_index)

    ops = _retained(r.frames)
    rtg = 1 if r.success_check else 0
    out: list[DTSample] = []
    for t, f in enumerate(ops):
        object_cells = f.selection_before if variant != "triple" else None
        intention = None
        if variant == "pentuple" and f.selection_before:
            key = canonical_key(
                f.selection_before, f.action.operation, scale_mode
            )
            intention = intention_index.get(key)
        out.append(
            DTSample(
                return_to_go=rtg,
                state=f.state_before,
                action=f.action.operation,
                t=t,
                object_cells=object_cells,
                intention=intention,
            )
        )
    return tuple(out)


def build_intention_index(clusters: IntentionClusters) -> dict:
    """Map every clustered key to its cluster's position in the report."""

    return {
        key: cluster_id
        for cluster_id, members in enumerate(clusters.clusters)
        for key in members
    }


def write_jsonl(samples: Iterable, sink) -> int:
    """Serialize samples one JSON object per line; returns the line count.

    ``sink`` is a path or a text file object.  Anything with a to_json
    method is welcome, which covers both sample kinds.
    """

    def emit(handle) -> int:
        n = 0
        for sample in samples:
            handle.write(json.dumps(sample.to_json(), separators=(",", ":")))
            handle.write("\n")
            n += 1
        return n

    if hasattr(sink, "write"):
        try:
            return emit(sink)
        except OSError as e:
            raise SinkUnwritable(str(e)) from e
    try:
        with open(sink, "w", encoding="utf-8") as handle:
            return emit(handle)
    except OSError as e:
        raise SinkUnwritable(f"cannot write {sink}: {e}") from e


def read_markov_jsonl(source) -> tuple[MarkovSample, ...]:
    """Parse a Markov JSONL export back into samples (lossless)."""

    out = []
    for doc in _read_lines(source):
        out.append(
            MarkovSample(
                grid=make_grid(doc["grid"]),
                object_cells=frozenset((r, c) for r, c in doc["object"]),
                operation=_request_from_json(doc["operation"]),
                next_grid=make_grid(doc["next_grid"]),
                reward=int(doc["reward"]),
            )
        )
    return tuple(out)


def read_dt_jsonl(source) -> tuple[DTSample, ...]:
    out = []
    for doc in _read_lines(source):
        out.append(
            DTSample(
                return_to_go=int(doc["rtg"]),
                state=make_grid(doc["state"]),
                action=doc["action"],
                t=int(doc["t"]),
                object_cells=(
                    frozenset((r, c) for r, c in doc["object"])
                    if "object" in doc
                    else None
                ),
                intention=doc.get("intention"),
            )
        )
    return tuple(out)


def _read_lines(source):
    if hasattr(source, "read"):
        for line in source:
            line = line.strip()
            if line:
                yield json.loads(line)
        return
    with open(source, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)
