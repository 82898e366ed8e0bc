"""Batch entry points: validate, audit, report, export, and serve commands.

Every command reads the same two inputs (a trajectory dataset and a task
corpus) and writes data files into an output directory.  All tunables sit
on one shared flag surface so a run is fully described by its command
line; each flag can also come from an environment variable of the same
name uppercased (--scale-mode becomes SCALE_MODE).  Outputs carry no
timestamps, so rerunning a command over identical inputs rewrites
byte-identical files.

Exit codes: 0 success, 1 data errors, 2 usage errors.
"""

from __future__ import annotations

import json
import socket
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields as dataclass_fields
from pathlib import Path

import click

from .analytics.color import classification_csv, source_ratios
from .analytics.intention import (
    SCALE_MODES,
    cluster_intentions,
    cluster_report,
    extract_intentions,
    runlength_csv,
    selection_runlength_table,
    uniqueness_csv,
)
from .analytics.summary import summaries_by_task
from .engine import Policy
from .export import (
    DT_VARIANTS,
    UnresolvedAction,
    build_intention_index,
    to_dt_tuples,
    to_markov_pairs,
    write_jsonl,
)
from .ingest import (
    Finding,
    IngestError,
    StreamError,
    Trajectory,
    load_tasks,
    stream_dataset,
    validate_trajectory,
)
from .replay import AuditReport, ReplayError, audit, grid_accounting, replay
from .stats import compute_basic_stats

RTG_RULE = (
    "binary terminal reward: return-to-go is 1 at every step of a "
    "verified success and 0 at every step of a failure"
)


# ------------------------------------------------------------- plumbing


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    click.echo(f"wrote {path}")


def _load_inputs(dataset: str, tasks_dir: str):
    """Tasks plus trajectories sorted by id; parse failures come along."""
    try:
        tasks = load_tasks(tasks_dir)
    except IngestError as e:
        raise click.ClickException(str(e)) from e
    trajectories: list[Trajectory] = []
    stream_errors: list[StreamError] = []
    try:
        for item in stream_dataset(dataset):
            if isinstance(item, StreamError):
                stream_errors.append(item)
            else:
                trajectories.append(item)
    except IngestError as e:
        raise click.ClickException(str(e)) from e
    trajectories.sort(key=lambda t: t.trajectory_id)
    return tasks, trajectories, stream_errors


def _dataset_files(dataset: str) -> list[str]:
    path = Path(dataset)
    if path.is_dir():
        return [
            str(p)
            for p in sorted(path.iterdir())
            if p.suffix in (".json", ".jsonl")
            or p.name.endswith((".json.gz", ".jsonl.gz"))
        ]
    return [dataset]


def _finding_doc(f: Finding) -> dict:
    return {"index": f.index, "code": f.code, "message": f.message}


def _chunks(items: list, n: int) -> list[list]:
    """At most n contiguous slices; order within and across is preserved."""
    n = min(n, len(items)) or 1
    size, extra = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        out.append(items[start:end])
        start = end
    return out


def _audit_chunk(args):
    trajectories, tasks, policy = args
    return audit(trajectories, tasks, policy)


def _replay_chunk(args):
    trajectories, tasks, mode, policy = args
    results, errors = [], 0
    for t in trajectories:
        task = tasks.get(t.task_id)
        if task is None:
            errors += 1
            continue
        try:
            results.append((t.trajectory_id, replay(t, task, mode=mode, policy=policy)))
        except ReplayError:
            errors += 1
    return results, errors


def _pool_map(fn, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


# ---------------------------------------------------------- flag surface


def _io_options(dataset_required: bool = True):
    def wrap(f):
        f = click.option(
            "--out",
            envvar="OUT",
            default="reports",
            show_default=True,
            type=click.Path(file_okay=False, path_type=Path),
            help="Directory output files are written into.",
        )(f)
        f = click.option(
            "--tasks",
            "tasks_dir",
            envvar="TASKS",
            required=True,
            help="Task corpus: a directory of task JSON files, or one file.",
        )(f)
        f = click.option(
            "--dataset",
            envvar="DATASET",
            required=dataset_required,
            help="Trajectory dataset: JSON/JSONL file, directory, or URL.",
        )(f)
        return f

    return wrap


def _tunable_options(f):
    f = click.option(
        "--workers",
        envvar="WORKERS",
        default=1,
        show_default=True,
        type=click.IntRange(min=1),
        help="Worker processes for replay-heavy commands.",
    )(f)
    f = click.option(
        "--scale-mode",
        envvar="SCALE_MODE",
        default="native",
        show_default=True,
        type=click.Choice(SCALE_MODES),
        help="Mask scale for intention comparison.",
    )(f)
    f = click.option(
        "--connectivity",
        envvar="CONNECTIVITY",
        default="4",
        show_default=True,
        type=click.Choice(["4", "8"]),
        callback=lambda ctx, param, value: int(value),
        help="Flood-fill neighborhood for SelectObject.",
    )(f)
    f = click.option(
        "--window",
        envvar="WINDOW",
        default=5,
        show_default=True,
        type=click.IntRange(min=2),
        help="Trailing window for phase segmentation.",
    )(f)
    f = click.option(
        "--epsilon",
        envvar="EPSILON",
        default=1e-9,
        show_default=True,
        type=click.FloatRange(min=0, min_open=True),
        help="Smoothing mass for the selection-bias baseline.",
    )(f)
    f = click.option(
        "--tau",
        envvar="TAU",
        default=0.5,
        show_default=True,
        type=click.FloatRange(min=0, max=1, min_open=True),
        help="Jaccard threshold for intention clustering.",
    )(f)
    f = click.option(
        "--mode",
        envvar="MODE",
        default="resync",
        show_default=True,
        type=click.Choice(["strict", "resync"]),
        help="Replay mode wherever trajectories are re-run.",
    )(f)
    return f


@click.group()
def main():
    """Grid-trajectory toolkit: batch reports, exports, and a live service."""


# -------------------------------------------------------------- commands


@main.command()
@_io_options()
@_tunable_options
@click.pass_context
def validate(ctx, dataset, tasks_dir, out, **_):
    """Check every record; exit 1 iff any trajectory has errors."""
    try:
        tasks = load_tasks(tasks_dir)
    except IngestError as e:
        raise click.ClickException(str(e)) from e

    total = 0
    bad = 0
    for source in _dataset_files(dataset):
        findings = []
        try:
            items = list(stream_dataset(source))
        except IngestError as e:
            raise click.ClickException(str(e)) from e
        for item in items:
            if isinstance(item, StreamError):
                bad += 1
                findings.append(
                    {
                        "trajectory_id": None,
                        "errors": [
                            {"index": item.index, "code": item.code,
                             "message": item.message}
                        ],
                        "warnings": [],
                    }
                )
                continue
            total += 1
            report = validate_trajectory(item, tasks.get(item.task_id))
            if not report.ok:
                bad += 1
            if report.errors or report.warnings:
                findings.append(
                    {
                        "trajectory_id": item.trajectory_id,
                        "errors": [_finding_doc(f) for f in report.errors],
                        "warnings": [_finding_doc(f) for f in report.warnings],
                    }
                )
        stem = Path(source).name.split(".")[0] or "dataset"
        _write(
            out / f"validate_{stem}.json",
            _dump_json(
                {"source": Path(source).name, "records_with_findings": findings}
            ),
        )
    if total == 0 and bad == 0:
        click.echo("warning: dataset holds no trajectories", err=True)
    click.echo(f"validated {total} trajectories, {bad} with errors")
    if bad:
        ctx.exit(1)


@main.command("audit")
@_io_options()
@_tunable_options
def audit_cmd(dataset, tasks_dir, out, connectivity, workers, **_):
    """Replay the corpus and report every predicted/logged divergence."""
    tasks, trajectories, stream_errors = _load_inputs(dataset, tasks_dir)
    policy = Policy(connectivity=connectivity)
    parts = _pool_map(
        _audit_chunk,
        [(chunk, tasks, policy) for chunk in _chunks(trajectories, workers)],
        workers,
    )
    report = AuditReport(
        **{
            f.name: sum(getattr(part, f.name) for part, _ in parts)
            for f in dataclass_fields(AuditReport)
        }
    )
    lines = [line for _, chunk_lines in parts for line in chunk_lines]
    per_operation = Counter(
        line["operation"] for line in lines if line["operation"]
    )
    doc = {
        "trajectories": report.trajectories,
        "actions": report.actions,
        "replay_errors": report.replay_errors + len(stream_errors),
        "success_labeled": report.success_labeled,
        "success_consistent": report.success_consistent,
        "success_consistency": report.success_consistency,
        "diverged_steps_post": report.diverged_steps_post,
        "diverged_steps_pre": report.diverged_steps_pre,
        "divergence_rate_post": report.divergence_rate_post,
        "divergence_rate_pre": report.divergence_rate_pre,
        "selection_mismatches": report.selection_mismatches,
        "per_operation_divergences": dict(sorted(per_operation.items())),
    }
    _write(out / "audit.json", _dump_json(doc))
    _write(
        out / "divergences.jsonl",
        "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines),
    )
    click.echo(
        f"audited {report.trajectories} trajectories, "
        f"{len(lines)} diverged steps"
    )


@main.command()
@_io_options()
@_tunable_options
def stats(dataset, tasks_dir, out, mode, connectivity, workers, **_):
    """Corpus-level counts: actions, object use, grid sharing, coverage."""
    tasks, trajectories, _errors = _load_inputs(dataset, tasks_dir)
    policy = Policy(connectivity=connectivity)
    parts = _pool_map(
        _replay_chunk,
        [(chunk, tasks, mode, policy) for chunk in _chunks(trajectories, workers)],
        workers,
    )
    results = [pair for chunk_results, _ in parts for pair in chunk_results]
    account = grid_accounting(results)
    report = compute_basic_stats(trajectories, account)
    _write(out / "stats.json", _dump_json(report.to_json()))
    _write(out / "stats.txt", report.to_text())
    click.echo(
        f"{report.trajectories_total} trajectories over {report.tasks} tasks"
    )


@main.command()
@_io_options()
@_tunable_options
def bias(dataset, tasks_dir, out, epsilon, tau, window, scale_mode, **_):
    """Per-task analytics roll-up, identical to the service payloads."""
    tasks, trajectories, _errors = _load_inputs(dataset, tasks_dir)
    summaries = summaries_by_task(
        tasks,
        trajectories,
        epsilon=epsilon,
        tau=tau,
        window=window,
        scale_mode=scale_mode,
    )
    _write(out / "task_summaries.json", _dump_json(summaries))
    click.echo(f"summarized {len(summaries)} tasks")


@main.command()
@_io_options()
@_tunable_options
def colors(dataset, tasks_dir, out, **_):
    """Color-source classification per task plus per-trajectory coverage."""
    tasks, trajectories, _errors = _load_inputs(dataset, tasks_dir)
    ordered = [tasks[k] for k in sorted(tasks)]
    _write(out / "color_classes.csv", classification_csv(ordered))
    ratios = source_ratios(trajectories, tasks)
    _write(out / "color_sources.json", _dump_json(ratios))
    class_counts = Counter(
        line.split(",")[1] for line in
        classification_csv(ordered).splitlines()[1:]
    )
    click.echo(
        f"classified {len(ordered)} tasks: "
        + ", ".join(f"{k}={v}" for k, v in sorted(class_counts.items()))
    )


@main.command()
@_io_options()
@_tunable_options
def intentions(dataset, tasks_dir, out, tau, scale_mode, **_):
    """Intention clusters, selection run lengths, and uniqueness ratios."""
    tasks, trajectories, _errors = _load_inputs(dataset, tasks_dir)
    instances = [
        inst for t in trajectories for inst in extract_intentions(t, scale_mode)
    ]
    clusters = cluster_intentions(instances, tau)
    _write(
        out / "intention_clusters.json",
        _dump_json(cluster_report(clusters, instances)),
    )
    _write(
        out / "selection_runs.csv",
        runlength_csv(selection_runlength_table(trajectories)),
    )
    by_task: dict[str, list[Trajectory]] = {}
    for t in trajectories:
        by_task.setdefault(t.task_id, []).append(t)
    _write(out / "uniqueness.csv", uniqueness_csv(by_task, scale_mode))
    click.echo(
        f"{len(instances)} intentions in {len(clusters.clusters)} clusters"
    )


@main.command()
@_io_options()
@_tunable_options
@click.option(
    "--format",
    "fmt",
    envvar="FORMAT",
    default="markov",
    show_default=True,
    type=click.Choice(["markov", "dt"]),
    help="markov: verified state-action pairs; dt: return-to-go tuples.",
)
@click.option(
    "--variant",
    envvar="VARIANT",
    default="triple",
    show_default=True,
    type=click.Choice(DT_VARIANTS),
    help="Tuple arity for the dt format.",
)
def export(dataset, tasks_dir, out, mode, connectivity, tau, scale_mode,
           fmt, variant, **_):
    """Write training tuples as JSONL plus a .meta.json sidecar."""
    tasks, trajectories, _errors = _load_inputs(dataset, tasks_dir)
    policy = Policy(connectivity=connectivity)

    results = []
    skipped: list[dict] = []
    for t in trajectories:
        task = tasks.get(t.task_id)
        if task is None:
            skipped.append(
                {"trajectory_id": t.trajectory_id, "reason": "TaskMissing"}
            )
            continue
        try:
            results.append(replay(t, task, mode=mode, policy=policy))
        except ReplayError as e:
            skipped.append(
                {"trajectory_id": t.trajectory_id, "reason": type(e).__name__}
            )

    samples: list = []
    if fmt == "markov":
        for r in results:
            try:
                samples.extend(to_markov_pairs(r))
            except UnresolvedAction as e:
                skipped.append(
                    {
                        "trajectory_id": r.trajectory_id,
                        "reason": "UnresolvedAction",
                        "step": e.index,
                    }
                )
        path = out / "markov.jsonl"
    else:
        index = None
        if variant == "pentuple":
            instances = [
                inst
                for t in trajectories
                for inst in extract_intentions(t, scale_mode)
            ]
            if not instances:
                raise click.ClickException(
                    "pentuple export needs intention clusters, but the "
                    "corpus yields no intentions"
                )
            index = build_intention_index(cluster_intentions(instances, tau))
        for r in results:
            samples.extend(to_dt_tuples(r, variant, index))
        path = out / f"dt_{variant}.jsonl"

    path.parent.mkdir(parents=True, exist_ok=True)
    count = write_jsonl(samples, path)
    click.echo(f"wrote {path}")
    meta = {
        "format": fmt,
        "variant": variant if fmt == "dt" else None,
        "samples": count,
        "trajectories": len(trajectories),
        "skipped": skipped,
        "reward_rule": RTG_RULE,
        "params": {
            "mode": mode,
            "connectivity": connectivity,
            "tau": tau,
            "scale_mode": scale_mode,
        },
    }
    _write(path.with_suffix(".meta.json"), _dump_json(meta))
    click.echo(f"exported {count} samples, skipped {len(skipped)} trajectories")


@main.command()
@_io_options(dataset_required=False)
@_tunable_options
@click.option(
    "--serve-addr",
    envvar="SERVE_ADDR",
    default="127.0.0.1:8080",
    show_default=True,
    help="host:port to bind.",
)
def serve(dataset, tasks_dir, out, epsilon, tau, window, scale_mode,
          serve_addr, **_):
    """Run the live recording service; journals land under --out."""
    from .service import create_app

    try:
        tasks = load_tasks(tasks_dir)
    except IngestError as e:
        raise click.ClickException(str(e)) from e
    corpus: dict[str, Trajectory] = {}
    if dataset:
        _, trajectories, _errors = _load_inputs(dataset, tasks_dir)
        corpus = {t.trajectory_id: t for t in trajectories}

    host, _, port_text = serve_addr.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        raise click.UsageError(f"bad --serve-addr {serve_addr!r}") from None
    probe = socket.socket()
    try:
        probe.bind((host, port))
    except OSError as e:
        raise click.ClickException(f"cannot bind {serve_addr}: {e}") from e
    finally:
        probe.close()

    app = create_app(
        tasks,
        corpus,
        journal_dir=out / "session_journals",
        cors_origins=("*",),
        analytics_params={
            "epsilon": epsilon,
            "tau": tau,
            "window": window,
            "scale_mode": scale_mode,
        },
    )
    click.echo(
        f"serving {len(tasks)} tasks, {len(corpus)} trajectories "
        f"on {host}:{port}"
    )
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
