"""Streaming trace-table ingestion and per-job aggregation.

Tables live under `<root>/<table_name>/part-*.csv[.gz]` as headerless CSV
(gzip detected by magic bytes, empty field = missing). Parsing is
single-pass and row-streamed; aggregation state is per distinct job, never
per row.

Resource means are accumulated as exact rationals so that aggregated
records are identical no matter how input rows are ordered or sharded.
"""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .kvconfig import parse_kv_file
from .trace_model import (
    MISSING,
    EventType,
    JobEvent,
    JobRecord,
    MachineEvent,
    MachineEventType,
    RUNTIME_EVENTS,
    TaskEvent,
    TaskUsage,
    TerminalEvent,
)

__all__ = [
    "Table",
    "TableStats",
    "TableReader",
    "BuildStats",
    "open_table",
    "filter_window",
    "build_job_table",
    "interarrival_times",
    "parse_colmap",
    "format_row",
    "parse_row",
    "raw_width",
    "write_job_table",
    "read_job_table",
    "JOB_TABLE_HEADER",
]


class Table(Enum):
    JOB_EVENTS = "job_events"
    TASK_EVENTS = "task_events"
    TASK_USAGE = "task_usage"
    MACHINE_EVENTS = "machine_events"


# Default zero-based column index of every parsed field, matching the
# clusterdata-2011-2 column orders. A colmap file with `table.field = index`
# lines overrides these for traces laid out differently.
DEFAULT_FIELD_INDEX = {
    Table.JOB_EVENTS: {
        "time": 0,
        "job_id": 2,
        "event_type": 3,
        "user": 4,
        "scheduling_class": 5,
        "job_name": 6,
    },
    Table.TASK_EVENTS: {
        "time": 0,
        "job_id": 2,
        "task_index": 3,
        "machine_id": 4,
        "event_type": 5,
        "priority": 8,
        "cpu_request": 9,
        "memory_request": 10,
        "disk_request": 11,
    },
    Table.TASK_USAGE: {
        "start_time": 0,
        "end_time": 1,
        "job_id": 2,
        "task_index": 3,
        "machine_id": 4,
        "cpu_rate": 5,
        "canonical_memory": 6,
        "assigned_memory": 7,
        "page_cache_total": 9,
        "disk_io_time": 11,
        "local_disk_space": 12,
        "cpi": 15,
        "mai": 16,
    },
    Table.MACHINE_EVENTS: {
        "time": 0,
        "machine_id": 1,
        "event_type": 2,
        "platform": 3,
        "cpu_capacity": 4,
        "memory_capacity": 5,
    },
}

# Full width of the raw rows in the default layout.
_DEFAULT_RAW_WIDTH = {
    Table.JOB_EVENTS: 8,
    Table.TASK_EVENTS: 13,
    Table.TASK_USAGE: 20,
    Table.MACHINE_EVENTS: 6,
}


def raw_width(table: Table, colmap: Optional[dict] = None) -> int:
    index = _field_index(table, colmap)
    return max(max(index.values()) + 1, _DEFAULT_RAW_WIDTH[table] if colmap is None else 0)


def parse_colmap(path) -> dict:
    """Read a `table.field = index` remap file into {Table: {field: index}}."""
    raw = parse_kv_file(path)
    remap: dict[Table, dict[str, int]] = {}
    for key, value in raw.items():
        table_name, dot, field_name = key.partition(".")
        if not dot:
            raise ValueError(f"colmap key {key!r} must look like 'table.field'")
        try:
            table = Table(table_name)
        except ValueError:
            raise ValueError(f"colmap references unknown table {table_name!r}") from None
        if field_name not in DEFAULT_FIELD_INDEX[table]:
            raise ValueError(f"colmap references unknown field {key!r}")
        try:
            idx = int(value)
        except ValueError:
            raise ValueError(f"colmap index for {key!r} must be an integer") from None
        if idx < 0:
            raise ValueError(f"colmap index for {key!r} must be >= 0")
        remap.setdefault(table, {})[field_name] = idx
    return remap


def _field_index(table: Table, colmap: Optional[dict]) -> dict:
    index = dict(DEFAULT_FIELD_INDEX[table])
    if colmap:
        index.update(colmap.get(table, {}))
    return index


# --- field parsers ----------------------------------------------------------


def _req_int(fields, idx, name) -> int:
    s = fields[idx]
    if s == "":
        raise ValueError(f"{name} is required")
    return int(s)


def _req_time(fields, idx, name) -> int:
    value = _req_int(fields, idx, name)
    if value < 0:
        raise ValueError(f"{name} must be >= 0")
    return value


def _opt_int(fields, idx) -> Optional[int]:
    s = fields[idx]
    return None if s == "" else int(s)


def _opt_float(fields, idx) -> Optional[float]:
    s = fields[idx]
    return None if s == "" else float(s)


def _event_type(fields, idx) -> EventType:
    code = _req_int(fields, idx, "event_type")
    try:
        return EventType(code)
    except ValueError:
        raise ValueError(f"unknown event code {code}") from None


def _parse_job_event(fields, ix) -> JobEvent:
    if len(fields) <= max(ix.values()):
        raise ValueError(f"row has {len(fields)} columns, need {max(ix.values()) + 1}")
    sched = fields[ix["scheduling_class"]]
    return JobEvent(
        time=_req_time(fields, ix["time"], "timestamp"),
        job_id=_req_int(fields, ix["job_id"], "job_id"),
        event_type=_event_type(fields, ix["event_type"]),
        scheduling_class=int(sched) if sched != "" else 0,
        user=fields[ix["user"]],
        job_name=fields[ix["job_name"]],
    )


def _parse_task_event(fields, ix) -> TaskEvent:
    if len(fields) <= max(ix.values()):
        raise ValueError(f"row has {len(fields)} columns, need {max(ix.values()) + 1}")
    prio = fields[ix["priority"]]
    return TaskEvent(
        time=_req_time(fields, ix["time"], "timestamp"),
        job_id=_req_int(fields, ix["job_id"], "job_id"),
        task_index=_req_int(fields, ix["task_index"], "task_index"),
        machine_id=_opt_int(fields, ix["machine_id"]),
        event_type=_event_type(fields, ix["event_type"]),
        priority=int(prio) if prio != "" else 0,
        cpu_request=_opt_float(fields, ix["cpu_request"]),
        memory_request=_opt_float(fields, ix["memory_request"]),
        disk_request=_opt_float(fields, ix["disk_request"]),
    )


def _parse_task_usage(fields, ix) -> TaskUsage:
    if len(fields) <= max(ix.values()):
        raise ValueError(f"row has {len(fields)} columns, need {max(ix.values()) + 1}")
    return TaskUsage(
        start_time=_req_time(fields, ix["start_time"], "start_time"),
        end_time=_req_time(fields, ix["end_time"], "end_time"),
        job_id=_req_int(fields, ix["job_id"], "job_id"),
        task_index=_req_int(fields, ix["task_index"], "task_index"),
        machine_id=_opt_int(fields, ix["machine_id"]),
        cpu_rate=_opt_float(fields, ix["cpu_rate"]),
        canonical_memory=_opt_float(fields, ix["canonical_memory"]),
        assigned_memory=_opt_float(fields, ix["assigned_memory"]),
        page_cache_total=_opt_float(fields, ix["page_cache_total"]),
        disk_io_time=_opt_float(fields, ix["disk_io_time"]),
        local_disk_space=_opt_float(fields, ix["local_disk_space"]),
        cpi=_opt_float(fields, ix["cpi"]),
        mai=_opt_float(fields, ix["mai"]),
    )


def _parse_machine_event(fields, ix) -> MachineEvent:
    if len(fields) <= max(ix.values()):
        raise ValueError(f"row has {len(fields)} columns, need {max(ix.values()) + 1}")
    code = _req_int(fields, ix["event_type"], "event_type")
    try:
        kind = MachineEventType(code)
    except ValueError:
        raise ValueError(f"unknown machine event code {code}") from None
    return MachineEvent(
        time=_req_time(fields, ix["time"], "timestamp"),
        machine_id=_req_int(fields, ix["machine_id"], "machine_id"),
        event_type=kind,
        cpu_capacity=_opt_float(fields, ix["cpu_capacity"]),
        memory_capacity=_opt_float(fields, ix["memory_capacity"]),
        platform=fields[ix["platform"]],
    )


_PARSERS = {
    Table.JOB_EVENTS: _parse_job_event,
    Table.TASK_EVENTS: _parse_task_event,
    Table.TASK_USAGE: _parse_task_usage,
    Table.MACHINE_EVENTS: _parse_machine_event,
}


def parse_row(table: Table, fields, colmap: Optional[dict] = None):
    """Parse one raw CSV row (list of strings) into its record type."""
    return _PARSERS[table](fields, _field_index(table, colmap))


def _fmt(value) -> str:
    if value is None or value is MISSING:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (EventType, MachineEventType)):
        return str(int(value))
    return str(value)


def format_row(table: Table, row, colmap: Optional[dict] = None) -> list:
    """Serialize a record back into its raw CSV row (inverse of parse_row)."""
    ix = _field_index(table, colmap)
    out = [""] * raw_width(table, colmap)
    for name, idx in ix.items():
        out[idx] = _fmt(getattr(row, name))
    return out


# --- streaming readers ------------------------------------------------------


@dataclass
class TableStats:
    rows_read: int = 0
    rows_skipped: int = 0
    rows_emitted: int = 0

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_skipped": self.rows_skipped,
            "rows_emitted": self.rows_emitted,
        }


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, "rt", encoding="utf-8", newline="")


class TableReader:
    """Single-consumer stream of parsed rows over a table's part files.

    Malformed rows (bad field, unknown event code, violated row invariant)
    are counted in `stats.rows_skipped` and never silently dropped;
    `rows_read == rows_emitted + rows_skipped` always holds.
    """

    def __init__(self, paths: list, table: Table, colmap: Optional[dict] = None):
        self.paths = paths
        self.table = table
        self._index = _field_index(table, colmap)
        self._parser = _PARSERS[table]
        self.stats = TableStats()

    def __iter__(self) -> Iterator:
        parser = self._parser
        index = self._index
        stats = self.stats
        for path in self.paths:
            try:
                handle = _open_maybe_gzip(path)
                with handle:
                    for fields in csv.reader(handle):
                        stats.rows_read += 1
                        try:
                            row = parser(fields, index)
                        except ValueError:
                            stats.rows_skipped += 1
                            continue
                        stats.rows_emitted += 1
                        yield row
            except UnicodeDecodeError as exc:
                raise OSError(f"{path}: undecodable bytes ({exc})") from exc
            except OSError as exc:
                if getattr(exc, "filename", None):
                    raise
                raise OSError(f"{path}: {exc}") from exc


def open_table(root, table: Table, colmap: Optional[dict] = None) -> TableReader:
    """Open `<root>/<table_name>/part-*` for streaming; a missing directory
    reads as an empty table. Part files go in lexicographic name order."""
    directory = Path(root) / table.value
    if directory.is_dir():
        paths = sorted(
            p for p in directory.iterdir()
            if p.name.startswith("part-") and p.is_file()
        )
    else:
        paths = []
    return TableReader(paths, table, colmap)


def filter_window(rows: Iterable, start: int, end: Optional[int] = None) -> Iterator:
    """Keep rows whose timestamp (start_time for usage rows) is in
    [start, end); end=None means unbounded."""
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    if end is not None and start > end:
        raise ValueError(f"window start {start} exceeds end {end}")

    def _generate():
        for row in rows:
            t = row.start_time if isinstance(row, TaskUsage) else row.time
            if t >= start and (end is None or t < end):
                yield row

    return _generate()


# --- job aggregation --------------------------------------------------------


@dataclass
class BuildStats:
    jobs_emitted: int = 0
    jobs_skipped_no_submit: int = 0
    censored_jobs: int = 0
    orphan_usage_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "jobs_emitted": self.jobs_emitted,
            "jobs_skipped_no_submit": self.jobs_skipped_no_submit,
            "censored_jobs": self.censored_jobs,
            "orphan_usage_rows": self.orphan_usage_rows,
        }


class _JobAgg:
    __slots__ = (
        "submit", "schedule", "terminal_time", "terminal_code",
        "cpu_sum", "cpu_weight", "mem_sum", "mem_weight", "tasks",
    )

    def __init__(self):
        self.submit = None
        self.schedule = None
        self.terminal_time = None
        self.terminal_code = None
        self.cpu_sum = Fraction(0)
        self.cpu_weight = 0
        self.mem_sum = Fraction(0)
        self.mem_weight = 0
        self.tasks = set()


_TERMINAL_CODES = {
    EventType.FINISH: TerminalEvent.FINISH,
    EventType.FAIL: TerminalEvent.FAIL,
    EventType.KILL: TerminalEvent.KILL,
    EventType.LOST: TerminalEvent.LOST,
}


def build_job_table(
    job_events: Iterable,
    task_usage: Iterable,
    stats: Optional[BuildStats] = None,
) -> list:
    """Aggregate event and usage streams into one JobRecord per job.

    Arrival is the earliest SUBMIT; runtime spans the earliest SCHEDULE to
    the earliest terminal event (execution time, not queueing); resource
    means weight each usage row by its duration. Jobs without a SUBMIT are
    skipped and counted. Output is sorted by job_id and does not depend on
    input row order.
    """
    if stats is None:
        stats = BuildStats()
    jobs: dict[int, _JobAgg] = {}

    for ev in job_events:
        agg = jobs.get(ev.job_id)
        if agg is None:
            agg = jobs[ev.job_id] = _JobAgg()
        kind = ev.event_type
        if kind == EventType.SUBMIT:
            if agg.submit is None or ev.time < agg.submit:
                agg.submit = ev.time
        elif kind == EventType.SCHEDULE:
            if agg.schedule is None or ev.time < agg.schedule:
                agg.schedule = ev.time
        elif kind in _TERMINAL_CODES:
            key = (ev.time, int(kind))
            if agg.terminal_time is None or key < (agg.terminal_time, agg.terminal_code):
                agg.terminal_time, agg.terminal_code = key

    for u in task_usage:
        agg = jobs.get(u.job_id)
        if agg is None:
            stats.orphan_usage_rows += 1
            continue
        weight = u.end_time - u.start_time
        if u.cpu_rate is not None:
            agg.cpu_sum += Fraction(u.cpu_rate) * weight
            agg.cpu_weight += weight
        if u.canonical_memory is not None:
            agg.mem_sum += Fraction(u.canonical_memory) * weight
            agg.mem_weight += weight
        agg.tasks.add(u.task_index)

    records = []
    for job_id in sorted(jobs):
        agg = jobs[job_id]
        if agg.submit is None:
            stats.jobs_skipped_no_submit += 1
            continue
        if agg.terminal_code is not None:
            terminal = _TERMINAL_CODES[EventType(agg.terminal_code)]
        else:
            terminal = TerminalEvent.CENSORED
            stats.censored_jobs += 1
        runtime = None
        if (
            terminal in RUNTIME_EVENTS
            and agg.schedule is not None
            and agg.terminal_time > agg.schedule
        ):
            runtime = agg.terminal_time - agg.schedule
        records.append(
            JobRecord(
                job_id=job_id,
                arrival_time=agg.submit,
                runtime=runtime,
                mean_cpu=float(agg.cpu_sum / agg.cpu_weight) if agg.cpu_weight else 0.0,
                mean_memory=float(agg.mem_sum / agg.mem_weight) if agg.mem_weight else 0.0,
                task_count=len(agg.tasks),
                terminal_event=terminal,
            )
        )
        stats.jobs_emitted += 1
    return records


def interarrival_times(records) -> np.ndarray:
    """Differences between consecutive sorted arrival times (microseconds)."""
    records = list(records)
    if len(records) < 2:
        raise ValueError(f"need at least 2 records, got {len(records)}")
    arrivals = np.sort(np.array([r.arrival_time for r in records], dtype=np.int64))
    return np.diff(arrivals)


# --- JobRecord table serialization ------------------------------------------

JOB_TABLE_HEADER = [
    "job_id",
    "arrival_time",
    "runtime",
    "mean_cpu",
    "mean_memory",
    "task_count",
    "terminal_event",
]


def write_job_table(records, path) -> None:
    path = Path(path)
    with open(path, "wt", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(JOB_TABLE_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.job_id,
                    r.arrival_time,
                    "" if r.runtime is None else r.runtime,
                    repr(r.mean_cpu),
                    repr(r.mean_memory),
                    r.task_count,
                    r.terminal_event.value,
                ]
            )


def read_job_table(path) -> list:
    path = Path(path)
    records = []
    with open(path, "rt", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != JOB_TABLE_HEADER:
            raise ValueError(f"{path}: unexpected job table header {header!r}")
        for fields in reader:
            records.append(
                JobRecord(
                    job_id=int(fields[0]),
                    arrival_time=int(fields[1]),
                    runtime=None if fields[2] == "" else int(fields[2]),
                    mean_cpu=float(fields[3]),
                    mean_memory=float(fields[4]),
                    task_count=int(fields[5]),
                    terminal_event=TerminalEvent(fields[6]),
                )
            )
    return records
