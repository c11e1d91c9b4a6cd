"""Synthetic trace generation from parametric workload models.

Jobs are drawn as Weibull interarrivals, a three-class mix, per-class
resource models, and Pareto runtimes scaled per class, then emitted in the
exact on-disk layout the ingest module reads, so generated traces can be
round-tripped for validation.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import ingest
from .distfit import weibull_quantile
from .errors import SpecError
from .ingest import Table
from .kvconfig import parse_kv_file
from .trace_model import EventType, JobClass, JobEvent, JobRecord, TaskUsage, TerminalEvent

__all__ = [
    "ClassSpec",
    "SynthesisSpec",
    "SynthJob",
    "GenResult",
    "Manifest",
    "default_spec",
    "parse_spec_file",
    "gen_interarrivals",
    "gen_job_stream",
    "emit_trace",
]

# 29 days in seconds: runtimes are capped here by default so a small tail
# exponent cannot produce effectively-infinite jobs.
DEFAULT_RUNTIME_CAP = 29 * 24 * 3600.0

_CLASS_NAMES = ("minor", "mediocre", "major")


@dataclass(frozen=True)
class ClassSpec:
    """Per-class mix weight, resource model, and runtime scale multiplier.

    model "normal": (cpu, memory) centered draws with one spread.
    model "zipf": the i-th job of the class gets magnitude scale * i^-theta.
    """

    mix: float
    model: str = "normal"
    cpu: float = 0.1
    memory: float = 0.1
    spread: float = 0.02
    runtime_scale: float = 1.0
    theta: float = 1.0
    cpu_scale: float = 0.5
    memory_scale: float = 0.5


@dataclass(frozen=True)
class SynthesisSpec:
    job_count: int
    seed: int
    interarrival_shape: float
    interarrival_scale: float
    classes: tuple  # (minor, mediocre, major) ClassSpec
    runtime_alpha: float
    runtime_xmin: float
    runtime_cap: float = DEFAULT_RUNTIME_CAP
    tasks_kind: str = "constant"
    tasks_value: int = 1
    tasks_p: float = 0.5
    usage_window_seconds: float = 0.0
    shards: int = 1

    def validate(self) -> None:
        if self.job_count < 0:
            raise SpecError("job_count", f"must be >= 0, got {self.job_count}")
        if self.interarrival_shape <= 0:
            raise SpecError("interarrival.shape", "must be > 0")
        if self.interarrival_scale <= 0:
            raise SpecError("interarrival.scale", "must be > 0")
        if len(self.classes) != 3:
            raise SpecError("class_mix", "exactly three classes are required")
        total = 0.0
        for name, cspec in zip(_CLASS_NAMES, self.classes):
            if cspec.mix < 0:
                raise SpecError(f"class_mix.{name}", "must be >= 0")
            total += cspec.mix
            if cspec.model not in ("normal", "zipf"):
                raise SpecError(f"class.{name}.model", f"unknown model {cspec.model!r}")
            if cspec.model == "normal":
                if not 0.0 <= cspec.cpu <= 1.0 or not 0.0 <= cspec.memory <= 1.0:
                    raise SpecError(f"class.{name}.cpu", "centers must lie in [0, 1]")
                if cspec.spread < 0:
                    raise SpecError(f"class.{name}.spread", "must be >= 0")
            else:
                if cspec.theta <= 0:
                    raise SpecError(f"class.{name}.theta", "must be > 0")
                if cspec.cpu_scale <= 0 or cspec.memory_scale <= 0:
                    raise SpecError(f"class.{name}.cpu_scale", "must be > 0")
            if cspec.runtime_scale <= 0:
                raise SpecError(f"class.{name}.runtime_scale", "must be > 0")
        if abs(total - 1.0) > 1e-9:
            raise SpecError("class_mix", f"weights must sum to 1, got {total}")
        if self.runtime_alpha <= 0:
            raise SpecError("runtime.alpha", "must be > 0")
        if self.runtime_xmin <= 0:
            raise SpecError("runtime.xmin", "must be > 0")
        if self.runtime_cap <= 0:
            raise SpecError("runtime.cap", "must be > 0")
        if self.tasks_kind not in ("constant", "geometric"):
            raise SpecError("tasks_per_job.kind", f"unknown kind {self.tasks_kind!r}")
        if self.tasks_kind == "constant" and self.tasks_value < 1:
            raise SpecError("tasks_per_job.value", "must be >= 1")
        if self.tasks_kind == "geometric" and not 0.0 < self.tasks_p <= 1.0:
            raise SpecError("tasks_per_job.p", "must lie in (0, 1]")
        if self.usage_window_seconds < 0:
            raise SpecError("usage.window_seconds", "must be >= 0")
        if self.shards < 1:
            raise SpecError("shards", "must be >= 1")


def default_spec(job_count: int = 1000, seed: int = 0) -> SynthesisSpec:
    return SynthesisSpec(
        job_count=job_count,
        seed=seed,
        interarrival_shape=1.5,
        interarrival_scale=2.0,
        classes=(
            ClassSpec(mix=0.75, cpu=0.05, memory=0.05, spread=0.02, runtime_scale=1.0),
            ClassSpec(mix=0.15, cpu=0.40, memory=0.40, spread=0.02, runtime_scale=2.0),
            ClassSpec(mix=0.10, cpu=0.85, memory=0.85, spread=0.02, runtime_scale=5.0),
        ),
        runtime_alpha=1.5,
        runtime_xmin=10.0,
    )


_INT_KEYS = {"job_count", "seed", "tasks_per_job.value", "shards"}
_STR_KEYS = {"tasks_per_job.kind"}
_CLASS_FLOAT_KEYS = {
    "cpu", "memory", "spread", "runtime_scale", "theta", "cpu_scale", "memory_scale",
}
_TOP_FLOAT_KEYS = {
    "interarrival.shape",
    "interarrival.scale",
    "runtime.alpha",
    "runtime.xmin",
    "runtime.cap",
    "tasks_per_job.p",
    "usage.window_seconds",
}


def parse_spec_file(path) -> SynthesisSpec:
    """Read a flat key-value spec file (see README) into a validated
    SynthesisSpec; every key is optional and defaults sensibly."""
    raw = parse_kv_file(path)
    base = default_spec()
    top: dict = {}
    class_kwargs = {name: {} for name in _CLASS_NAMES}
    mixes = {}

    for key, value in raw.items():
        try:
            if key in _INT_KEYS:
                top[key] = int(value)
            elif key in _STR_KEYS:
                top[key] = value
            elif key in _TOP_FLOAT_KEYS:
                top[key] = float(value)
            elif key.startswith("class_mix."):
                name = key.split(".", 1)[1]
                if name not in _CLASS_NAMES:
                    raise SpecError(key, f"unknown class {name!r}")
                mixes[name] = float(value)
            elif key.startswith("class."):
                parts = key.split(".")
                if len(parts) != 3 or parts[1] not in _CLASS_NAMES:
                    raise SpecError(key, "expected class.<minor|mediocre|major>.<field>")
                name, attr = parts[1], parts[2]
                if attr == "model":
                    class_kwargs[name][attr] = value
                elif attr in _CLASS_FLOAT_KEYS:
                    class_kwargs[name][attr] = float(value)
                else:
                    raise SpecError(key, f"unknown class field {attr!r}")
            else:
                raise SpecError(key, "unknown key")
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(key, f"bad value {value!r}") from None

    classes = []
    for name, cspec in zip(_CLASS_NAMES, base.classes):
        kwargs = dict(class_kwargs[name])
        if name in mixes:
            kwargs["mix"] = mixes[name]
        classes.append(ClassSpec(**{**cspec.__dict__, **kwargs}))

    spec = SynthesisSpec(
        job_count=top.get("job_count", base.job_count),
        seed=top.get("seed", base.seed),
        interarrival_shape=top.get("interarrival.shape", base.interarrival_shape),
        interarrival_scale=top.get("interarrival.scale", base.interarrival_scale),
        classes=tuple(classes),
        runtime_alpha=top.get("runtime.alpha", base.runtime_alpha),
        runtime_xmin=top.get("runtime.xmin", base.runtime_xmin),
        runtime_cap=top.get("runtime.cap", base.runtime_cap),
        tasks_kind=top.get("tasks_per_job.kind", base.tasks_kind),
        tasks_value=top.get("tasks_per_job.value", base.tasks_value),
        tasks_p=top.get("tasks_per_job.p", base.tasks_p),
        usage_window_seconds=top.get("usage.window_seconds", base.usage_window_seconds),
        shards=top.get("shards", base.shards),
    )
    spec.validate()
    return spec


def gen_interarrivals(n: int, shape: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    """n Weibull interarrival durations in seconds via inverse-CDF sampling."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return weibull_quantile(rng.random(n), shape, scale)


@dataclass(frozen=True)
class SynthJob:
    record: JobRecord
    job_class: JobClass


@dataclass(frozen=True)
class GenResult:
    jobs: tuple
    clamp_count: int  # resource draws clipped into [0, 1]


def gen_job_stream(spec: SynthesisSpec) -> GenResult:
    """Draw the full synthetic job stream for a spec, deterministically in
    the seed. Later classes scale runtimes up, so major jobs run longest in
    expectation."""
    spec.validate()
    n = spec.job_count
    rng = np.random.default_rng(spec.seed)
    if n == 0:
        return GenResult(jobs=(), clamp_count=0)

    inter = gen_interarrivals(n, spec.interarrival_shape, spec.interarrival_scale, rng)
    arrivals = np.rint(np.cumsum(inter) * 1e6).astype(np.int64)

    mix = np.array([c.mix for c in spec.classes], dtype=np.float64)
    cum = np.cumsum(mix)
    cum[-1] = 1.0
    classes = np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)

    cpu = np.empty(n)
    memory = np.empty(n)
    for ci, cspec in enumerate(spec.classes):
        mask = classes == ci
        count = int(mask.sum())
        if count == 0:
            continue
        if cspec.model == "normal":
            cpu[mask] = cspec.cpu + cspec.spread * rng.standard_normal(count)
            memory[mask] = cspec.memory + cspec.spread * rng.standard_normal(count)
        else:
            ranks = np.arange(1, count + 1, dtype=np.float64)
            cpu[mask] = cspec.cpu_scale * ranks ** -cspec.theta
            memory[mask] = cspec.memory_scale * ranks ** -cspec.theta
    clamp_count = int(np.count_nonzero((cpu < 0) | (cpu > 1)))
    clamp_count += int(np.count_nonzero((memory < 0) | (memory > 1)))
    cpu = np.clip(cpu, 0.0, 1.0)
    memory = np.clip(memory, 0.0, 1.0)

    u = rng.random(n)
    scale_per_job = np.array([c.runtime_scale for c in spec.classes])[classes]
    seconds = spec.runtime_xmin * scale_per_job * (1.0 - u) ** (-1.0 / spec.runtime_alpha)
    seconds = np.minimum(seconds, spec.runtime_cap)
    runtimes = np.maximum(np.rint(seconds * 1e6).astype(np.int64), 1)

    if spec.tasks_kind == "constant":
        tasks = np.full(n, spec.tasks_value, dtype=np.int64)
    else:
        tasks = rng.geometric(spec.tasks_p, size=n).astype(np.int64)

    jobs = tuple(
        SynthJob(
            record=JobRecord(
                job_id=i + 1,
                arrival_time=int(arrivals[i]),
                runtime=int(runtimes[i]),
                mean_cpu=float(cpu[i]),
                mean_memory=float(memory[i]),
                task_count=int(tasks[i]),
                terminal_event=TerminalEvent.FINISH,
            ),
            job_class=JobClass(int(classes[i])),
        )
        for i in range(n)
    )
    return GenResult(jobs=jobs, clamp_count=clamp_count)


@dataclass(frozen=True)
class Manifest:
    files: tuple  # (relative path, table name, row count)
    jobs: int
    clamp_count: int
    path: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "files": [
                {"path": p, "table": t, "rows": r} for (p, t, r) in self.files
            ],
            "jobs": self.jobs,
            "clamped_resources": self.clamp_count,
        }


class _ShardWriter:
    def __init__(self, directory: Path, shards: int, compresslevel: int):
        directory.mkdir(parents=True, exist_ok=True)
        self.names = [
            directory / f"part-{i:05d}-of-{shards:05d}.csv.gz" for i in range(shards)
        ]
        self.rows = [0] * shards
        self._handles = []
        self._writers = []
        for name in self.names:
            raw = open(name, "wb")
            # fixed mtime and no stored filename keep output byte-deterministic
            gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, compresslevel=compresslevel, mtime=0)
            text = io.TextIOWrapper(gz, encoding="utf-8", newline="")
            self._handles.append((raw, gz, text))
            self._writers.append(csv.writer(text, lineterminator="\n"))

    def write(self, shard: int, fields) -> None:
        self._writers[shard].writerow(fields)
        self.rows[shard] += 1

    def close(self) -> None:
        for raw, gz, text in self._handles:
            text.flush()
            text.detach()
            gz.close()
            raw.close()


def emit_trace(
    jobs,
    spec: SynthesisSpec,
    out_dir,
    compresslevel: int = 6,
    clamp_count: Optional[int] = None,
) -> Manifest:
    """Write job_events and task_usage part files for the synthetic jobs.

    Per job: SUBMIT at arrival, SCHEDULE one microsecond later, FINISH a
    runtime after the SCHEDULE (so re-ingesting recovers runtime exactly),
    and per-task usage rows spanning [SCHEDULE, FINISH) carrying the job's
    mean rates. Jobs land in shard job_id mod shards.
    """
    if isinstance(jobs, GenResult):
        if clamp_count is None:
            clamp_count = jobs.clamp_count
        jobs = jobs.jobs
    if clamp_count is None:
        clamp_count = 0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events = _ShardWriter(out / Table.JOB_EVENTS.value, spec.shards, compresslevel)
    usage = _ShardWriter(out / Table.TASK_USAGE.value, spec.shards, compresslevel)
    window_us = int(round(spec.usage_window_seconds * 1e6))
    try:
        for job in jobs:
            r = job.record
            shard = r.job_id % spec.shards
            arrival = r.arrival_time
            sched = arrival + 1
            finish = sched + r.runtime
            for kind, t in (
                (EventType.SUBMIT, arrival),
                (EventType.SCHEDULE, sched),
                (EventType.FINISH, finish),
            ):
                row = JobEvent(
                    time=t,
                    job_id=r.job_id,
                    event_type=kind,
                    scheduling_class=0,
                    user="",
                    job_name="",
                )
                events.write(shard, ingest.format_row(Table.JOB_EVENTS, row))
            step = window_us if window_us > 0 else r.runtime
            for task_index in range(r.task_count):
                start = sched
                while start < finish:
                    end = min(start + step, finish)
                    row = TaskUsage(
                        start_time=start,
                        end_time=end,
                        job_id=r.job_id,
                        task_index=task_index,
                        machine_id=1,
                        cpu_rate=r.mean_cpu,
                        canonical_memory=r.mean_memory,
                        assigned_memory=r.mean_memory,
                        page_cache_total=0.0,
                        disk_io_time=0.0,
                        local_disk_space=0.0,
                    )
                    usage.write(shard, ingest.format_row(Table.TASK_USAGE, row))
                    start = end
    finally:
        events.close()
        usage.close()

    files = []
    for writer, table in ((events, Table.JOB_EVENTS), (usage, Table.TASK_USAGE)):
        for name, rows in zip(writer.names, writer.rows):
            files.append((str(name.relative_to(out)), table.value, rows))
    manifest_path = out / "manifest.json"
    manifest = Manifest(
        files=tuple(files),
        jobs=len(jobs),
        clamp_count=clamp_count,
        path=str(manifest_path),
    )
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest
