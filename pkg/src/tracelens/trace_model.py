"""Row-level and aggregated record types for cluster-trace analysis.

All types are immutable after construction and safe to share across
threads. Times are integer microseconds since trace start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

__all__ = [
    "Timestamp",
    "MISSING",
    "EventType",
    "MachineEventType",
    "TerminalEvent",
    "RUNTIME_EVENTS",
    "JobEvent",
    "TaskEvent",
    "TaskUsage",
    "MachineEvent",
    "JobRecord",
    "JobClass",
    "DistKind",
    "FittedDistribution",
]

# Microseconds since trace start, always >= 0.
Timestamp = int


class _MissingTimestamp:
    """Sentinel for an absent timestamp. Not a number: it never enters
    arithmetic and compares unequal to every valid timestamp."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False


MISSING = _MissingTimestamp()


class EventType(IntEnum):
    """Job/task lifecycle event codes (clusterdata-2011-2 numbering)."""

    SUBMIT = 0
    SCHEDULE = 1
    EVICT = 2
    FAIL = 3
    FINISH = 4
    KILL = 5
    LOST = 6
    UPDATE_PENDING = 7
    UPDATE_RUNNING = 8


class MachineEventType(IntEnum):
    ADD = 0
    REMOVE = 1
    UPDATE = 2


class TerminalEvent(Enum):
    """How a job left the trace window."""

    FINISH = "FINISH"
    FAIL = "FAIL"
    KILL = "KILL"
    LOST = "LOST"
    CENSORED = "CENSORED"


# Terminal outcomes that define a measurable runtime. A LOST job is terminal
# but its end time is unreliable, so it carries no runtime.
RUNTIME_EVENTS = frozenset(
    {TerminalEvent.FINISH, TerminalEvent.FAIL, TerminalEvent.KILL}
)


def _check_time(value, name: str) -> None:
    if value is MISSING:
        return
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")


def _check_fraction(value: Optional[float], name: str, upper: Optional[float] = None) -> None:
    if value is None:
        return
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    if upper is not None and value > upper:
        raise ValueError(f"{name} must be <= {upper}, got {value}")


@dataclass(frozen=True, slots=True)
class JobEvent:
    time: Timestamp
    job_id: int
    event_type: EventType
    scheduling_class: int
    user: str
    job_name: str

    def __post_init__(self):
        _check_time(self.time, "time")
        if not 0 <= self.scheduling_class <= 3:
            raise ValueError(f"scheduling_class must be in 0..3, got {self.scheduling_class}")


@dataclass(frozen=True, slots=True)
class TaskEvent:
    time: Timestamp
    job_id: int
    task_index: int
    machine_id: Optional[int]
    event_type: EventType
    priority: int
    cpu_request: Optional[float]
    memory_request: Optional[float]
    disk_request: Optional[float]

    def __post_init__(self):
        _check_time(self.time, "time")
        if self.task_index < 0:
            raise ValueError(f"task_index must be >= 0, got {self.task_index}")
        if self.priority < 0:
            raise ValueError(f"priority must be >= 0, got {self.priority}")
        _check_fraction(self.cpu_request, "cpu_request", upper=1.0)
        _check_fraction(self.memory_request, "memory_request", upper=1.0)
        _check_fraction(self.disk_request, "disk_request", upper=1.0)


@dataclass(frozen=True, slots=True)
class TaskUsage:
    start_time: Timestamp
    end_time: Timestamp
    job_id: int
    task_index: int
    machine_id: Optional[int]
    cpu_rate: Optional[float]
    canonical_memory: Optional[float]
    assigned_memory: Optional[float]
    page_cache_total: Optional[float]
    disk_io_time: Optional[float]
    local_disk_space: Optional[float]
    # Present in the raw table, parsed for completeness; nothing consumes them.
    cpi: Optional[float] = None
    mai: Optional[float] = None

    def __post_init__(self):
        _check_time(self.start_time, "start_time")
        _check_time(self.end_time, "end_time")
        if not self.start_time < self.end_time:
            raise ValueError(
                f"start_time must precede end_time, got [{self.start_time}, {self.end_time}]"
            )
        _check_fraction(self.cpu_rate, "cpu_rate", upper=1.0)
        _check_fraction(self.canonical_memory, "canonical_memory", upper=1.0)
        for name in ("assigned_memory", "page_cache_total", "disk_io_time", "local_disk_space"):
            _check_fraction(getattr(self, name), name)


@dataclass(frozen=True, slots=True)
class MachineEvent:
    time: Timestamp
    machine_id: int
    event_type: MachineEventType
    cpu_capacity: Optional[float]
    memory_capacity: Optional[float]
    platform: str

    def __post_init__(self):
        _check_time(self.time, "time")
        _check_fraction(self.cpu_capacity, "cpu_capacity")
        _check_fraction(self.memory_capacity, "memory_capacity")


@dataclass(frozen=True, slots=True)
class JobRecord:
    """Per-job aggregate: arrival, runtime, and resource-usage features."""

    job_id: int
    arrival_time: Timestamp
    runtime: Optional[int]  # microseconds, absent for censored/lost jobs
    mean_cpu: float
    mean_memory: float
    task_count: int
    terminal_event: TerminalEvent

    def __post_init__(self):
        _check_time(self.arrival_time, "arrival_time")
        if self.mean_cpu < 0 or self.mean_memory < 0:
            raise ValueError("mean_cpu and mean_memory must be >= 0")
        if self.task_count < 0:
            raise ValueError("task_count must be >= 0")
        if self.runtime is not None:
            if self.runtime <= 0:
                raise ValueError(f"runtime must be > 0 when present, got {self.runtime}")
            if self.terminal_event not in RUNTIME_EVENTS:
                raise ValueError(
                    f"runtime present but terminal event is {self.terminal_event.value}"
                )


class JobClass(Enum):
    """Tri-modal resource-usage classes, ordered by center magnitude."""

    MINOR = 0
    MEDIOCRE = 1
    MAJOR = 2

    def __lt__(self, other):
        if isinstance(other, JobClass):
            return self.value < other.value
        return NotImplemented


class DistKind(Enum):
    WEIBULL = "weibull"
    ZIPF = "zipf"
    PARETO_TAIL = "pareto_tail"


_PARAM_NAMES = {
    DistKind.WEIBULL: ("shape", "scale"),
    DistKind.ZIPF: ("exponent", "support_size"),
    DistKind.PARETO_TAIL: ("alpha", "xmin"),
}

DEGENERATE_FLAG = "degenerate_constant_values"


@dataclass(frozen=True)
class FittedDistribution:
    """A fitted parametric model plus its goodness-of-fit.

    Weibull and Pareto-tail fits carry a KS statistic; Zipf fits carry the
    R-squared of the log-log rank regression instead.
    """

    kind: DistKind
    params: dict
    sample_count: int
    ks_statistic: Optional[float] = None
    r_squared: Optional[float] = None
    flags: tuple = ()

    def __post_init__(self):
        expected = _PARAM_NAMES[self.kind]
        missing = [p for p in expected if p not in self.params]
        if missing:
            raise ValueError(f"{self.kind.value} fit missing params {missing}")
        degenerate = DEGENERATE_FLAG in self.flags
        for name, value in self.params.items():
            if value <= 0 and not degenerate:
                raise ValueError(f"parameter {name} must be > 0, got {value}")
        if self.ks_statistic is not None and not 0.0 <= self.ks_statistic <= 1.0:
            raise ValueError(f"ks_statistic must be in [0, 1], got {self.ks_statistic}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def to_dict(self) -> dict:
        return {
            "family": self.kind.value,
            "params": dict(self.params),
            "sample_count": self.sample_count,
            "ks": self.ks_statistic,
            "r_squared": self.r_squared,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedDistribution":
        return cls(
            kind=DistKind(data["family"]),
            params=dict(data["params"]),
            sample_count=data["sample_count"],
            ks_statistic=data.get("ks"),
            r_squared=data.get("r_squared"),
            flags=tuple(data.get("flags", ())),
        )
