"""Core vocabulary of the team model.

Work items carry a priority, a service demand, and a skill requirement;
engineers carry a skill and an affinity for project or operational work.
Queues order items by priority first, then arrival time, then id, and
record every enter/leave episode so time-in-queue can be audited against
the event log.

Time is measured in days throughout; service demands are expressed in
work-hours and converted by the engine via its hours-per-day setting.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .errors import ConfigurationError, StructuralError

SKILL_LEVEL_MIN = 1
SKILL_LEVEL_MAX = 3


class Priority(IntEnum):
    """Urgency classes. Comparison follows urgency: P1 > P2 > P3."""

    P3 = 1
    P2 = 2
    P1 = 3

    @classmethod
    def from_label(cls, label: str) -> "Priority":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ConfigurationError(f"unknown priority label: {label!r}") from None


class WorkType(Enum):
    PROJECT_TASK = "project_task"
    SERVICE_REQUEST = "service_request"
    INCIDENT = "incident"
    REWORK_INCIDENT = "rework_incident"

    @property
    def is_operational(self) -> bool:
        # everything except planned project work competes on the ops side
        return self is not WorkType.PROJECT_TASK

    @classmethod
    def from_label(cls, label: str) -> "WorkType":
        key = label.strip().lower()
        for wt in cls:
            if wt.value == key:
                return wt
        raise ConfigurationError(f"unknown work type label: {label!r}")


class Affinity(Enum):
    """Which side of the workload an engineer picks up by default."""

    PROJECT_PRIMARY = "project"
    OPERATIONAL_PRIMARY = "operational"

    @classmethod
    def from_label(cls, label: str) -> "Affinity":
        key = label.strip().lower()
        for af in cls:
            if af.value == key:
                return af
        raise ConfigurationError(f"unknown affinity label: {label!r}")


@dataclass(frozen=True)
class SkillSpec:
    """A skill type plus a proficiency level on a small ordinal scale."""

    skill_type: str
    skill_level: int

    def __post_init__(self) -> None:
        if not self.skill_type:
            raise ConfigurationError("skill_type must be a non-empty string")
        if not isinstance(self.skill_level, int) or isinstance(self.skill_level, bool):
            raise ConfigurationError(f"skill_level must be an integer, got {self.skill_level!r}")
        if not SKILL_LEVEL_MIN <= self.skill_level <= SKILL_LEVEL_MAX:
            raise ConfigurationError(
                f"skill_level {self.skill_level} outside [{SKILL_LEVEL_MIN}, {SKILL_LEVEL_MAX}]"
            )


@dataclass(slots=True)
class WorkItem:
    """One unit of demand flowing through the system.

    ``service_demand_hours`` is the remaining work content; it shrinks as
    service is delivered and grows by the switch penalty when service is
    interrupted.  ``queue_episodes`` collects closed (enter, leave) pairs.
    """

    id: int
    work_type: WorkType
    priority: Priority
    required: SkillSpec
    service_demand_hours: float
    arrival_time: float
    remaining_service_hours: float = field(default=-1.0)
    completion_time: float | None = None
    stop_count: int = 0
    queue_episodes: list[tuple[float, float]] = field(default_factory=list)
    _queue_entered: float | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.service_demand_hours <= 0.0:
            raise ConfigurationError(
                f"item {self.id}: service demand must be positive, got {self.service_demand_hours}"
            )
        if self.arrival_time < 0.0:
            raise ConfigurationError(f"item {self.id}: negative arrival time")
        if self.remaining_service_hours < 0.0:
            self.remaining_service_hours = self.service_demand_hours

    # -- queue episode bookkeeping ------------------------------------------------
    def enter_queue(self, now: float) -> None:
        if self._queue_entered is not None:
            raise StructuralError(f"item {self.id} entered a queue while already queued")
        self._queue_entered = now

    def leave_queue(self, now: float) -> None:
        entered = self._queue_entered
        if entered is None:
            raise StructuralError(f"item {self.id} left a queue it never entered")
        if now < entered:
            raise StructuralError(f"item {self.id}: queue episode ends before it starts")
        self.queue_episodes.append((entered, now))
        self._queue_entered = None

    @property
    def total_queue_days(self) -> float:
        return sum(leave - enter for enter, leave in self.queue_episodes)

    @property
    def in_queue(self) -> bool:
        return self._queue_entered is not None


@dataclass
class Engineer:
    """A server with a skill, an affinity, and a relative working speed."""

    id: int
    skill: SkillSpec
    affinity: Affinity
    capacity_factor: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.capacity_factor <= 1.0:
            raise ConfigurationError(
                f"engineer {self.id}: capacity_factor must lie in (0, 1], got {self.capacity_factor}"
            )

    def can_serve(self, item: WorkItem) -> bool:
        # level mismatches are allowed (they trigger stops or extra errors);
        # a wrong skill type is a hard mismatch
        return self.skill.skill_type == item.required.skill_type


def queue_key(item: WorkItem) -> tuple[int, float, int]:
    """Service discipline: highest priority first, then FIFO, then id."""
    return (-int(item.priority), item.arrival_time, item.id)


class WorkQueue:
    """Priority-then-FIFO queue with lazy deletion.

    Duplicate pushes of the same item id raise ``StructuralError``; the heap
    never compares items directly because the key tuple ends with the unique
    id.  Per-priority live counts are maintained eagerly so daily sampling
    stays cheap.
    """

    def __init__(self, name: str = "queue") -> None:
        self.name = name
        self._heap: list[tuple[tuple[int, float, int], WorkItem]] = []
        self._index: dict[int, WorkItem] = {}
        self._removed: set[int] = set()
        self._counts: dict[Priority, int] = {p: 0 for p in Priority}

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, item_id: int) -> bool:
        return item_id in self._index

    def count(self, priority: Priority) -> int:
        return self._counts[priority]

    def push(self, item: WorkItem, now: float) -> None:
        if item.id in self._index:
            raise StructuralError(f"{self.name}: duplicate push of item {item.id}")
        self._index[item.id] = item
        self._counts[item.priority] += 1
        heapq.heappush(self._heap, (queue_key(item), item))
        item.enter_queue(now)

    def _discard_tombstones(self) -> None:
        heap = self._heap
        while heap and heap[0][1].id in self._removed:
            self._removed.discard(heap[0][1].id)
            heapq.heappop(heap)

    def peek(self) -> WorkItem | None:
        self._discard_tombstones()
        return self._heap[0][1] if self._heap else None

    def pop_best(self, now: float) -> WorkItem | None:
        self._discard_tombstones()
        if not self._heap:
            return None
        _, item = heapq.heappop(self._heap)
        del self._index[item.id]
        self._counts[item.priority] -= 1
        item.leave_queue(now)
        return item

    def remove(self, item_id: int, now: float) -> WorkItem:
        """Take a specific item out of the middle of the queue."""
        item = self._index.pop(item_id, None)
        if item is None:
            raise StructuralError(f"{self.name}: remove of absent item {item_id}")
        self._removed.add(item_id)
        self._counts[item.priority] -= 1
        item.leave_queue(now)
        return item

    def items(self) -> list[WorkItem]:
        """Live items in no particular order (for audits, not dispatch)."""
        return list(self._index.values())
