"""Event-driven model of a skill-based team working a prioritized backlog.

Work arrives from Poisson generators, lands in a consolidating team queue,
and is routed to per-engineer queues (shortest queue first, affinity as the
tie-break).  Service is preempt-resume: items can be stopped by a skill
mismatch, by a strictly higher-priority arrival, or by a management
interruption, and carry their remaining work content with them.  Completed
items can emit follow-on incidents, which re-enter the team queue and
compete with fresh demand.

Routing is work-conserving: an engineer whose own queue is empty pulls the
best compatible waiting item from a colleague's queue rather than idling.
With identical exponential servers this keeps the number-in-system process
of a single-class scenario exactly that of the classic multi-server queue,
which is what the validation harness leans on.

Conventions: the clock is in days, service demands in work-hours.  An
engineer delivers ``hours_per_day * capacity_factor`` work-hours per
elapsed day.  Event log records are ``(time, kind, item_id, engineer_id,
detail)`` with engineer_id -1 when no engineer is involved.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .domain import (
    Affinity,
    Engineer,
    Priority,
    SkillSpec,
    WorkItem,
    WorkType,
    queue_key,
    WorkQueue,
)
from .errors import ConfigurationError, StructuralError

EventRecord = tuple[float, str, int, int, str]

# calendar event kinds
_EV_ARRIVAL = 0
_EV_SERVICE_END = 1
_EV_INTERRUPT_TICK = 2

# service segment outcomes decided at start-of-service
_SEG_COMPLETE = 0
_SEG_SKILL_STOP = 1
_SEG_INTERRUPT = 2

_MIX_TOL = 1e-9


def format_event(rec: EventRecord) -> str:
    """Canonical one-line rendering: time,event_kind,item_id,engineer_id,detail."""
    return f"{rec[0]:.6f},{rec[1]},{rec[2]},{rec[3]},{rec[4]}"


def sample_interarrival(rate: float, rng) -> float:
    """Strictly positive exponential variate with the given daily rate."""
    if rate <= 0.0 or not math.isfinite(rate):
        raise ConfigurationError(f"interarrival rate must be positive and finite, got {rate}")
    u = rng.random()
    while u <= 0.0:  # guard against log(0)
        u = rng.random()
    return -math.log(u) / rate


def sample_exponential_hours(mean_hours: float, rng) -> float:
    if mean_hours <= 0.0 or not math.isfinite(mean_hours):
        raise ConfigurationError(f"service mean must be positive and finite, got {mean_hours}")
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return -math.log(u) * mean_hours


def _check_mix(mix, what: str) -> None:
    if len(mix) != 3:
        raise ConfigurationError(f"{what}: expected three probabilities, got {len(mix)}")
    if any(p < 0.0 for p in mix):
        raise ConfigurationError(f"{what}: negative probability")
    if abs(sum(mix) - 1.0) > _MIX_TOL:
        raise ConfigurationError(f"{what}: probabilities sum to {sum(mix)!r}, not 1")


def _priority_index(priority: Priority) -> int:
    # mixes and service means are stored in (P1, P2, P3) order
    return int(Priority.P1) - int(priority)


def _sample_priority(mix, rng) -> Priority:
    u = rng.random()
    if u < mix[0]:
        return Priority.P1
    if u < mix[0] + mix[1]:
        return Priority.P2
    return Priority.P3


@dataclass
class GeneratorConfig:
    """One Poisson source of work of a single type.

    ``priority_mix`` and ``service_mean_hours`` are aligned (P1, P2, P3)
    triples; ``skill_mix`` assigns a required skill to each item.
    """

    work_type: WorkType
    daily_rate: float
    priority_mix: tuple[float, float, float]
    service_mean_hours: tuple[float, float, float]
    skill_mix: tuple[tuple[SkillSpec, float], ...]

    def validate(self) -> None:
        name = f"generator[{self.work_type.value}]"
        if self.daily_rate < 0.0 or not math.isfinite(self.daily_rate):
            raise ConfigurationError(f"{name}: daily_rate must be finite and >= 0")
        _check_mix(self.priority_mix, f"{name}.priority_mix")
        if len(self.service_mean_hours) != 3:
            raise ConfigurationError(f"{name}: need three service means (P1, P2, P3)")
        for pr, mean in zip((Priority.P1, Priority.P2, Priority.P3), self.service_mean_hours):
            if self.priority_mix[_priority_index(pr)] > 0.0 and mean <= 0.0:
                raise ConfigurationError(f"{name}: service mean for {pr.name} must be positive")
        if not self.skill_mix:
            raise ConfigurationError(f"{name}: empty skill_mix")
        total = sum(p for _, p in self.skill_mix)
        if any(p < 0.0 for _, p in self.skill_mix) or abs(total - 1.0) > _MIX_TOL:
            raise ConfigurationError(f"{name}: skill_mix probabilities must be >= 0 and sum to 1")

    def mean_for(self, priority: Priority) -> float:
        return self.service_mean_hours[_priority_index(priority)]

    def sample_item(self, now: float, rng, item_id: int) -> WorkItem:
        # fixed draw order: priority, skill, service demand
        priority = _sample_priority(self.priority_mix, rng)
        u = rng.random()
        acc = 0.0
        required = self.skill_mix[-1][0]
        for spec, p in self.skill_mix:
            acc += p
            if u < acc:
                required = spec
                break
        service = sample_exponential_hours(self.mean_for(priority), rng)
        return WorkItem(
            id=item_id,
            work_type=self.work_type,
            priority=priority,
            required=required,
            service_demand_hours=service,
            arrival_time=now,
        )


@dataclass(frozen=True)
class DesModifiers:
    """Knobs a coupled model can turn between replications.

    The identity element leaves the engine exactly as an uncoupled run:
    no interrupt events are scheduled at rate 0, and no extra random draws
    are consumed, so runs are byte-identical to baseline.
    """

    rework_multiplier: float = 1.0
    capacity_factor: float = 1.0
    interrupt_rate: float = 0.0  # management interruptions per engineer per busy day

    @classmethod
    def identity(cls) -> "DesModifiers":
        return cls(1.0, 1.0, 0.0)

    def validate(self) -> None:
        if self.rework_multiplier < 0.0 or not math.isfinite(self.rework_multiplier):
            raise ConfigurationError("rework_multiplier must be finite and >= 0")
        if not 0.0 < self.capacity_factor <= 1.0:
            raise ConfigurationError("capacity_factor must lie in (0, 1]")
        if self.interrupt_rate < 0.0 or not math.isfinite(self.interrupt_rate):
            raise ConfigurationError("interrupt_rate must be finite and >= 0")


@dataclass
class DesConfig:
    """Static team and demand description plus behavioral knobs."""

    generators: list[GeneratorConfig]
    engineers: list[Engineer]
    base_error_prob: float = 0.05
    skill_gap_error_boost: float = 2.0
    p_stop_skill: float = 0.4
    switch_penalty_hours: float = 0.5
    rework_priority_mix: tuple[float, float, float] = (0.3, 0.7, 0.0)
    rework_service_mean_hours: float = 4.0
    interrupt_base_rate: float = 0.0  # scales fed-back pressure into interruptions/day
    hours_per_day: float = 8.0
    skill_types: tuple[str, ...] | None = None

    def validate(self) -> None:
        if not self.engineers:
            raise ConfigurationError("at least one engineer is required")
        seen = set()
        for eng in self.engineers:
            if eng.id in seen:
                raise ConfigurationError(f"duplicate engineer id {eng.id}")
            seen.add(eng.id)
        for gen in self.generators:
            gen.validate()
        if not 0.0 <= self.base_error_prob <= 1.0:
            raise ConfigurationError("base_error_prob must lie in [0, 1]")
        if self.skill_gap_error_boost < 0.0:
            raise ConfigurationError("skill_gap_error_boost must be >= 0")
        if not 0.0 <= self.p_stop_skill <= 1.0:
            raise ConfigurationError("p_stop_skill must lie in [0, 1]")
        if self.switch_penalty_hours < 0.0:
            raise ConfigurationError("switch_penalty_hours must be >= 0")
        _check_mix(self.rework_priority_mix, "rework_priority_mix")
        if self.rework_service_mean_hours <= 0.0:
            raise ConfigurationError("rework_service_mean_hours must be positive")
        if self.interrupt_base_rate < 0.0:
            raise ConfigurationError("interrupt_base_rate must be >= 0")
        if self.hours_per_day <= 0.0:
            raise ConfigurationError("hours_per_day must be positive")
        # a declared catalog turns unknown skill types into configuration errors
        # (as opposed to valid types no engineer holds, which dead-letter at runtime)
        if self.skill_types is not None:
            catalog = set(self.skill_types)
            for eng in self.engineers:
                if eng.skill.skill_type not in catalog:
                    raise ConfigurationError(
                        f"engineer {eng.id}: unknown skill type {eng.skill.skill_type!r}"
                    )
            for gen in self.generators:
                for spec, p in gen.skill_mix:
                    if p > 0.0 and spec.skill_type not in catalog:
                        raise ConfigurationError(
                            f"generator[{gen.work_type.value}]: unknown skill type {spec.skill_type!r}"
                        )


class EventCalendar:
    """Min-heap of (time, seq, kind, a, b) tuples; seq breaks time ties FIFO."""

    __slots__ = ("_heap", "_seq", "_now")

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, int, int]] = []
        self._seq = 0
        self._now = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: int, a: int, b: int) -> None:
        if time < self._now:
            raise StructuralError(f"event scheduled at {time} before current clock {self._now}")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, a, b))

    def pop(self) -> tuple[float, int, int, int, int] | None:
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        self._now = ev[0]
        return ev


def _quantile(sorted_vals: list[float], q: float) -> float:
    """Linear-interpolation quantile on pre-sorted data."""
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac


class DesStats:
    """Raw accumulators from one or more replications, plus derived summaries.

    Merging pools raw samples and sums counters, so every derived statistic
    of ``merge_stats(a, b)`` equals that of ``merge_stats(b, a)`` exactly
    (sample means use exact summation, quantiles sort first).
    """

    def __init__(self, horizon: float) -> None:
        self.horizon = horizon
        self.replications = 1
        self.n_days = int(math.floor(horizon))
        self.arrived: dict[tuple[WorkType, Priority], int] = {}
        self.completed: dict[tuple[WorkType, Priority], int] = {}
        self.completion_samples: dict[tuple[WorkType, Priority], list[float]] = {}
        self.queue_time_samples: dict[tuple[WorkType, Priority], list[float]] = {}
        self.arrived_total = 0
        self.completed_total = 0
        self.stop_count = 0
        self.stop_skill = 0
        self.stop_interrupt = 0
        self.preemption_count = 0
        self.reassignment_count = 0
        self.rework_count = 0
        self.dead_letter_count = 0
        self.in_system_integral = 0.0
        self.busy_integral = 0.0
        self.daily_team_queue: list[int] = []
        self.daily_individual_queue: list[int] = []
        self.daily_queue_by_priority: dict[Priority, list[int]] = {p: [] for p in Priority}
        self.daily_completion_sum: dict[tuple[WorkType, Priority], list[float]] = {}
        self.daily_completion_count: dict[tuple[WorkType, Priority], list[int]] = {}
        self.final_in_queue: dict[tuple[WorkType, Priority], int] = {}
        self.final_in_service: dict[tuple[WorkType, Priority], int] = {}

    # -- accumulation ------------------------------------------------------------
    def note_arrival(self, key: tuple[WorkType, Priority]) -> None:
        self.arrived[key] = self.arrived.get(key, 0) + 1
        self.arrived_total += 1

    def note_completion(self, key: tuple[WorkType, Priority], days: float, queue_days: float, t: float) -> None:
        self.completed[key] = self.completed.get(key, 0) + 1
        self.completed_total += 1
        self.completion_samples.setdefault(key, []).append(days)
        self.queue_time_samples.setdefault(key, []).append(queue_days)
        if self.n_days > 0:
            d = int(t)
            if d >= self.n_days:
                d = self.n_days - 1
            if key not in self.daily_completion_sum:
                self.daily_completion_sum[key] = [0.0] * self.n_days
                self.daily_completion_count[key] = [0] * self.n_days
            self.daily_completion_sum[key][d] += days
            self.daily_completion_count[key][d] += 1

    # -- derived -----------------------------------------------------------------
    def class_keys(self) -> list[tuple[WorkType, Priority]]:
        keys = set(self.arrived) | set(self.completed)
        return sorted(keys, key=lambda k: (k[0].value, -int(k[1])))

    def mean_completion_days(self, key) -> float | None:
        samples = self.completion_samples.get(key)
        if not samples:
            return None
        return math.fsum(samples) / len(samples)

    def median_completion_days(self, key) -> float | None:
        samples = self.completion_samples.get(key)
        if not samples:
            return None
        return _quantile(sorted(samples), 0.5)

    def p90_completion_days(self, key) -> float | None:
        samples = self.completion_samples.get(key)
        if not samples:
            return None
        return _quantile(sorted(samples), 0.9)

    def mean_queue_days(self, key) -> float | None:
        samples = self.queue_time_samples.get(key)
        if not samples:
            return None
        return math.fsum(samples) / len(samples)

    def daily_mean_completion(self, key) -> list[float | None]:
        sums = self.daily_completion_sum.get(key)
        if sums is None:
            return [None] * self.n_days
        counts = self.daily_completion_count[key]
        return [s / c if c > 0 else None for s, c in zip(sums, counts)]

    @property
    def total_days(self) -> float:
        return self.horizon * self.replications

    @property
    def time_avg_in_system(self) -> float:
        return self.in_system_integral / self.total_days

    @property
    def time_avg_busy(self) -> float:
        return self.busy_integral / self.total_days

    @property
    def completions_per_day(self) -> float:
        return self.completed_total / self.total_days

    @property
    def rework_per_day(self) -> float:
        return self.rework_count / self.total_days

    @property
    def preemptions_per_day(self) -> float:
        return self.preemption_count / self.total_days

    def to_flat_dict(self) -> dict:
        """JSON-compatible flat summary with stable, sorted keys."""
        out: dict = {
            "horizon_days": self.horizon,
            "replications": self.replications,
            "arrived_total": self.arrived_total,
            "completed_total": self.completed_total,
            "stops_total": self.stop_count,
            "stops_skill": self.stop_skill,
            "stops_interrupt": self.stop_interrupt,
            "preemptions": self.preemption_count,
            "reassignments": self.reassignment_count,
            "rework_incidents": self.rework_count,
            "dead_letters": self.dead_letter_count,
            "completions_per_day": self.completions_per_day,
            "rework_incidents_per_day": self.rework_per_day,
            "preemptions_per_day": self.preemptions_per_day,
            "time_avg_in_system": self.time_avg_in_system,
            "time_avg_busy_engineers": self.time_avg_busy,
        }
        for key in self.class_keys():
            wt, pr = key
            stem = f"class.{wt.value}.{pr.name.lower()}"
            out[f"{stem}.arrived"] = self.arrived.get(key, 0)
            out[f"{stem}.completed"] = self.completed.get(key, 0)
            out[f"{stem}.mean_completion_days"] = self.mean_completion_days(key)
            out[f"{stem}.median_completion_days"] = self.median_completion_days(key)
            out[f"{stem}.p90_completion_days"] = self.p90_completion_days(key)
            out[f"{stem}.mean_queue_days"] = self.mean_queue_days(key)
        return out


def merge_stats(a: DesStats, b: DesStats) -> DesStats:
    """Pool two replication summaries; derived stats are order-independent."""
    if a.horizon != b.horizon:
        raise StructuralError("cannot merge stats with different horizons")
    out = DesStats(a.horizon)
    out.replications = a.replications + b.replications
    for src in (a, b):
        for key, v in src.arrived.items():
            out.arrived[key] = out.arrived.get(key, 0) + v
        for key, v in src.completed.items():
            out.completed[key] = out.completed.get(key, 0) + v
        for key, v in src.completion_samples.items():
            out.completion_samples.setdefault(key, []).extend(v)
        for key, v in src.queue_time_samples.items():
            out.queue_time_samples.setdefault(key, []).extend(v)
        for key, v in src.final_in_queue.items():
            out.final_in_queue[key] = out.final_in_queue.get(key, 0) + v
        for key, v in src.final_in_service.items():
            out.final_in_service[key] = out.final_in_service.get(key, 0) + v
    out.arrived_total = a.arrived_total + b.arrived_total
    out.completed_total = a.completed_total + b.completed_total
    out.stop_count = a.stop_count + b.stop_count
    out.stop_skill = a.stop_skill + b.stop_skill
    out.stop_interrupt = a.stop_interrupt + b.stop_interrupt
    out.preemption_count = a.preemption_count + b.preemption_count
    out.reassignment_count = a.reassignment_count + b.reassignment_count
    out.rework_count = a.rework_count + b.rework_count
    out.dead_letter_count = a.dead_letter_count + b.dead_letter_count
    out.in_system_integral = a.in_system_integral + b.in_system_integral
    out.busy_integral = a.busy_integral + b.busy_integral
    if len(a.daily_team_queue) != len(b.daily_team_queue):
        raise StructuralError("cannot merge stats with different sampling grids")
    out.daily_team_queue = [x + y for x, y in zip(a.daily_team_queue, b.daily_team_queue)]
    out.daily_individual_queue = [
        x + y for x, y in zip(a.daily_individual_queue, b.daily_individual_queue)
    ]
    for p in Priority:
        out.daily_queue_by_priority[p] = [
            x + y for x, y in zip(a.daily_queue_by_priority[p], b.daily_queue_by_priority[p])
        ]
    for src in (a, b):
        for key, sums in src.daily_completion_sum.items():
            if key not in out.daily_completion_sum:
                out.daily_completion_sum[key] = [0.0] * out.n_days
                out.daily_completion_count[key] = [0] * out.n_days
            osum = out.daily_completion_sum[key]
            ocnt = out.daily_completion_count[key]
            cnts = src.daily_completion_count[key]
            for i in range(len(sums)):
                osum[i] += sums[i]
                ocnt[i] += cnts[i]
    return out


class _Server:
    __slots__ = (
        "index",
        "engineer",
        "queue",
        "project_primary",
        "item",
        "seg_start",
        "seg_rate",
        "seg_kind",
        "gap_boost",
        "epoch",
    )

    def __init__(self, index: int, engineer: Engineer) -> None:
        self.index = index
        self.engineer = engineer
        self.queue = WorkQueue(name=f"engineer[{engineer.id}]")
        self.project_primary = engineer.affinity is Affinity.PROJECT_PRIMARY
        self.item: WorkItem | None = None
        self.seg_start = 0.0
        self.seg_rate = 1.0
        self.seg_kind = _SEG_COMPLETE
        self.gap_boost = False
        self.epoch = 0


class DesEngine:
    """Single-replication engine; see ``run_des`` for the public entry point."""

    def __init__(
        self,
        config: DesConfig,
        modifiers: DesModifiers,
        seed: int,
        horizon: float,
        collect_log: bool = True,
        initial_items: list[WorkItem] | None = None,
    ) -> None:
        import random as _random

        config.validate()
        modifiers.validate()
        if horizon <= 0.0 or not math.isfinite(horizon):
            raise ConfigurationError(f"horizon must be positive and finite, got {horizon}")
        self.cfg = config
        self.modifiers = modifiers
        self.horizon = horizon
        self.rng = _random.Random(seed)
        self.calendar = EventCalendar()
        self.stats = DesStats(horizon)
        self.log: list[EventRecord] | None = [] if collect_log else None
        self.team_queue = WorkQueue(name="team")
        self.servers = [_Server(i, eng) for i, eng in enumerate(config.engineers)]
        self.servers_by_type: dict[str, list[_Server]] = {}
        for srv in self.servers:
            self.servers_by_type.setdefault(srv.engineer.skill.skill_type, []).append(srv)
        self.initial_items = list(initial_items) if initial_items else []
        self._id_counter = 0
        self.n_in_system = 0
        self.n_busy = 0
        self.last_t = 0.0
        self.next_sample_day = 1

    def _next_id(self) -> int:
        self._id_counter += 1
        return self._id_counter

    # -- time bookkeeping ----------------------------------------------------
    def _advance(self, t: float) -> None:
        if t > self.horizon:
            t = self.horizon
        last = self.last_t
        if t > last:
            self.in_system_step(t, last)
            self.last_t = t
        d = self.next_sample_day
        while d <= t and d <= self.stats.n_days:
            self._sample_day()
            d += 1
        self.next_sample_day = d

    def in_system_step(self, t: float, last: float) -> None:
        dt = t - last
        self.stats.in_system_integral += self.n_in_system * dt
        self.stats.busy_integral += self.n_busy * dt

    def _sample_day(self) -> None:
        st = self.stats
        team = self.team_queue
        st.daily_team_queue.append(len(team))
        ind_total = 0
        for p in Priority:
            n = team.count(p)
            for srv in self.servers:
                n += srv.queue.count(p)
            st.daily_queue_by_priority[p].append(n)
        for srv in self.servers:
            ind_total += len(srv.queue)
        st.daily_individual_queue.append(ind_total)

    # -- event handlers --------------------------------------------------------
    def _admit(self, item: WorkItem, t: float, kind: str, eng_id: int, detail: str) -> None:
        self.stats.note_arrival((item.work_type, item.priority))
        self.n_in_system += 1
        if self.log is not None:
            self.log.append((t, kind, item.id, eng_id, detail))
        self.team_queue.push(item, t)

    def _on_arrival(self, t: float, gen_index: int) -> None:
        gen = self.cfg.generators[gen_index]
        self.calendar.push(
            t + sample_interarrival(gen.daily_rate, self.rng), _EV_ARRIVAL, gen_index, 0
        )
        item = gen.sample_item(t, self.rng, self._next_id())
        self._admit(item, t, "arrival", -1, f"{item.work_type.value}:{item.priority.name}")

    def _on_service_end(self, t: float, server_index: int, epoch: int) -> None:
        srv = self.servers[server_index]
        if epoch != srv.epoch or srv.item is None:
            return  # superseded by a preemption or an earlier stop
        item = srv.item
        srv.item = None
        srv.epoch += 1
        self.n_busy -= 1
        seg = srv.seg_kind
        cfg = self.cfg
        if seg == _SEG_COMPLETE:
            item.remaining_service_hours = 0.0
            item.completion_time = t
            days = t - item.arrival_time
            self.stats.note_completion(
                (item.work_type, item.priority), days, item.total_queue_days, t
            )
            self.n_in_system -= 1
            if self.log is not None:
                self.log.append((t, "complete", item.id, srv.engineer.id, f"{days:.6f}"))
            self._maybe_rework(item, t, srv)
            return
        done = (t - srv.seg_start) * srv.seg_rate
        item.remaining_service_hours = max(0.0, item.remaining_service_hours - done)
        item.stop_count += 1
        self.stats.stop_count += 1
        if seg == _SEG_SKILL_STOP:
            # insufficient skill surfaced mid-service: back to the team queue
            self.stats.stop_skill += 1
            self.stats.reassignment_count += 1
            if self.log is not None:
                self.log.append((t, "stop", item.id, srv.engineer.id, "skill"))
            self.team_queue.push(item, t)
        else:
            item.remaining_service_hours += cfg.switch_penalty_hours
            self.stats.stop_interrupt += 1
            if self.log is not None:
                self.log.append((t, "stop", item.id, srv.engineer.id, "interrupt"))
            srv.queue.push(item, t)

    def _maybe_rework(self, item: WorkItem, t: float, srv: _Server) -> None:
        cfg = self.cfg
        boost = cfg.skill_gap_error_boost if srv.gap_boost else 1.0
        p = cfg.base_error_prob * self.modifiers.rework_multiplier * boost
        if p <= 0.0 or self.rng.random() >= min(1.0, p):
            return
        priority = _sample_priority(cfg.rework_priority_mix, self.rng)
        service = sample_exponential_hours(cfg.rework_service_mean_hours, self.rng)
        incident = WorkItem(
            id=self._next_id(),
            work_type=WorkType.REWORK_INCIDENT,
            priority=priority,
            required=item.required,
            service_demand_hours=service,
            arrival_time=t,
        )
        self.stats.rework_count += 1
        self._admit(incident, t, "incident", srv.engineer.id, f"from:{item.id}")

    # -- dispatch ---------------------------------------------------------------
    def _dead_letter(self, item: WorkItem, t: float) -> None:
        self.stats.dead_letter_count += 1
        self.stats.reassignment_count += 1
        self.n_in_system -= 1
        if self.log is not None:
            self.log.append((t, "dead_letter", item.id, -1, item.required.skill_type))

    def _preempt(self, srv: _Server, t: float) -> None:
        cur = srv.item
        srv.item = None
        srv.epoch += 1
        self.n_busy -= 1
        done = (t - srv.seg_start) * srv.seg_rate
        cur.remaining_service_hours = (
            max(0.0, cur.remaining_service_hours - done) + self.cfg.switch_penalty_hours
        )
        cur.stop_count += 1
        self.stats.stop_count += 1
        self.stats.preemption_count += 1
        if self.log is not None:
            self.log.append((t, "stop", cur.id, srv.engineer.id, "preempt"))
        srv.queue.push(cur, t)

    def _steal(self, srv: _Server, t: float) -> WorkItem | None:
        # pull the discipline-best compatible waiting item from a colleague
        best_srv = None
        best_key = None
        for other in self.servers_by_type[srv.engineer.skill.skill_type]:
            if other is srv:
                continue
            cand = other.queue.peek()
            if cand is None:
                continue
            k = queue_key(cand)
            if best_key is None or k < best_key:
                best_key = k
                best_srv = other
        if best_srv is None:
            return None
        item = best_srv.queue.remove(best_srv.queue.peek().id, t)
        if self.log is not None:
            self.log.append((t, "dispatch", item.id, srv.engineer.id, "steal"))
        return item

    def _dispatch(self, t: float) -> None:
        team = self.team_queue
        while True:
            item = team.peek()
            if item is None:
                break
            cands = self.servers_by_type.get(item.required.skill_type)
            if not cands:
                team.pop_best(t)
                self._dead_letter(item, t)
                continue
            is_project = item.work_type is WorkType.PROJECT_TASK
            best = None
            best_key = None
            for srv in cands:
                k = (len(srv.queue), 0 if srv.project_primary == is_project else 1, srv.engineer.id)
                if best_key is None or k < best_key:
                    best_key = k
                    best = srv
            team.pop_best(t)
            if self.log is not None:
                self.log.append((t, "dispatch", item.id, best.engineer.id, "route"))
            best.queue.push(item, t)
            if best.item is not None and item.priority > best.item.priority:
                self._preempt(best, t)
        # work-conserving start loop: idle engineers pull own queue, then steal
        progress = True
        while progress:
            progress = False
            for srv in self.servers:
                if srv.item is None:
                    nxt = srv.queue.pop_best(t)
                    if nxt is None:
                        nxt = self._steal(srv, t)
                    if nxt is not None:
                        self._start_service(srv, nxt, t)
                        progress = True

    def _start_service(self, srv: _Server, item: WorkItem, t: float) -> None:
        eng = srv.engineer
        rate = self.cfg.hours_per_day * eng.capacity_factor * self.modifiers.capacity_factor
        duration = item.remaining_service_hours / rate
        end = t + duration
        seg_kind = _SEG_COMPLETE
        gap_boost = False
        if item.required.skill_level > eng.skill.skill_level:
            # the mismatch either stops the work partway or degrades quality
            if self.cfg.p_stop_skill > 0.0 and self.rng.random() < self.cfg.p_stop_skill:
                end = t + self.rng.random() * duration
                seg_kind = _SEG_SKILL_STOP
            else:
                gap_boost = True
        irate = self.modifiers.interrupt_rate
        if irate > 0.0:
            t_int = t + sample_interarrival(irate, self.rng)
            if t_int < end:
                end = t_int
                seg_kind = _SEG_INTERRUPT
        srv.item = item
        srv.seg_start = t
        srv.seg_rate = rate
        srv.seg_kind = seg_kind
        srv.gap_boost = gap_boost
        srv.epoch += 1
        self.n_busy += 1
        self.calendar.push(
            end,
            _EV_SERVICE_END if seg_kind == _SEG_COMPLETE else _EV_INTERRUPT_TICK,
            srv.index,
            srv.epoch,
        )
        if self.log is not None:
            self.log.append((t, "start", item.id, eng.id, ""))

    # -- main loop ----------------------------------------------------------------
    def run(self) -> DesStats:
        for item in self.initial_items:
            if item.arrival_time != 0.0:
                raise ConfigurationError("initial items must carry arrival_time 0")
            self._admit(item, 0.0, "arrival", -1, "initial")
        if self.initial_items:
            self._dispatch(0.0)
        for gi, gen in enumerate(self.cfg.generators):
            if gen.daily_rate > 0.0:
                self.calendar.push(
                    sample_interarrival(gen.daily_rate, self.rng), _EV_ARRIVAL, gi, 0
                )
        while True:
            ev = self.calendar.pop()
            if ev is None:
                break
            t = ev[0]
            if t > self.horizon:
                break
            self._advance(t)
            kind = ev[2]
            if kind == _EV_ARRIVAL:
                self._on_arrival(t, ev[3])
            else:
                self._on_service_end(t, ev[3], ev[4])
            self._dispatch(t)
        self._advance(self.horizon)
        self._finalize()
        return self.stats

    def _finalize(self) -> None:
        st = self.stats
        in_queue = 0
        for srv in self.servers:
            for item in srv.queue.items():
                key = (item.work_type, item.priority)
                st.final_in_queue[key] = st.final_in_queue.get(key, 0) + 1
                in_queue += 1
            if srv.item is not None:
                key = (srv.item.work_type, srv.item.priority)
                st.final_in_service[key] = st.final_in_service.get(key, 0) + 1
        for item in self.team_queue.items():
            key = (item.work_type, item.priority)
            st.final_in_queue[key] = st.final_in_queue.get(key, 0) + 1
            in_queue += 1
        accounted = st.completed_total + st.dead_letter_count + in_queue + self.n_busy
        if accounted != st.arrived_total:
            raise StructuralError(
                f"work conservation violated: arrived {st.arrived_total}, accounted {accounted}"
            )


def run_des(
    config: DesConfig,
    modifiers: DesModifiers | None = None,
    seed: int = 0,
    horizon: float = 126.0,
    collect_log: bool = True,
    initial_items: list[WorkItem] | None = None,
) -> tuple[DesStats, list[EventRecord]]:
    """Run one replication; returns (stats, event log).

    The log is empty when ``collect_log`` is False.  Identical arguments
    produce identical stats and logs; the seed is the only randomness.
    """
    engine = DesEngine(config, modifiers or DesModifiers.identity(), seed, horizon,
                       collect_log=collect_log, initial_items=initial_items)
    stats = engine.run()
    return stats, (engine.log if engine.log is not None else [])


def run_des_replicated(
    config: DesConfig,
    modifiers: DesModifiers | None = None,
    seed: int = 0,
    horizon: float = 126.0,
    replications: int = 1,
    collect_log: bool = False,
) -> tuple[DesStats, list[list[EventRecord]]]:
    """Run ``replications`` independent replications with seeds seed, seed+1, ...

    Stats are pooled with ``merge_stats``; logs (when collected) come back
    one list per replication.
    """
    if replications < 1:
        raise ConfigurationError("replications must be >= 1")
    merged: DesStats | None = None
    logs: list[list[EventRecord]] = []
    for i in range(replications):
        stats, log = run_des(config, modifiers, seed + i, horizon, collect_log=collect_log)
        logs.append(log)
        merged = stats if merged is None else merge_stats(merged, stats)
    return merged, logs
