"""Cyclic coupling of the event-driven and stock-and-flow models.

Each cycle runs the event model, summarizes its realized rates, calibrates
the flow model with them (feed-forward), integrates the flow model over
the same horizon, and converts its pressure and fatigue trajectories into
service modifiers for the next event-model run (feedback).  Cycle 0 always
runs with identity modifiers, so it doubles as the uncoupled baseline;
differences of later cycles against cycle 0 expose the loop's effect on
each priority class.

Seeding: cycle k uses seed + k, so cycles differ only through modifiers
and the per-cycle stream, and the whole procedure is reproducible from
the scenario seed alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .des import DesModifiers, DesStats, EventRecord, run_des
from .domain import Priority, WorkType
from .errors import ConfigurationError
from .sd import SdParams, SdState, SdTrajectory, run_sd

_EPS = 1e-9


@dataclass(frozen=True)
class FeedForward:
    """Realized per-day rates extracted from one event-model run."""

    project_completion_rate: float
    ops_completion_rate: float
    rework_generation_rate: float
    preemption_rate: float

    def as_dict(self) -> dict[str, float]:
        return {
            "project_completion_rate": self.project_completion_rate,
            "ops_completion_rate": self.ops_completion_rate,
            "rework_generation_rate": self.rework_generation_rate,
            "preemption_rate": self.preemption_rate,
        }


@dataclass(frozen=True)
class SdSummary:
    """The slice of a flow-model trajectory the coupling cares about."""

    mean_fatigue: float
    mean_mgmt_pressure: float
    mean_stop_rate: float
    mean_error_frac: float
    final_error_frac: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mean_fatigue": self.mean_fatigue,
            "mean_mgmt_pressure": self.mean_mgmt_pressure,
            "mean_stop_rate": self.mean_stop_rate,
            "mean_error_frac": self.mean_error_frac,
            "final_error_frac": self.final_error_frac,
        }


def summarize_trajectory(traj: SdTrajectory) -> SdSummary:
    return SdSummary(
        mean_fatigue=traj.mean("fatigue"),
        mean_mgmt_pressure=traj.mean("mgmt_pressure"),
        mean_stop_rate=traj.mean("stop_rate"),
        mean_error_frac=traj.mean("error_frac"),
        final_error_frac=traj.aux[-1].error_frac,
    )


def extract_feedforward(stats: DesStats) -> FeedForward:
    """Realized rates per day over the run (pooled across replications)."""
    days = stats.total_days
    project = sum(
        count for (wt, _), count in stats.completed.items() if wt is WorkType.PROJECT_TASK
    )
    ops = stats.completed_total - project
    return FeedForward(
        project_completion_rate=project / days,
        ops_completion_rate=ops / days,
        rework_generation_rate=stats.rework_count / days,
        preemption_rate=stats.preemption_count / days,
    )


def apply_feedforward(params: SdParams, ff: FeedForward, initial: SdState) -> SdParams:
    """Calibrate the flow model so its initial flows match the event model.

    Nominal completion times are set so that initial WIP divided by them
    reproduces the observed completion rates; the observed rework rate
    enters the rework pool as an exogenous inflow; the baseline stop rate
    is scaled by the observed preemptions per completion (a dimensionless
    measure of how contested service is).  Rates too small to calibrate
    against leave the parameter untouched.
    """
    updates: dict[str, float] = {"rework_inflow": ff.rework_generation_rate}
    if ff.project_completion_rate > _EPS and initial.project_wip > _EPS:
        updates["project_completion_days"] = initial.project_wip / ff.project_completion_rate
    if ff.ops_completion_rate > _EPS and initial.ops_wip > _EPS:
        updates["ops_completion_days"] = initial.ops_wip / ff.ops_completion_rate
    total_rate = ff.project_completion_rate + ff.ops_completion_rate
    if total_rate > _EPS:
        updates["s_base"] = params.s_base * (1.0 + ff.preemption_rate / total_rate)
    new = replace(params, **updates)
    new.validate()
    return new


def extract_feedback(
    traj: SdTrajectory, params: SdParams, interrupt_base_rate: float
) -> DesModifiers:
    """Convert a flow-model trajectory into event-model service modifiers.

    Fatigue-driven error inflation maps to the rework multiplier, mean
    pressure eats capacity (clamped to [0.5, 1]), and the stop-rate ratio
    scales the management-interruption rate.
    """
    mean_error = traj.mean("error_frac")
    if params.base_error_frac <= 0.0:
        if mean_error > 1e-12:
            raise ConfigurationError(
                "cannot form rework multiplier: base_error_frac is 0 but the "
                f"trajectory's mean error fraction is {mean_error}"
            )
        rework_multiplier = 1.0
    else:
        rework_multiplier = mean_error / params.base_error_frac
    capacity = min(1.0, max(0.5, 1.0 - params.k_capacity * traj.mean("mgmt_pressure")))
    if params.s_base > 0.0 and interrupt_base_rate > 0.0:
        interrupt = interrupt_base_rate * (traj.mean("stop_rate") / params.s_base)
    else:
        interrupt = 0.0
    return DesModifiers(
        rework_multiplier=rework_multiplier,
        capacity_factor=capacity,
        interrupt_rate=interrupt,
    )


def modifier_change(a: DesModifiers, b: DesModifiers) -> float:
    """Largest componentwise relative change between two modifier sets."""

    def rel(x: float, y: float) -> float:
        m = max(abs(x), abs(y))
        return abs(x - y) / m if m > 0.0 else 0.0

    return max(
        rel(a.rework_multiplier, b.rework_multiplier),
        rel(a.capacity_factor, b.capacity_factor),
        rel(a.interrupt_rate, b.interrupt_rate),
    )


@dataclass
class CycleRecord:
    index: int
    modifiers_in: DesModifiers
    feed_forward: FeedForward
    sd_summary: SdSummary
    modifiers_out: DesModifiers
    des_stats: DesStats
    event_log: list[EventRecord]


@dataclass
class HybridReport:
    cycles: list[CycleRecord]
    converged: bool
    # per cycle, per (work type, priority): daily mean completion-time deltas
    # against cycle 0; None where either cycle completed nothing that day
    diffs: list[dict[tuple[WorkType, Priority], list[float | None]]]

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)


def priority_daily_mean(stats: DesStats, priority: Priority) -> list[float | None]:
    """Daily mean completion time pooled over work types of one priority."""
    sums = [0.0] * stats.n_days
    counts = [0] * stats.n_days
    for (wt, pr), daily in stats.daily_completion_sum.items():
        if pr is not priority:
            continue
        cnts = stats.daily_completion_count[(wt, pr)]
        for i in range(len(daily)):
            sums[i] += daily[i]
            counts[i] += cnts[i]
    return [s / c if c > 0 else None for s, c in zip(sums, counts)]


def _diff_series(cur: DesStats, base: DesStats) -> dict:
    keys = sorted(
        set(cur.daily_completion_sum) | set(base.daily_completion_sum),
        key=lambda k: (k[0].value, -int(k[1])),
    )
    out = {}
    for key in keys:
        a = cur.daily_mean_completion(key)
        b = base.daily_mean_completion(key)
        out[key] = [
            x - y if (x is not None and y is not None) else None for x, y in zip(a, b)
        ]
    return out


def run_hybrid(
    scenario,
    cycles_max: int | None = None,
    seed: int | None = None,
    tol: float | None = None,
    collect_logs: bool = True,
) -> HybridReport:
    """Run the coupled procedure for up to ``cycles_max`` cycles.

    Stops early once the feedback modifiers change by less than ``tol``
    (largest relative component change) between consecutive cycles.
    """
    cycles_max = scenario.cycles_max if cycles_max is None else cycles_max
    seed = scenario.seed if seed is None else seed
    tol = scenario.tol if tol is None else tol
    if cycles_max < 1:
        raise ConfigurationError("cycles_max must be >= 1")
    if not (tol > 0.0) or not math.isfinite(tol):
        raise ConfigurationError(f"tol must be positive and finite, got {tol}")
    scenario.validate()

    modifiers = DesModifiers.identity()
    cycles: list[CycleRecord] = []
    converged = False
    prev_out: DesModifiers | None = None
    for k in range(cycles_max):
        stats, log = run_des(
            scenario.des,
            modifiers,
            seed=seed + k,
            horizon=scenario.horizon,
            collect_log=collect_logs,
        )
        ff = extract_feedforward(stats)
        params_k = apply_feedforward(scenario.sd_params, ff, scenario.sd_initial)
        traj = run_sd(scenario.sd_initial, params_k, scenario.horizon, scenario.dt)
        out = extract_feedback(traj, params_k, scenario.des.interrupt_base_rate)
        cycles.append(
            CycleRecord(
                index=k,
                modifiers_in=modifiers,
                feed_forward=ff,
                sd_summary=summarize_trajectory(traj),
                modifiers_out=out,
                des_stats=stats,
                event_log=log,
            )
        )
        if prev_out is not None and modifier_change(out, prev_out) < tol:
            converged = True
            break
        prev_out = out
        modifiers = out

    base = cycles[0].des_stats
    diffs = [_diff_series(rec.des_stats, base) for rec in cycles]
    return HybridReport(cycles=cycles, converged=converged, diffs=diffs)
