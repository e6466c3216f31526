"""Deterministic report emission.

Every emitter renders floats at six significant digits, sorts JSON keys,
and writes newline-terminated text, so re-running the same result object
yields byte-identical files.  CSV columns with no value render as empty
fields.
"""
from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Sequence

from ..des import DesStats, EventRecord, format_event
from ..domain import Priority
from ..errors import ConfigurationError
from ..hybrid import HybridReport, priority_daily_mean
from ..sd import SdAux, SdState, SdTrajectory

FORMATS = ("json", "csv")

EVENT_LOG_HEADER = "time,event_kind,item_id,engineer_id,detail"


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _round_floats(obj):
    if isinstance(obj, float):
        return _sig6(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_round_floats(obj), sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def write_event_log(log: Sequence[EventRecord], path: Path) -> None:
    lines = [EVENT_LOG_HEADER]
    lines.extend(format_event(rec) for rec in log)
    path.write_text("\n".join(lines) + "\n")


def write_event_log_ndjson(log: Sequence[EventRecord], path: Path) -> None:
    out = []
    for t, kind, item_id, eng_id, detail in log:
        out.append(
            json.dumps(
                {
                    "time": float(f"{t:.6f}"),
                    "event_kind": kind,
                    "item_id": item_id,
                    "engineer_id": eng_id,
                    "detail": detail,
                },
                sort_keys=True,
            )
        )
    path.write_text("\n".join(out) + ("\n" if out else ""))


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ConfigurationError(f"format must be one of {FORMATS}, got {fmt!r}")


def _kv_rows(flat: dict) -> list[tuple[str, object]]:
    return [(k, flat[k]) for k in sorted(flat)]


def emit_des_report(
    stats: DesStats,
    out_dir: Path,
    fmt: str = "json",
    logs: Sequence[Sequence[EventRecord]] = (),
) -> list[Path]:
    """Write summary, daily queue series, and optional event logs."""
    _check_format(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    flat = stats.to_flat_dict()
    if fmt == "json":
        p = out_dir / "summary.json"
        write_json(flat, p)
    else:
        p = out_dir / "summary.csv"
        write_csv(p, ("key", "value"), _kv_rows(flat))
    written.append(p)

    reps = stats.replications
    rows = []
    for i in range(len(stats.daily_team_queue)):
        rows.append(
            (
                i + 1,
                stats.daily_team_queue[i] / reps,
                stats.daily_individual_queue[i] / reps,
                stats.daily_queue_by_priority[Priority.P1][i] / reps,
                stats.daily_queue_by_priority[Priority.P2][i] / reps,
                stats.daily_queue_by_priority[Priority.P3][i] / reps,
            )
        )
    p = out_dir / "queue_lengths.csv"
    write_csv(p, ("day", "team_queue", "individual_queues", "p1", "p2", "p3"), rows)
    written.append(p)

    if len(logs) == 1:
        p = out_dir / "eventlog.csv"
        write_event_log(logs[0], p)
        written.append(p)
    else:
        for k, log in enumerate(logs):
            p = out_dir / f"eventlog_rep{k}.csv"
            write_event_log(log, p)
            written.append(p)
    return written


def _state_columns() -> list[str]:
    return [f.name for f in fields(SdState)]


def _aux_columns() -> list[str]:
    return [f.name for f in fields(SdAux)]


def emit_sd_report(traj: SdTrajectory, out_dir: Path, fmt: str = "json") -> list[Path]:
    """Write the wide trajectory table plus a small summary."""
    _check_format(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state_cols = _state_columns()
    aux_cols = _aux_columns()
    rows = []
    for t, s, a in zip(traj.times, traj.states, traj.aux):
        rows.append(
            [t]
            + [getattr(s, c) for c in state_cols]
            + [getattr(a, c) for c in aux_cols]
        )
    p_traj = out_dir / "trajectory.csv"
    write_csv(p_traj, ["time"] + state_cols + aux_cols, rows)
    summary = {
        "steps": len(traj) - 1,
        "dt": traj.dt,
        "clamp_events": traj.clamp_events,
        "final": traj.final_state.as_dict(),
        "mean_fatigue": traj.mean("fatigue"),
        "mean_mgmt_pressure": traj.mean("mgmt_pressure"),
        "mean_error_frac": traj.mean("error_frac"),
        "mean_stop_rate": traj.mean("stop_rate"),
    }
    if fmt == "json":
        p_sum = out_dir / "summary.json"
        write_json(summary, p_sum)
    else:
        flat = {k: v for k, v in summary.items() if not isinstance(v, dict)}
        for k, v in summary["final"].items():
            flat[f"final.{k}"] = v
        p_sum = out_dir / "summary.csv"
        write_csv(p_sum, ("key", "value"), _kv_rows(flat))
    return [p_traj, p_sum]


def _cycle_dict(rec) -> dict:
    return {
        "cycle": rec.index,
        "modifiers_in": {
            "rework_multiplier": rec.modifiers_in.rework_multiplier,
            "capacity_factor": rec.modifiers_in.capacity_factor,
            "interrupt_rate": rec.modifiers_in.interrupt_rate,
        },
        "feed_forward": rec.feed_forward.as_dict(),
        "sd_summary": rec.sd_summary.as_dict(),
        "modifiers_out": {
            "rework_multiplier": rec.modifiers_out.rework_multiplier,
            "capacity_factor": rec.modifiers_out.capacity_factor,
            "interrupt_rate": rec.modifiers_out.interrupt_rate,
        },
        "des": rec.des_stats.to_flat_dict(),
    }


def emit_hybrid_report(report: HybridReport, out_dir: Path, fmt: str = "json") -> list[Path]:
    """Write cycles.json, per-priority difference series, and event logs.

    The difference CSVs compare the final cycle against cycle 0: per day,
    the change in mean completion time (days) for that priority.  Days
    where either cycle completed nothing are left empty.
    """
    _check_format(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    doc = {
        "converged": report.converged,
        "n_cycles": report.n_cycles,
        "cycles": [_cycle_dict(rec) for rec in report.cycles],
    }
    p = out_dir / "cycles.json"
    write_json(doc, p)
    written.append(p)

    base = report.cycles[0].des_stats
    final = report.cycles[-1].des_stats
    for pr in (Priority.P1, Priority.P2, Priority.P3):
        cur = priority_daily_mean(final, pr)
        ref = priority_daily_mean(base, pr)
        rows = []
        for day0, (c, r) in enumerate(zip(cur, ref)):
            delta = c - r if (c is not None and r is not None) else None
            rows.append((day0 + 1, delta))
        p = out_dir / f"diff_{pr.name.lower()}.csv"
        write_csv(p, ("day", "delta_days"), rows)
        written.append(p)

    for rec in report.cycles:
        if rec.event_log:
            p = out_dir / f"eventlog_cycle{rec.index}.ndjson"
            write_event_log_ndjson(rec.event_log, p)
            written.append(p)
    return written


def emit_fit_report(result, out_dir: Path, fmt: str = "json") -> list[Path]:
    """Write per-class fit results from an ingest."""
    _check_format(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = {}
    for (wt, pr), obs in sorted(result.classes.items()):
        classes[f"{wt}.{pr.lower()}"] = {
            "n": obs.n,
            "rate_per_day": obs.arrival_fit.rate_per_day if obs.arrival_fit else None,
            "ks_distance": obs.arrival_fit.ks_distance if obs.arrival_fit else None,
            "mean_service_hours": obs.mean_service_hours,
        }
    doc = {
        "rows": result.n_rows,
        "rows_ok": result.n_ok,
        "service_time_source": result.service_time_source,
        "bad_rows": [{"row": r, "reason": m} for r, m in result.errors],
        "classes": classes,
    }
    if fmt == "json":
        p = out_dir / "fits.json"
        write_json(doc, p)
    else:
        rows = []
        for key in sorted(classes):
            c = classes[key]
            rows.append(
                (key, c["n"], c["rate_per_day"], c["ks_distance"], c["mean_service_hours"])
            )
        p = out_dir / "fits.csv"
        write_csv(p, ("class", "n", "rate_per_day", "ks_distance", "mean_service_hours"), rows)
    return [p]


def emit_report(result, out_dir: Path, fmt: str = "json") -> list[Path]:
    """Dispatch on result type; see the per-type emitters."""
    if isinstance(result, DesStats):
        return emit_des_report(result, out_dir, fmt)
    if isinstance(result, SdTrajectory):
        return emit_sd_report(result, out_dir, fmt)
    if isinstance(result, HybridReport):
        return emit_hybrid_report(result, out_dir, fmt)
    raise ConfigurationError(f"no emitter for result type {type(result).__name__}")
