#!/usr/bin/env python3
"""Uncoupled baseline: event model and flow model run side by side.

Runs the default overloaded-team scenario with no coupling, prints the
per-priority service figures and final stocks, and writes full reports.

    python scripts/run_baseline.py --reps 5 --out results/baseline
"""
import argparse
from pathlib import Path

from teamsim.des import run_des_replicated
from teamsim.domain import Priority
from teamsim.io.report import emit_des_report, emit_sd_report
from teamsim.io.scenario import default_scenario, load_scenario
from teamsim.sd import run_sd


def pooled(stats, priority, of):
    total, n = 0.0, 0
    for key in stats.class_keys():
        if key[1] is not priority:
            continue
        c = stats.completed.get(key, 0)
        m = of(key)
        if c and m is not None:
            total += m * c
            n += c
    return (total / n if n else float("nan")), n


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="default", help="scenario YAML path, or 'default'")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--reps", type=int, default=5, help="event-model replications")
    ap.add_argument("--out", default="results/baseline")
    args = ap.parse_args()

    sc = default_scenario() if args.scenario == "default" else load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    out = Path(args.out)

    stats, logs = run_des_replicated(
        sc.des, seed=seed, horizon=sc.horizon, replications=args.reps, collect_log=True
    )
    print(f"== event model: {args.reps} x {sc.horizon:g} days, seed {seed} ==")
    print(f"arrived {stats.arrived_total}  completed {stats.completed_total}  "
          f"stops {stats.stop_count}  rework {stats.rework_count}")
    print(f"{'priority':<10}{'n done':>8}{'mean queue d':>14}{'mean total d':>14}")
    for pr in (Priority.P1, Priority.P2, Priority.P3):
        q, n = pooled(stats, pr, stats.mean_queue_days)
        w, _ = pooled(stats, pr, stats.mean_completion_days)
        print(f"{pr.name:<10}{n:>8}{q:>14.2f}{w:>14.2f}")

    traj = run_sd(sc.sd_initial, sc.sd_params, sc.horizon, sc.dt)
    final = traj.final_state
    print(f"\n== flow model: {sc.horizon:g} days at dt {sc.dt:g} ==")
    print(f"backlog P/O {final.project_backlog:.1f}/{final.ops_backlog:.1f}  "
          f"completed P/O {final.project_completed:.1f}/{final.ops_completed:.1f}")
    print(f"fatigue {final.fatigue:.3f}  pressure {final.mgmt_pressure:.3f}  "
          f"rework pool {final.rework_pool:.1f}  clamps {traj.clamp_events}")

    written = emit_des_report(stats, out / "des", fmt="json", logs=logs)
    written += emit_sd_report(traj, out / "sd", fmt="json")
    print(f"\nwrote {len(written)} files under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
