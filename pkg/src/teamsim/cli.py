"""Command-line front end.

Subcommands: fit, synth, des, sd, hybrid, validate.  Scenario arguments
take a YAML path or the literal name ``default`` for the built-in
overloaded-team scenario; environment variables prefixed ``TEAMSIM_``
override scenario fields either way.  Exit codes: 0 success, 1 bad
configuration or data, 2 unreadable or missing input, 3 engine failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .des import run_des_replicated
from .errors import (
    ConfigurationError,
    DataError,
    EngineError,
    StructuralError,
    TeamsimError,
)
from .hybrid import run_hybrid
from .io.report import (
    emit_des_report,
    emit_fit_report,
    emit_hybrid_report,
    emit_sd_report,
)
from .io.scenario import (
    Scenario,
    apply_env_overrides,
    default_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .io.tickets import generate_synthetic, ingest_tickets, synth_spec_from_dict
from .sd import run_sd


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; that slot is reserved for
    # I/O problems here, so route usage errors through the normal handler
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _load(scenario_arg: str, env=None) -> Scenario:
    if scenario_arg == "default":
        doc = scenario_to_dict(default_scenario())
        doc = apply_env_overrides(doc, env)
        return scenario_from_dict(doc, name="default-overloaded-team")
    return load_scenario(scenario_arg, env)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _cmd_fit(args) -> int:
    result = ingest_tickets(args.tickets, service_time_source=args.service_time_source)
    if args.out:
        paths = emit_fit_report(result, Path(args.out), args.format)
        for p in paths:
            print(p)
        return 0
    print(f"rows={result.n_rows} ok={result.n_ok} bad={len(result.errors)}")
    for key in sorted(result.classes):
        obs = result.classes[key]
        rate = _fmt(obs.arrival_fit.rate_per_day) if obs.arrival_fit else "-"
        ks = _fmt(obs.arrival_fit.ks_distance) if obs.arrival_fit else "-"
        svc = _fmt(obs.mean_service_hours) if obs.mean_service_hours is not None else "-"
        print(f"{key[0]},{key[1]},n={obs.n},rate_per_day={rate},ks={ks},mean_service_hours={svc}")
    return 0


def _cmd_synth(args) -> int:
    with open(args.spec) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"{args.spec}: invalid YAML: {e}") from None
    spec = synth_spec_from_dict(doc)
    if args.span is not None:
        spec.span_days = args.span
        spec.validate()
    n = generate_synthetic(spec, args.seed, args.out)
    print(f"wrote {n} rows to {args.out}")
    return 0


def _cmd_des(args) -> int:
    scenario = _load(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    horizon = scenario.horizon if args.horizon is None else args.horizon
    reps = scenario.replications if args.reps is None else args.reps
    collect = args.out is not None
    stats, logs = run_des_replicated(
        scenario.des, None, seed=seed, horizon=horizon, replications=reps, collect_log=collect
    )
    if args.out:
        for p in emit_des_report(stats, Path(args.out), args.format, logs=logs):
            print(p)
        return 0
    flat = stats.to_flat_dict()
    for k in sorted(flat):
        v = flat[k]
        print(f"{k}={_fmt(v) if isinstance(v, float) else v}")
    return 0


def _cmd_sd(args) -> int:
    scenario = _load(args.scenario)
    horizon = scenario.horizon if args.horizon is None else args.horizon
    dt = scenario.dt if args.dt is None else args.dt
    traj = run_sd(scenario.sd_initial, scenario.sd_params, horizon, dt)
    if args.out:
        for p in emit_sd_report(traj, Path(args.out), args.format):
            print(p)
        return 0
    final = traj.final_state.as_dict()
    for k in sorted(final):
        print(f"final.{k}={_fmt(final[k])}")
    print(f"clamp_events={traj.clamp_events}")
    return 0


def _cmd_hybrid(args) -> int:
    scenario = _load(args.scenario)
    report = run_hybrid(
        scenario,
        cycles_max=args.cycles,
        seed=args.seed,
        tol=args.tol,
        collect_logs=args.out is not None,
    )
    if args.out:
        for p in emit_hybrid_report(report, Path(args.out), args.format):
            print(p)
        return 0
    for rec in report.cycles:
        out = rec.modifiers_out
        print(
            f"cycle={rec.index} stops={rec.des_stats.stop_count} "
            f"rework={rec.des_stats.rework_count} "
            f"completed={rec.des_stats.completed_total} "
            f"rework_multiplier={_fmt(out.rework_multiplier)} "
            f"capacity_factor={_fmt(out.capacity_factor)} "
            f"interrupt_rate={_fmt(out.interrupt_rate)}"
        )
    print(f"converged={str(report.converged).lower()} cycles={report.n_cycles}")
    return 0


def _cmd_validate(args) -> int:
    scenario = _load(args.scenario)
    print(f"ok: {scenario.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="teamsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit arrival rates from a ticket CSV")
    p.add_argument("tickets", help="ticket CSV path")
    p.add_argument(
        "--service-time-source",
        choices=("touch", "elapsed"),
        default="touch",
        help="which column carries service time",
    )
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="directory for fit reports (default: print)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("synth", help="generate a synthetic ticket CSV")
    p.add_argument("spec", help="YAML spec of classes and rates")
    p.add_argument("out", help="output CSV path")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--span", type=float, default=None, help="override span in days")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("des", help="run the event-driven team model")
    p.add_argument("scenario", help="scenario YAML path, or 'default'")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="directory for reports (default: print summary)")
    p.set_defaults(func=_cmd_des)

    p = sub.add_parser("sd", help="run the stock-and-flow model")
    p.add_argument("scenario", help="scenario YAML path, or 'default'")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="directory for reports (default: print final state)")
    p.set_defaults(func=_cmd_sd)

    p = sub.add_parser("hybrid", help="run the coupled procedure")
    p.add_argument("scenario", help="scenario YAML path, or 'default'")
    p.add_argument("--cycles", type=int, default=None, help="max coupling cycles")
    p.add_argument("--tol", type=float, default=None, help="modifier convergence tolerance")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="directory for reports (default: print cycle table)")
    p.set_defaults(func=_cmd_hybrid)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario", help="scenario YAML path, or 'default'")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ConfigurationError, DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except (StructuralError, EngineError) as e:
        print(f"engine error: {e}", file=sys.stderr)
        return 3
    except TeamsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
