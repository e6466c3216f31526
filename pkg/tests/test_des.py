"""Event-driven engine tests.

The deterministic cases pin down single-event arithmetic (service rates,
capacity modifiers, switch penalties) through injected initial items; the
statistical cases check sampling distributions and queueing identities on
single seeds with generous bands.  The tight multi-seed tolerance checks
live in test_acceptance.py.
"""
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from teamsim.des import (
    DesConfig,
    DesModifiers,
    EventCalendar,
    GeneratorConfig,
    format_event,
    merge_stats,
    run_des,
    run_des_replicated,
    sample_exponential_hours,
    sample_interarrival,
)
from teamsim.domain import Affinity, Engineer, Priority, SkillSpec, WorkItem, WorkType
from teamsim.errors import ConfigurationError, StructuralError

from conftest import mm1_config, mmc_config, plain_engineers, single_class_config


def make_initial(item_id, demand_hours, priority=Priority.P3, skill=SkillSpec("core", 1)):
    return WorkItem(
        id=item_id,
        work_type=WorkType.SERVICE_REQUEST,
        priority=priority,
        required=skill,
        service_demand_hours=demand_hours,
        arrival_time=0.0,
    )


def quiet_config(**overrides) -> DesConfig:
    """One engineer, no generators: only injected items move."""
    cfg = single_class_config(n_engineers=1)
    cfg.generators = []
    for key, val in overrides.items():
        setattr(cfg, key, val)
    return cfg


def still_in_system(stats) -> int:
    return sum(stats.final_in_queue.values()) + sum(stats.final_in_service.values())


# ---------------------------------------------------------------- samplers


class TestSamplers:
    def test_interarrival_mean(self):
        rng = random.Random(7)
        n = 200_000
        mean = math.fsum(sample_interarrival(0.8, rng) for _ in range(n)) / n
        assert mean == pytest.approx(1.25, rel=0.02)

    def test_interarrival_positive(self):
        rng = random.Random(3)
        assert all(sample_interarrival(5.0, rng) > 0.0 for _ in range(10_000))

    def test_interarrival_rejects_nonpositive_rate(self):
        rng = random.Random(0)
        for rate in (0.0, -1.0):
            with pytest.raises(ConfigurationError):
                sample_interarrival(rate, rng)

    def test_exponential_hours_mean(self):
        rng = random.Random(11)
        n = 200_000
        mean = math.fsum(sample_exponential_hours(6.0, rng) for _ in range(n)) / n
        assert mean == pytest.approx(6.0, rel=0.02)

    def test_same_seed_same_stream(self):
        a = [sample_interarrival(1.0, random.Random(5)) for _ in range(1)]
        b = [sample_interarrival(1.0, random.Random(5)) for _ in range(1)]
        assert a == b


class TestGeneratorConfig:
    def test_priority_mix_must_sum_to_one(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig(
                work_type=WorkType.INCIDENT,
                daily_rate=1.0,
                priority_mix=(0.5, 0.4, 0.2),
                service_mean_hours=(1.0, 1.0, 1.0),
                skill_mix=((SkillSpec("core", 1), 1.0),),
            ).validate()

    def test_mean_must_be_positive_where_mix_is(self):
        gen = GeneratorConfig(
            work_type=WorkType.INCIDENT,
            daily_rate=1.0,
            priority_mix=(0.0, 0.0, 1.0),
            service_mean_hours=(0.0, 0.0, 2.0),
            skill_mix=((SkillSpec("core", 1), 1.0),),
        )
        gen.validate()  # zero mean allowed on an impossible priority
        gen2 = GeneratorConfig(
            work_type=WorkType.INCIDENT,
            daily_rate=1.0,
            priority_mix=(1.0, 0.0, 0.0),
            service_mean_hours=(0.0, 1.0, 1.0),
            skill_mix=((SkillSpec("core", 1), 1.0),),
        )
        with pytest.raises(ConfigurationError):
            gen2.validate()

    def test_sampled_mix_frequencies(self):
        gen = GeneratorConfig(
            work_type=WorkType.INCIDENT,
            daily_rate=1.0,
            priority_mix=(0.2, 0.3, 0.5),
            service_mean_hours=(1.0, 1.0, 1.0),
            skill_mix=((SkillSpec("core", 1), 0.7), (SkillSpec("core", 3), 0.3)),
        )
        rng = random.Random(2)
        items = [gen.sample_item(0.0, rng, i) for i in range(20_000)]
        frac_p1 = sum(1 for i in items if i.priority is Priority.P1) / len(items)
        frac_l3 = sum(1 for i in items if i.required.skill_level == 3) / len(items)
        assert frac_p1 == pytest.approx(0.2, abs=0.01)
        assert frac_l3 == pytest.approx(0.3, abs=0.01)


class TestCalendar:
    def test_time_ordering_with_fifo_ties(self):
        cal = EventCalendar()
        cal.push(2.0, 1, 0, 0)
        cal.push(1.0, 2, 0, 0)
        cal.push(1.0, 3, 0, 0)
        assert [cal.pop()[2] for _ in range(3)] == [2, 3, 1]

    def test_rejects_scheduling_in_the_past(self):
        cal = EventCalendar()
        cal.push(5.0, 1, 0, 0)
        cal.pop()
        with pytest.raises(StructuralError):
            cal.push(4.0, 1, 0, 0)


# ------------------------------------------------------- deterministic runs


class TestSingleItemArithmetic:
    def test_eight_hour_item_takes_one_day(self):
        stats, log = run_des(quiet_config(), seed=1, horizon=10.0, initial_items=[make_initial(0, 8.0)])
        assert stats.completed_total == 1
        kinds = [(rec[1], rec[0]) for rec in log]
        assert ("complete", 1.0) in kinds

    def test_capacity_modifier_halves_the_rate(self):
        mods = DesModifiers(capacity_factor=0.5)
        stats, log = run_des(
            quiet_config(), modifiers=mods, seed=1, horizon=10.0, initial_items=[make_initial(0, 8.0)]
        )
        complete = [rec for rec in log if rec[1] == "complete"]
        assert complete[0][0] == pytest.approx(2.0, abs=1e-12)

    def test_slow_engineer_capacity_factor(self):
        cfg = quiet_config()
        cfg.engineers = [Engineer(id=0, skill=SkillSpec("core", 3), affinity=Affinity.OPERATIONAL_PRIMARY, capacity_factor=0.8)]
        stats, log = run_des(cfg, seed=1, horizon=10.0, initial_items=[make_initial(0, 8.0)])
        complete = [rec for rec in log if rec[1] == "complete"][0]
        assert complete[0] == pytest.approx(1.25, abs=1e-12)

    def test_initial_items_admitted_at_time_zero(self):
        stats, log = run_des(quiet_config(), seed=1, horizon=5.0, initial_items=[make_initial(0, 4.0)])
        first = log[0]
        assert first[0] == 0.0 and first[1] == "arrival" and first[4] == "initial"

    def test_initial_item_with_late_arrival_rejected(self):
        bad = make_initial(0, 4.0)
        bad.arrival_time = 1.0
        with pytest.raises(ConfigurationError):
            run_des(quiet_config(), seed=1, horizon=5.0, initial_items=[bad])

    def test_two_items_serve_priority_first(self):
        items = [
            make_initial(0, 8.0, Priority.P3),
            make_initial(1, 8.0, Priority.P1),
        ]
        stats, log = run_des(quiet_config(), seed=1, horizon=10.0, initial_items=items)
        completions = [(rec[2], rec[0]) for rec in log if rec[1] == "complete"]
        assert completions == [(1, 1.0), (0, 2.0)]


class TestPreemption:
    def _preempt_config(self):
        # steady stream of short P1 items over one long-running P3 item
        cfg = single_class_config(n_engineers=1, daily_rate=0.5, service_mean_hours=1.0)
        cfg.generators[0].priority_mix = (1.0, 0.0, 0.0)
        cfg.generators[0].service_mean_hours = (1.0, 1.0, 1.0)
        return cfg

    def test_urgent_arrival_preempts_running_item(self):
        cfg = self._preempt_config()
        stats, log = run_des(cfg, seed=3, horizon=50.0, initial_items=[make_initial(999, 160.0)])
        assert stats.preemption_count >= 1
        preempts = [rec for rec in log if rec[1] == "stop" and rec[4] == "preempt"]
        assert preempts and all(rec[2] == 999 for rec in preempts)

    def test_switch_penalty_extends_the_long_item(self):
        base = self._preempt_config()
        base.switch_penalty_hours = 0.0
        penal = self._preempt_config()
        penal.switch_penalty_hours = 4.0
        # 40h of preemptible work, finishes well inside the horizon either way
        _, log0 = run_des(base, seed=3, horizon=400.0, initial_items=[make_initial(999, 40.0)])
        _, log1 = run_des(penal, seed=3, horizon=400.0, initial_items=[make_initial(999, 40.0)])

        def done_at(log):
            return next(rec[0] for rec in log if rec[1] == "complete" and rec[2] == 999)

        assert done_at(log1) > done_at(log0)

    def test_preempted_work_is_conserved(self):
        cfg = self._preempt_config()
        stats, _ = run_des(cfg, seed=5, horizon=200.0, initial_items=[make_initial(999, 80.0)])
        assert stats.arrived_total == (
            stats.completed_total + stats.dead_letter_count + still_in_system(stats)
        )


class TestSkillStops:
    def _gap_config(self, p_stop):
        cfg = single_class_config(n_engineers=1, daily_rate=0.4, service_mean_hours=4.0)
        # level-1 engineer facing level-3 demand
        cfg.engineers = [Engineer(id=0, skill=SkillSpec("core", 1), affinity=Affinity.OPERATIONAL_PRIMARY)]
        cfg.generators[0].skill_mix = ((SkillSpec("core", 3), 1.0),)
        cfg.p_stop_skill = p_stop
        return cfg

    def test_no_stop_probability_no_stops(self):
        stats, _ = run_des(self._gap_config(0.0), seed=2, horizon=500.0)
        assert stats.stop_skill == 0
        assert stats.completed_total == stats.arrived_total - still_in_system(stats)

    def test_half_stop_probability_one_stop_per_completion(self):
        # each service attempt stops with p; attempts per completion are
        # geometric, so stops/completions should sit near p/(1-p) = 1
        stats, _ = run_des(self._gap_config(0.5), seed=2, horizon=2000.0)
        assert stats.completed_total > 300
        ratio = stats.stop_skill / stats.completed_total
        assert 0.75 < ratio < 1.30
        assert stats.reassignment_count == stats.stop_skill

    def test_stops_requeue_not_lose(self):
        stats, _ = run_des(self._gap_config(0.7), seed=9, horizon=300.0)
        assert stats.arrived_total == (
            stats.completed_total + stats.dead_letter_count + still_in_system(stats)
        )


class TestRework:
    def test_rework_frequency_tracks_error_probability(self):
        cfg = single_class_config(n_engineers=2, daily_rate=1.0, service_mean_hours=4.0)
        cfg.base_error_prob = 0.5
        stats, log = run_des(cfg, seed=4, horizon=1000.0)
        # every completion draws the same 0.5 coin (no skill gaps here)
        assert stats.completed_total > 800
        ratio = stats.rework_count / stats.completed_total
        assert ratio == pytest.approx(0.5, abs=0.06)
        spawned = [rec for rec in log if rec[1] == "incident"]
        assert len(spawned) == stats.rework_count
        assert all(rec[4].startswith("from:") for rec in spawned)

    def test_rework_multiplier_scales_frequency(self):
        cfg = single_class_config(n_engineers=2, daily_rate=1.0, service_mean_hours=4.0)
        cfg.base_error_prob = 0.2
        mods = DesModifiers(rework_multiplier=2.0)
        base, _ = run_des(cfg, seed=4, horizon=800.0)
        boosted, _ = run_des(cfg, modifiers=mods, seed=4, horizon=800.0)
        r0 = base.rework_count / base.completed_total
        r1 = boosted.rework_count / boosted.completed_total
        assert r1 == pytest.approx(2.0 * r0, rel=0.25)

    def test_zero_error_probability_spawns_nothing(self):
        stats, _ = run_des(mm1_config(), seed=1, horizon=500.0)
        assert stats.rework_count == 0


class TestInterrupts:
    def test_interrupt_count_is_poisson_in_busy_time(self):
        # one engineer pinned busy for the whole horizon by a huge item:
        # interrupts should arrive at the modifier rate per busy day
        mods = DesModifiers(interrupt_rate=0.3)
        stats, log = run_des(
            quiet_config(),
            modifiers=mods,
            seed=6,
            horizon=100.0,
            initial_items=[make_initial(0, 8000.0)],
        )
        assert still_in_system(stats) == 1
        # mean 30, sd ~5.5; a 10..55 band is > 3 sigma on both sides
        assert 10 <= stats.stop_interrupt <= 55
        stops = [rec for rec in log if rec[1] == "stop"]
        assert all(rec[4] == "interrupt" for rec in stops)

    def test_zero_rate_schedules_no_interrupts(self):
        stats, _ = run_des(quiet_config(), seed=6, horizon=50.0, initial_items=[make_initial(0, 80.0)])
        assert stats.stop_interrupt == 0


# ----------------------------------------------------- whole-run properties


class TestRunProperties:
    def test_same_seed_reproduces_log_and_stats(self):
        cfg = mm1_config()
        s1, l1 = run_des(cfg, seed=42, horizon=200.0)
        s2, l2 = run_des(cfg, seed=42, horizon=200.0)
        assert [format_event(r) for r in l1] == [format_event(r) for r in l2]
        assert s1.to_flat_dict() == s2.to_flat_dict()

    def test_different_seeds_differ(self):
        cfg = mm1_config()
        _, l1 = run_des(cfg, seed=1, horizon=200.0)
        _, l2 = run_des(cfg, seed=2, horizon=200.0)
        assert [format_event(r) for r in l1] != [format_event(r) for r in l2]

    def test_identity_modifiers_change_nothing(self):
        cfg = mm1_config()
        _, l1 = run_des(cfg, seed=7, horizon=300.0)
        _, l2 = run_des(cfg, modifiers=DesModifiers.identity(), seed=7, horizon=300.0)
        assert [format_event(r) for r in l1] == [format_event(r) for r in l2]

    def test_zero_rate_generator_produces_nothing(self):
        cfg = single_class_config(daily_rate=0.0)
        stats, log = run_des(cfg, seed=1, horizon=100.0)
        assert stats.arrived_total == 0 and log == []

    def test_work_conservation_under_load(self):
        cfg = mmc_config(3, daily_rate=2.7)
        stats, _ = run_des(cfg, seed=8, horizon=400.0)
        assert stats.arrived_total == (
            stats.completed_total + stats.dead_letter_count + still_in_system(stats)
        )

    def test_littles_law_single_seed(self):
        stats, _ = run_des(mm1_config(), seed=12, horizon=5000.0)
        key = (WorkType.SERVICE_REQUEST, Priority.P3)
        lam = stats.completed_total / stats.horizon
        w = stats.mean_completion_days(key)
        assert stats.time_avg_in_system == pytest.approx(lam * w, rel=0.05)

    def test_log_is_time_ordered_and_causal(self):
        _, log = run_des(mm1_config(), seed=3, horizon=150.0)
        times = [rec[0] for rec in log]
        assert times == sorted(times)
        first_seen: dict[int, str] = {}
        for rec in log:
            first_seen.setdefault(rec[2], rec[1])
            if rec[1] == "complete":
                assert first_seen[rec[2]] in ("arrival", "incident")

    def test_unserveable_skill_dead_letters(self):
        cfg = single_class_config(daily_rate=1.0)
        cfg.generators[0].skill_mix = ((SkillSpec("net", 1), 1.0),)
        stats, log = run_des(cfg, seed=2, horizon=50.0)
        assert stats.dead_letter_count == stats.arrived_total > 0
        assert all(rec[4] == "net" for rec in log if rec[1] == "dead_letter")

    def test_declared_catalog_rejects_unknown_type(self):
        cfg = single_class_config(daily_rate=1.0)
        cfg.skill_types = ("core",)
        cfg.generators[0].skill_mix = ((SkillSpec("net", 1), 1.0),)
        with pytest.raises(ConfigurationError):
            run_des(cfg, seed=2, horizon=50.0)

    def test_daily_queue_series_lengths(self):
        stats, _ = run_des(mm1_config(), seed=5, horizon=126.0)
        assert stats.n_days == 126
        assert len(stats.daily_team_queue) == 126
        assert len(stats.daily_queue_by_priority[Priority.P3]) == 126


class TestMergeAndReplication:
    def test_merge_is_commutative(self):
        cfg = mm1_config()
        a, _ = run_des(cfg, seed=1, horizon=300.0, collect_log=False)
        b, _ = run_des(cfg, seed=2, horizon=300.0, collect_log=False)
        ab = merge_stats(a, b).to_flat_dict()
        ba = merge_stats(b, a).to_flat_dict()
        assert ab == ba

    def test_replicated_run_matches_manual_merge(self):
        cfg = mm1_config()
        merged, _ = run_des_replicated(cfg, seed=10, horizon=200.0, replications=3)
        parts = [run_des(cfg, seed=10 + i, horizon=200.0, collect_log=False)[0] for i in range(3)]
        manual = merge_stats(merge_stats(parts[0], parts[1]), parts[2])
        assert merged.to_flat_dict() == manual.to_flat_dict()
        assert merged.replications == 3


# hypothesis: arbitrary small workloads never break conservation or ordering
@settings(max_examples=25, deadline=None)
@given(
    rate=st.floats(min_value=0.05, max_value=3.0),
    n_eng=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=10_000),
    p1_weight=st.floats(min_value=0.0, max_value=1.0),
)
def test_engine_invariants_hold_for_random_workloads(rate, n_eng, seed, p1_weight):
    cfg = single_class_config(n_engineers=n_eng, daily_rate=rate, service_mean_hours=5.0)
    cfg.generators[0].priority_mix = (p1_weight, 0.0, 1.0 - p1_weight)
    cfg.base_error_prob = 0.1
    stats, log = run_des(cfg, seed=seed, horizon=60.0)
    assert stats.arrived_total == (
        stats.completed_total + stats.dead_letter_count + still_in_system(stats)
    )
    times = [rec[0] for rec in log]
    assert times == sorted(times)
    assert stats.completed_total >= 0
