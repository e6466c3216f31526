"""Shared builders for the test suite.

The queueing-theory checks need engine configurations that collapse to
textbook models: a single work class, identical overqualified engineers,
and every stochastic side effect (stops, rework, switch penalties,
interrupts) disabled.  With one engineer and exponential demand that is
an M/M/1 queue; with c engineers it is M/M/c.
"""
from __future__ import annotations

from teamsim.des import DesConfig, GeneratorConfig
from teamsim.domain import Affinity, Engineer, SkillSpec, WorkType

CORE = SkillSpec("core", 3)


def plain_engineers(n: int) -> list[Engineer]:
    """n identical level-3 engineers, so no item ever hits a skill gap."""
    return [Engineer(id=i, skill=CORE, affinity=Affinity.OPERATIONAL_PRIMARY) for i in range(n)]


def single_class_config(
    n_engineers: int = 1,
    daily_rate: float = 0.8,
    service_mean_hours: float = 8.0,
) -> DesConfig:
    gen = GeneratorConfig(
        work_type=WorkType.SERVICE_REQUEST,
        daily_rate=daily_rate,
        priority_mix=(0.0, 0.0, 1.0),
        service_mean_hours=(service_mean_hours,) * 3,
        skill_mix=((SkillSpec("core", 1), 1.0),),
    )
    return DesConfig(
        generators=[gen],
        engineers=plain_engineers(n_engineers),
        base_error_prob=0.0,
        p_stop_skill=0.0,
        switch_penalty_hours=0.0,
        interrupt_base_rate=0.0,
    )


def mm1_config(daily_rate: float = 0.8) -> DesConfig:
    """M/M/1 with service rate 1/day (8h mean at an 8h day)."""
    return single_class_config(n_engineers=1, daily_rate=daily_rate)


def mmc_config(c: int, daily_rate: float) -> DesConfig:
    return single_class_config(n_engineers=c, daily_rate=daily_rate)
