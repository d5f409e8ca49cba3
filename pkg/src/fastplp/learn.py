"""Learner entry points that start from a ground program and raw records."""

from __future__ import annotations

import time

import numpy as np

from .data import InterpretationSet, drop_inconsistent, sufficient_stats
from .em import EMTrace, fit_em
from .grounding import GroundProgram, head_groups
from .mle import FitResult, fit_direct

POLICIES = ("error", "drop")


def _prepare(gp: GroundProgram, data: InterpretationSet, on_inconsistent: str):
    if on_inconsistent not in POLICIES:
        raise ValueError(f"on_inconsistent must be one of {POLICIES}")
    if on_inconsistent == "drop":
        return drop_inconsistent(data, head_groups(gp), gp)
    return data, 0


def _init(gp: GroundProgram, init):
    return np.asarray(gp.program.init_theta() if init is None else init, dtype=float)


def learn_direct(gp: GroundProgram, data: InterpretationSet, init=None, on_inconsistent: str = "error") -> FitResult:
    """Count sufficient statistics and fit them; ``wall_time`` covers both."""
    data, dropped = _prepare(gp, data, on_inconsistent)
    start = time.perf_counter()
    stats = sufficient_stats(data.compress(), head_groups(gp), gp)
    result = fit_direct(stats, gp.program, _init(gp, init))
    result.wall_time = time.perf_counter() - start
    result.dropped_records = dropped
    return result


def learn_em(gp: GroundProgram, data: InterpretationSet, init=None, on_inconsistent: str = "error", **kwargs) -> EMTrace:
    data, dropped = _prepare(gp, data, on_inconsistent)
    trace = fit_em(gp, data, _init(gp, init), **kwargs)
    trace.result.dropped_records = dropped
    return trace
