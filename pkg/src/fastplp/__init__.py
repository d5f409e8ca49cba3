"""Fast parameter learning for acyclic probabilistic logic programs with complete data."""

from .data import (
    InconsistentDataError,
    InterpretationSet,
    SufficientStats,
    drop_inconsistent,
    forward_sample,
    parse_interpretations,
    sufficient_stats,
)
from .grounding import CycleError, GroundProgram, HeadGroup, ground, head_groups
from .mle import FitResult, Method, closed_form, fit_direct, gradient, gradient_fit, log_likelihood
from .program import Atom, Clause, Program, parse_program

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Clause",
    "CycleError",
    "FitResult",
    "GroundProgram",
    "HeadGroup",
    "InconsistentDataError",
    "InterpretationSet",
    "Method",
    "Program",
    "SufficientStats",
    "closed_form",
    "drop_inconsistent",
    "fit_direct",
    "forward_sample",
    "gradient",
    "gradient_fit",
    "ground",
    "head_groups",
    "log_likelihood",
    "parse_interpretations",
    "parse_program",
    "sufficient_stats",
]
