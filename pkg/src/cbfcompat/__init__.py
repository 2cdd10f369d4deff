"""Offline verification that several control barrier functions can be satisfied together.

Typical use::

    from cbfcompat import load_problem, check
    verdict = check(load_problem("problems/example2.json"))
    verdict.status          # "compatible", "incompatible" or "inconclusive"
"""

from .checker import NonTerminationError, Verdict, check, oracle_scan
from .expr import evaluate, parse
from .lp import robustness
from .options import CheckOptions, LipschitzMode
from .problem import ProblemError, ProblemSpec, assemble, load_problem, problem_from_dict
from .report import Report

__all__ = [
    "CheckOptions",
    "LipschitzMode",
    "NonTerminationError",
    "ProblemError",
    "ProblemSpec",
    "Report",
    "Verdict",
    "assemble",
    "check",
    "evaluate",
    "load_problem",
    "oracle_scan",
    "parse",
    "problem_from_dict",
    "robustness",
]
