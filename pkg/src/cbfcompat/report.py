"""Machine-readable run report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import metadata

from .checker import Verdict
from .options import CheckOptions
from .problem import ProblemSpec

__all__ = ["Report", "tool_version"]

TOOL_NAME = "cbf-compat"


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _box(box):
    return None if box is None else [list(p) for p in box.to_pairs()]


@dataclass
class Report:
    verdict: dict
    problem: dict
    iterations: list
    options: dict
    domain: dict
    tool: dict = field(default_factory=lambda: {"name": TOOL_NAME, "version": tool_version()})
    timing: dict | None = None

    @classmethod
    def build(cls, spec: ProblemSpec, options: CheckOptions, verdict: Verdict, include_timing: bool = True) -> "Report":
        """Collect everything worth keeping from a run.

        ``thread_count`` is left out so that reports do not depend on how the
        work was scheduled; ``include_timing=False`` drops the wall time too,
        which makes the report a pure function of problem and options.
        """
        lip = verdict.lipschitz.to_json() if verdict.lipschitz else None
        if lip is not None:
            lip["box"] = _box(verdict.lipschitz.box)
        n_initial = verdict.iterations[0].cubes_total if verdict.iterations else 0
        return cls(
            verdict=verdict.verdict_json(),
            problem={
                "name": spec.name,
                "state_dim": spec.n,
                "input_dim": spec.m,
                "barriers": spec.N,
                "lipschitz": lip,
            },
            iterations=[s.to_json() for s in verdict.iterations],
            options=options.to_json(include_execution=False),
            domain={
                "range_box": _box(verdict.range_box),
                "bounding_box": _box(verdict.bounding_box),
                "initial_cubes": n_initial,
                # the checked domain is the union of the initial cubes; the
                # interval intersection test may keep a few cubes that miss the safe set
                "note": "checked domain is the union of the initial cubes, possibly slightly larger than the minimal cover",
            },
            timing={"wall_time_s": verdict.wall_time} if include_timing else None,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["timing"] is None:
            del out["timing"]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(
            verdict=data["verdict"],
            problem=data["problem"],
            iterations=data["iterations"],
            options=data["options"],
            domain=data["domain"],
            tool=data["tool"],
            timing=data.get("timing"),
        )

    @classmethod
    def loads(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    @property
    def status(self) -> str:
        return self.verdict["status"]

    @property
    def total_cubes(self) -> int:
        return sum(it["cubes_total"] for it in self.iterations)
