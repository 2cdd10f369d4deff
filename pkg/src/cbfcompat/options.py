"""Options controlling the sample-and-refine check."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = ["LipschitzMode", "CheckOptions"]


@dataclass(frozen=True)
class LipschitzMode:
    """How Lipschitz constants of ``A(x)`` and ``b(x)`` are obtained.

    ``"user"`` trusts ``L_A``/``L_b`` as given; ``"auto"`` bounds them once
    over the whole checked domain; ``"per-cube"`` re-bounds them inside every
    cube of the worklist.
    """

    kind: str = "auto"
    L_A: float | None = None
    L_b: float | None = None

    def __post_init__(self):
        if self.kind not in ("user", "auto", "per-cube"):
            raise ValueError(f"unknown Lipschitz mode {self.kind!r}")
        if self.kind == "user":
            if self.L_A is None or self.L_b is None:
                raise ValueError("user Lipschitz mode needs both L_A and L_b")
            if self.L_A < 0 or self.L_b < 0:
                raise ValueError("Lipschitz constants must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "LipschitzMode":
        """Parse ``auto``, ``per-cube`` or ``user:LA,LB``."""
        text = text.strip()
        if text in ("auto", "per-cube"):
            return cls(text)
        if text.startswith("user:"):
            try:
                la, lb = (float(v) for v in text[5:].split(","))
            except ValueError:
                raise ValueError(f"expected user:LA,LB, got {text!r}") from None
            return cls("user", la, lb)
        raise ValueError(f"unknown Lipschitz mode {text!r}")

    def to_json(self):
        if self.kind == "user":
            return {"mode": "user", "L_A": self.L_A, "L_b": self.L_b}
        return {"mode": self.kind}


@dataclass(frozen=True)
class CheckOptions:
    r0: float = 0.25
    lam: float = 0.25
    r_min: float | None = None
    boundary_margin_a: float | None = None
    rho_capped_refinement: bool = False
    lipschitz: LipschitzMode = field(default_factory=LipschitzMode)
    max_iterations: int = 50
    thread_count: int = 1
    # tolerance of the branch-and-bound that finds the range box of the safe set
    range_tol: float = 1e-3
    # optional [[lo, hi], ...] replacing the computed range box
    bounding_box: tuple | None = None

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        if self.r_min is not None and not 0.0 < self.r_min < self.r0:
            raise ValueError("r_min must satisfy 0 < r_min < r0")
        if self.boundary_margin_a is not None and not self.boundary_margin_a > 0:
            raise ValueError("boundary margin must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.thread_count < 1:
            raise ValueError("thread_count must be at least 1")
        if not self.range_tol > 0:
            raise ValueError("range_tol must be positive")
        if self.bounding_box is not None:
            bb = np.asarray(self.bounding_box, dtype=float)
            if bb.ndim != 2 or bb.shape[1] != 2 or np.any(bb[:, 0] > bb[:, 1]):
                raise ValueError("bounding_box must be [[lo, hi], ...] with lo <= hi")
            object.__setattr__(self, "bounding_box", tuple((float(a), float(b)) for a, b in bb))

    def with_overrides(self, **changes) -> "CheckOptions":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def to_json(self, include_execution: bool = True) -> dict:
        out = {
            "r0": self.r0,
            "lambda": self.lam,
            "r_min": self.r_min,
            "boundary_margin_a": self.boundary_margin_a,
            "rho_capped_refinement": self.rho_capped_refinement,
            "lipschitz": self.lipschitz.to_json(),
            "max_iterations": self.max_iterations,
            "range_tol": self.range_tol,
            "bounding_box": [list(p) for p in self.bounding_box] if self.bounding_box else None,
        }
        if include_execution:
            out["thread_count"] = self.thread_count
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CheckOptions":
        data = dict(data)
        kwargs = {}
        if "lambda" in data:
            kwargs["lam"] = float(data.pop("lambda"))
        lip = data.pop("lipschitz", None)
        if lip is not None:
            if isinstance(lip, str):
                kwargs["lipschitz"] = LipschitzMode.parse(lip)
            else:
                kwargs["lipschitz"] = LipschitzMode(lip["mode"], lip.get("L_A"), lip.get("L_b"))
        for key, value in data.items():
            kwargs[key] = value
        return cls(**kwargs)
