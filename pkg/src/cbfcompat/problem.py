"""Problem description: dynamics, barriers, gains, input polytope.

A problem is the control-affine system ``dx/dt = f(x) + g(x) u`` with
``u`` in a bounded polytope, plus barriers ``h_i`` with class-K gains
``alpha_i``.  For a state ``x`` the CBF conditions read
``A(x) u + b(x) >= 0`` with

    A[i, :] = grad h_i(x) @ g(x)
    b[i]    = grad h_i(x) @ f(x) + alpha_i(h_i(x))

Problem files are JSON documents; see ``PROBLEM_SCHEMA`` and the README.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import jsonschema
import numpy as np

from .expr import Const, EvaluationError, Expr, add, evaluate, gradient, mul, parse, substitute, to_string, variables
from .geometry import Box
from .interval import IntervalDomainError, eval_interval
from .lp import LPStatus, solve_lp
from .options import CheckOptions

__all__ = [
    "ProblemError",
    "LinearGain",
    "CustomGain",
    "Barrier",
    "Polytope",
    "ProblemSpec",
    "enumerate_vertices",
    "assemble",
    "max_input_infnorm",
    "load_problem",
    "problem_from_dict",
    "PROBLEM_SCHEMA",
]


class ProblemError(ValueError):
    """The problem description is malformed or violates a standing assumption."""


# --------------------------------------------------------------------------- #
# Class-K gains
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class LinearGain:
    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ProblemError(f"linear class-K gain needs k > 0, got {self.k}")

    def compose(self, h: Expr) -> Expr:
        return mul(Const(float(self.k)), h)

    def __call__(self, v):
        return self.k * np.asarray(v, dtype=float)

    def to_json(self):
        return {"linear": self.k}


@dataclass(frozen=True)
class CustomGain:
    """``alpha(v)`` written in the expression grammar with ``v`` as its variable."""

    text: str
    expr: Expr = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if self.expr is None:
            object.__setattr__(self, "expr", parse(self.text, 1, names={"v": 1}))

    def compose(self, h: Expr) -> Expr:
        return substitute(self.expr, {1: h})

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return evaluate(self.expr, v[None, ...]) if v.ndim else evaluate(self.expr, [float(v)])

    def validate(self, v_lo: float, v_hi: float, samples: int = 1000) -> None:
        """Check alpha(0) = 0 and strict increase on ``samples`` points of ``[v_lo, v_hi]``."""
        a0 = self(0.0)
        if abs(a0) > 1e-12:
            raise ProblemError(f"class-K gain {self.text!r} has alpha(0) = {a0}, expected 0")
        grid = np.linspace(min(v_lo, 0.0), max(v_hi, 0.0), samples)
        values = evaluate(self.expr, grid[None, :])
        if not np.all(np.diff(values) > 0):
            raise ProblemError(f"class-K gain {self.text!r} is not strictly increasing on [{grid[0]}, {grid[-1]}]")

    def to_json(self):
        return {"expr": self.text}


ClassK = Union[LinearGain, CustomGain]


@dataclass(frozen=True)
class Barrier:
    h: Expr
    grad_h: tuple
    alpha: ClassK

    @classmethod
    def build(cls, h: Expr, n: int, alpha: ClassK) -> "Barrier":
        return cls(h, tuple(gradient(h, n)), alpha)


# --------------------------------------------------------------------------- #
# Input polytope
# --------------------------------------------------------------------------- #


def enumerate_vertices(Cu, du, tol: float = 1e-9) -> np.ndarray:
    """Vertices of ``{u : Cu u <= du}`` by intersecting every m-subset of facets.

    Brute force, intended for small ``m``; returns an array ``(V, m)`` sorted
    lexicographically.
    """
    Cu = np.asarray(Cu, dtype=float)
    du = np.asarray(du, dtype=float)
    p, m = Cu.shape
    found = []
    for rows in itertools.combinations(range(p), m):
        sub = Cu[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        v = np.linalg.solve(sub, du[list(rows)])
        if np.all(Cu @ v <= du + tol * (1.0 + np.abs(du))):
            found.append(v)
    if not found:
        return np.empty((0, m))
    pts = np.array(found)
    pts = pts[np.lexsort(pts.T[::-1])]
    unique = [pts[0]]
    for v in pts[1:]:
        if np.max(np.abs(v - unique[-1])) > 1e-9 and all(np.max(np.abs(v - w)) > 1e-9 for w in unique):
            unique.append(v)
    return np.array(unique)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded, nonempty ``{u : Cu u <= du}`` with cached coordinate bounds."""

    Cu: np.ndarray
    du: np.ndarray
    lower: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Cu = np.atleast_2d(np.asarray(self.Cu, dtype=float))
        du = np.asarray(self.du, dtype=float).ravel()
        if Cu.shape[0] != du.size:
            raise ProblemError(f"Cu has {Cu.shape[0]} rows but du has {du.size} entries")
        object.__setattr__(self, "Cu", Cu)
        object.__setattr__(self, "du", du)
        m = Cu.shape[1]
        lower = np.empty(m)
        upper = np.empty(m)
        for j in range(m):
            for sign, out in ((1.0, upper), (-1.0, lower)):
                obj = np.zeros(m)
                obj[j] = sign
                res = solve_lp(obj, Cu, du)
                if res.status is LPStatus.INFEASIBLE:
                    raise ProblemError("input set is empty")
                if res.status is LPStatus.UNBOUNDED:
                    raise ProblemError(f"input set is unbounded along u{j + 1}")
                out[j] = sign * res.value
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, bounds) -> "Polytope":
        bounds = np.asarray(bounds, dtype=float)
        m = bounds.shape[0]
        Cu = np.vstack([np.eye(m), -np.eye(m)])
        du = np.concatenate([bounds[:, 1], -bounds[:, 0]])
        return cls(Cu, du)

    @property
    def m(self) -> int:
        return self.Cu.shape[1]

    @cached_property
    def vertices(self) -> np.ndarray | None:
        if self.m > 6:
            return None
        return enumerate_vertices(self.Cu, self.du)

    def contains(self, u, tol: float = 1e-9) -> bool:
        return bool(np.all(self.Cu @ np.asarray(u, dtype=float) <= self.du + tol))

    def to_json(self):
        return {"Cu": self.Cu.tolist(), "du": self.du.tolist()}


def max_input_infnorm(input_set: Polytope) -> float:
    """``max ||u||_inf`` over the polytope, from its cached coordinate bounds."""
    return float(max(np.max(np.abs(input_set.lower)), np.max(np.abs(input_set.upper))))


# --------------------------------------------------------------------------- #
# Problem
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    n: int
    m: int
    f: tuple
    g: tuple  # n rows of m expressions
    barriers: tuple
    input_set: Polytope
    domain_search_box: Box
    options: CheckOptions = field(default_factory=CheckOptions)
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ProblemError("state and input dimensions must be at least 1")
        if len(self.f) != self.n:
            raise ProblemError(f"f has {len(self.f)} entries, expected {self.n}")
        if len(self.g) != self.n or any(len(row) != self.m for row in self.g):
            raise ProblemError(f"g must be {self.n} x {self.m}")
        if not self.barriers:
            raise ProblemError("at least one barrier is required")
        if self.input_set.m != self.m:
            raise ProblemError(f"input set has dimension {self.input_set.m}, expected {self.m}")
        if self.domain_search_box.n != self.n:
            raise ProblemError("domain_search_box dimension does not match state_dim")
        exprs = list(self.f) + [e for row in self.g for e in row] + [b.h for b in self.barriers]
        for e in exprs:
            bad = [j for j in variables(e) if not 1 <= j <= self.n]
            if bad:
                raise ProblemError(f"expression {to_string(e)!r} references x{bad[0]} outside 1..{self.n}")

    @property
    def N(self) -> int:
        return len(self.barriers)

    @property
    def constraints(self) -> tuple:
        return tuple(b.h for b in self.barriers)

    @cached_property
    def A_exprs(self) -> tuple:
        """Symbolic entries ``A[i][j] = sum_k dh_i/dx_k g[k][j]``."""
        return tuple(
            tuple(_dot([bar.grad_h[k] for k in range(self.n)], [self.g[k][j] for k in range(self.n)]) for j in range(self.m))
            for bar in self.barriers
        )

    @cached_property
    def b_exprs(self) -> tuple:
        """Symbolic entries ``b[i] = sum_k dh_i/dx_k f[k] + alpha_i(h_i)``."""
        return tuple(add(_dot(list(bar.grad_h), list(self.f)), bar.alpha.compose(bar.h)) for bar in self.barriers)

    def with_options(self, options: CheckOptions) -> "ProblemSpec":
        return ProblemSpec(self.n, self.m, self.f, self.g, self.barriers, self.input_set, self.domain_search_box, options, self.name)


def _dot(a: list, b: list) -> Expr:
    out: Expr = Const(0.0)
    for x, y in zip(a, b):
        out = add(out, mul(x, y))
    return out


def assemble(spec: ProblemSpec, x):
    """Evaluate ``A(x)`` and ``b(x)``.

    For ``x`` of shape ``(n,)`` returns ``(N, m)`` and ``(N,)`` arrays; for a
    batch of shape ``(n, K)`` returns ``(K, N, m)`` and ``(K, N)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.n:
        raise ValueError(f"state has dimension {x.shape[0]}, expected {spec.n}")
    single = x.ndim == 1
    X = x[:, None] if single else x
    K = X.shape[1]

    def ev(e, what):
        try:
            return evaluate(e, X)
        except EvaluationError as exc:
            raise EvaluationError(f"{what}: {exc}") from None

    f = np.stack([ev(e, f"f[{k + 1}]") for k, e in enumerate(spec.f)])  # (n, K)
    g = np.stack([np.stack([ev(e, f"g[{k + 1}][{j + 1}]") for j, e in enumerate(row)]) for k, row in enumerate(spec.g)])  # (n, m, K)
    A = np.empty((K, spec.N, spec.m))
    b = np.empty((K, spec.N))
    for i, bar in enumerate(spec.barriers):
        grad = np.stack([ev(e, f"barrier {i + 1} gradient") for e in bar.grad_h])  # (n, K)
        h = ev(bar.h, f"barrier {i + 1}")
        try:
            alpha = bar.alpha(h)
        except EvaluationError as exc:
            raise EvaluationError(f"barrier {i + 1} class-K gain: {exc}") from None
        A[:, i, :] = np.einsum("kK,kjK->Kj", grad, g)
        b[:, i] = np.einsum("kK,kK->K", grad, f) + alpha
    if single:
        return A[0], b[0]
    return A, b


def barrier_values(spec: ProblemSpec, x) -> np.ndarray:
    return np.array([evaluate(bar.h, x) for bar in spec.barriers])


# --------------------------------------------------------------------------- #
# Loading
# --------------------------------------------------------------------------- #

_EXPR = {"type": ["string", "number"]}
_PAIRS = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}, "minItems": 1}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cbfcompat problem",
    "type": "object",
    "additionalProperties": False,
    "required": ["state_dim", "input_dim", "f", "g", "barriers", "input_set", "domain_search_box"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "state_dim": {"type": "integer", "minimum": 1},
        "input_dim": {"type": "integer", "minimum": 1},
        "f": {"type": "array", "items": _EXPR},
        "g": {"type": "array", "items": {"type": "array", "items": _EXPR}},
        "barriers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["h"],
                "properties": {
                    "h": {"type": "string"},
                    "alpha": {
                        "oneOf": [
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["linear"],
                                "properties": {"linear": {"type": "number", "exclusiveMinimum": 0}},
                            },
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["expr"],
                                "properties": {"expr": {"type": "string"}},
                            },
                        ]
                    },
                },
            },
        },
        "input_set": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["box"], "properties": {"box": _PAIRS}},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["Cu", "du"],
                    "properties": {
                        "Cu": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 1},
                        "du": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    },
                },
            ]
        },
        "domain_search_box": _PAIRS,
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r0": {"type": "number", "exclusiveMinimum": 0},
                "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "r_min": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "boundary_margin_a": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "rho_capped_refinement": {"type": "boolean"},
                "lipschitz": {
                    "oneOf": [
                        {"type": "string", "pattern": "^(auto|per-cube|user:[^,]+,[^,]+)$"},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["mode"],
                            "properties": {
                                "mode": {"enum": ["user", "auto", "per-cube"]},
                                "L_A": {"type": "number", "minimum": 0},
                                "L_b": {"type": "number", "minimum": 0},
                            },
                        },
                    ]
                },
                "max_iterations": {"type": "integer", "minimum": 1},
                "thread_count": {"type": "integer", "minimum": 1},
                "range_tol": {"type": "number", "exclusiveMinimum": 0},
                "bounding_box": {"oneOf": [_PAIRS, {"type": "null"}]},
            },
        },
    },
}


def _expr(value, n: int, where: str) -> Expr:
    if isinstance(value, (int, float)):
        return Const(float(value))
    try:
        return parse(value, n)
    except ValueError as exc:
        raise ProblemError(f"{where}: {exc}") from None


def problem_from_dict(data: dict, name: str = "") -> ProblemSpec:
    """Validate a problem document against ``PROBLEM_SCHEMA`` and build the spec."""
    try:
        jsonschema.validate(data, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemError(f"invalid problem file at {path}: {exc.message}") from None

    n = data["state_dim"]
    m = data["input_dim"]
    if len(data["f"]) != n:
        raise ProblemError(f"f has {len(data['f'])} entries, expected state_dim = {n}")
    if len(data["g"]) != n or any(len(row) != m for row in data["g"]):
        raise ProblemError(f"g must be a {n} x {m} array")
    f = tuple(_expr(v, n, f"f[{k + 1}]") for k, v in enumerate(data["f"]))
    g = tuple(tuple(_expr(v, n, f"g[{k + 1}][{j + 1}]") for j, v in enumerate(row)) for k, row in enumerate(data["g"]))

    search = data["domain_search_box"]
    if len(search) != n:
        raise ProblemError(f"domain_search_box has {len(search)} rows, expected {n}")
    try:
        search_box = Box.from_pairs(search)
    except ValueError as exc:
        raise ProblemError(f"domain_search_box: {exc}") from None

    barriers = []
    for i, item in enumerate(data["barriers"]):
        h = _expr(item["h"], n, f"barriers[{i + 1}].h")
        alpha_spec = item.get("alpha", {"linear": 1.0})
        if "linear" in alpha_spec:
            alpha = LinearGain(float(alpha_spec["linear"]))
        else:
            try:
                alpha = CustomGain(alpha_spec["expr"])
            except ValueError as exc:
                raise ProblemError(f"barriers[{i + 1}].alpha: {exc}") from None
            try:
                rng = eval_interval(h, search_box)
                v_lo, v_hi = float(rng.lo), float(rng.hi)
            except IntervalDomainError:
                pts = search_box.lo[:, None] + search_box.widths[:, None] * np.random.default_rng(0).random((n, 1000))
                hv = evaluate(h, pts)
                v_lo, v_hi = float(hv.min()), float(hv.max())
            alpha.validate(v_lo, v_hi)
        barriers.append(Barrier.build(h, n, alpha))

    iset = data["input_set"]
    if "box" in iset:
        if len(iset["box"]) != m:
            raise ProblemError(f"input box has {len(iset['box'])} rows, expected input_dim = {m}")
        input_set = Polytope.box(iset["box"])
    else:
        Cu = np.asarray(iset["Cu"], dtype=float)
        if Cu.ndim != 2 or Cu.shape[1] != m:
            raise ProblemError(f"Cu must have input_dim = {m} columns")
        input_set = Polytope(Cu, iset["du"])

    try:
        options = CheckOptions.from_json(data.get("options", {}))
    except (ValueError, TypeError) as exc:
        raise ProblemError(f"options: {exc}") from None
    if options.bounding_box is not None and len(options.bounding_box) != n:
        raise ProblemError("options.bounding_box dimension does not match state_dim")

    return ProblemSpec(n, m, f, g, tuple(barriers), input_set, search_box, options, data.get("name", name))


def load_problem(path) -> ProblemSpec:
    """Read and validate a JSON problem file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: not valid JSON ({exc})") from None
    return problem_from_dict(data, name=path.stem)
