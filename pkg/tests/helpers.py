"""Random generators shared by the unit and acceptance tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from cbfcompat.expr import BinOp, Const, Func, Neg, Pow, Var
from cbfcompat.geometry import Box
from cbfcompat.options import CheckOptions, LipschitzMode
from cbfcompat.problem import Barrier, LinearGain, Polytope, ProblemSpec, enumerate_vertices

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"


def random_expr(rng: np.random.Generator, n: int, depth: int = 4):
    """Random expression whose value is finite on moderate boxes.

    Denominators are kept away from zero (``c + e^2`` with ``c >= 0.5``) and
    square roots take ``c + e^2`` too, so point and interval evaluation never
    leave their domains.
    """
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return Var(int(rng.integers(1, n + 1)))
        return Const(float(np.round(rng.uniform(-3, 3), 3)))
    kind = rng.choice(["add", "sub", "mul", "div", "neg", "pow", "sin", "cos", "exp", "sqrt"])
    sub = lambda: random_expr(rng, n, depth - 1)  # noqa: E731
    safe = lambda: BinOp("+", Const(float(np.round(rng.uniform(0.5, 2), 3))), Pow(sub(), 2))  # noqa: E731
    if kind in ("add", "sub", "mul"):
        return BinOp({"add": "+", "sub": "-", "mul": "*"}[kind], sub(), sub())
    if kind == "div":
        return BinOp("/", sub(), safe())
    if kind == "neg":
        return Neg(sub())
    if kind == "pow":
        return Pow(sub(), int(rng.integers(0, 4)))
    if kind == "exp":
        # keep the argument bounded so values stay moderate
        return Func("exp", Func("sin", sub()))
    if kind == "sqrt":
        return Func("sqrt", safe())
    return Func(str(kind), sub())


def random_box(rng: np.random.Generator, n: int, scale: float = 2.0) -> Box:
    a = rng.uniform(-scale, scale, n)
    b = rng.uniform(-scale, scale, n)
    return Box(np.minimum(a, b), np.maximum(a, b))


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.normal(size=(n, n))
    return M @ M.T + 0.5 * np.eye(n)


def quad_text(Q: np.ndarray) -> str:
    """``x^T Q x`` in the expression grammar."""
    n = len(Q)
    terms = []
    for i in range(n):
        for j in range(n):
            terms.append(f"{float(Q[i, j])!r}*x{i + 1}*x{j + 1}")
    return " + ".join(terms)


def linear_quadratic_spec(rng: np.random.Generator, n: int = 2, m: int = 2, N: int = 2, u_bound: float = 3.0):
    """Linear dynamics ``f = F x``, constant ``g = G`` and quadratic barriers.

    Returns ``(spec, F, G, Qs, cs)`` with ``h_i = c_i - x^T Q_i x``.  The
    exact Lipschitz constants in the infinity norm follow from
    ``A_i(x) = -2 x^T Q_i G`` and ``b_i(x) = -2 x^T Q_i F x + h_i(x)``.
    """
    from cbfcompat.expr import parse

    F = np.round(rng.normal(size=(n, n)), 3)
    G = np.round(rng.normal(size=(n, m)), 3)
    Qs, cs, barriers = [], [], []
    for _ in range(N):
        Q = np.round(random_spd(rng, n), 3)
        c = float(np.round(rng.uniform(0.5, 2.0), 3))
        Qs.append(Q)
        cs.append(c)
        h = parse(f"{c!r} - ({quad_text(Q)})", n)
        barriers.append(Barrier.build(h, n, LinearGain(1.0)))
    f = tuple(parse(" + ".join(f"{float(F[i, j])!r}*x{j + 1}" for j in range(n)), n) for i in range(n))
    g = tuple(tuple(Const(float(G[i, j])) for j in range(m)) for i in range(n))
    U = Polytope.box([[-u_bound, u_bound]] * m)
    spec = ProblemSpec(n, m, f, g, tuple(barriers), U, Box(np.full(n, -5.0), np.full(n, 5.0)), CheckOptions())
    return spec, F, G, Qs, cs


def exact_lipschitz(F, G, Qs, cs, box: Box):
    """Sound constants for the linear/quadratic family over ``box``.

    ``grad A_ij = -2 (Q G)_{:, j}`` is constant; ``grad b_i = -2 (Q F + F^T Q) x - 2 Q x``
    is linear, so its 1-norm is maximised at a box vertex.
    """
    n = F.shape[0]
    L_A = max(float(np.sum(np.abs(2.0 * Q @ G))) for Q in Qs)
    corners = np.array(np.meshgrid(*[[box.lo[k], box.hi[k]] for k in range(n)], indexing="ij")).reshape(n, -1)
    L_b = 0.0
    for Q in Qs:
        H = -2.0 * (Q @ F + F.T @ Q) - 2.0 * Q
        L_b = max(L_b, float(np.max(np.sum(np.abs(H @ corners), axis=0))))
    return L_A, L_b


def user_options(L_A, L_b, **kw) -> CheckOptions:
    return CheckOptions(lipschitz=LipschitzMode("user", L_A, L_b), **kw)


def rejection_sample(rng, constraints, box: Box, count: int, batch: int = 20000, max_rounds: int = 200):
    """``count`` uniform points of ``box`` satisfying every constraint ``h >= 0``."""
    from cbfcompat.expr import evaluate

    out = []
    total = 0
    for _ in range(max_rounds):
        pts = box.lo[:, None] + box.widths[:, None] * rng.random((box.n, batch))
        ok = np.ones(batch, dtype=bool)
        for h in constraints:
            ok &= evaluate(h, pts) >= 0
        out.append(pts[:, ok].T)
        total += int(ok.sum())
        if total >= count:
            break
    return np.concatenate(out)[:count]


def input_vertex_value(A, b, U):
    """Best ``min_i (A v + b)_i`` over the input vertices: only a lower bound on ``c``."""
    V = enumerate_vertices(U.Cu, U.du)
    return np.max(np.min(V @ A.T + b, axis=1))


def brute_force_robustness(A, b, U):
    """Vertex enumeration of the lifted polytope ``{(u, t) : t <= A u + b, u in U, t >= t_low}``."""
    N, m = A.shape
    t_low = input_vertex_value(A, b, U) - 1.0
    M = np.block([[-A, np.ones((N, 1))], [U.Cu, np.zeros((len(U.du), 1))], [np.zeros((1, m)), -np.ones((1, 1))]])
    q = np.concatenate([b, U.du, [-t_low]])
    return np.max(enumerate_vertices(M, q)[:, m])
