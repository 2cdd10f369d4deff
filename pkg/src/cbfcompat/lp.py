"""Dense two-phase simplex and the pointwise robustness program.

``solve_lp`` maximizes ``c @ z`` subject to ``M @ z <= q`` with ``z`` free.
Free variables are split as ``z = z+ - z-``, every row gets a slack, and
rows with a negative right-hand side get an artificial variable for phase 1.
Bland's rule (lowest-index entering column, lowest-index leaving basic
variable on ratio ties) rules out cycling, so the pivot sequence and hence
the returned basic optimum are fully deterministic.

``robustness`` is the max-min program: the largest ``t`` such that
``A u + b >= t`` holds row-wise for some admissible input ``u``.
"""

from __future__ import annotations

import enum
from types import SimpleNamespace
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LPStatus",
    "LPResult",
    "LPNumericalError",
    "RobustnessResult",
    "solve_lp",
    "robustness",
    "robustness_batch",
]

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-12
_ZERO_TOL = 1e-14


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPNumericalError(ArithmeticError):
    """Only pivots below the pivot tolerance remain, or the iteration budget ran out."""


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: float = float("nan")
    z: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


@dataclass(frozen=True)
class RobustnessResult:
    c: float
    u_star: np.ndarray | None
    status: LPStatus


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _simplex(T: np.ndarray, basis: list[int], allowed: np.ndarray, max_iter: int) -> LPStatus:
    """Maximize in place; the last row of ``T`` holds ``-reduced costs | value``."""
    ncol = T.shape[1] - 1
    for _ in range(max_iter):
        red = T[-1, :ncol]
        cand = np.nonzero((red < -OPT_TOL) & allowed)[0]
        if cand.size == 0:
            return LPStatus.OPTIMAL
        j = int(cand[0])
        col = T[:-1, j]
        usable = col > PIVOT_TOL
        if not usable.any():
            if np.any(col > _ZERO_TOL):
                raise LPNumericalError(f"column {j} has only pivots below {PIVOT_TOL}")
            return LPStatus.UNBOUNDED
        rows = np.nonzero(usable)[0]
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, j)
        basis[row] = j
    raise LPNumericalError(f"simplex did not finish within {max_iter} pivots")


def solve_lp(objective, M, q) -> LPResult:
    """Maximize ``objective @ z`` subject to ``M @ z <= q`` (``z`` unrestricted).

    Returns an :class:`LPResult` with status optimal, infeasible or unbounded;
    raises :class:`LPNumericalError` when pivoting breaks down.
    """
    c = np.asarray(objective, dtype=float).ravel()
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.asarray(q, dtype=float).ravel()
    R, d = M.shape
    if c.size != d or q.size != R:
        raise ValueError(f"shape mismatch: objective {c.size}, M {M.shape}, q {q.size}")
    if not np.isfinite(M.sum() + q.sum() + c.sum()):
        raise ValueError("LP data must be finite")

    neg = q < 0.0
    sign = np.where(neg, -1.0, 1.0)
    art_rows = np.nonzero(neg)[0]
    na = art_rows.size
    n_struct = 2 * d + R
    ncol = n_struct + na

    T = np.zeros((R + 1, ncol + 1))
    Ms = M * sign[:, None]
    T[:R, :d] = Ms
    T[:R, d : 2 * d] = -Ms
    T[np.arange(R), 2 * d + np.arange(R)] = sign
    T[art_rows, n_struct + np.arange(na)] = 1.0
    T[:R, -1] = q * sign
    basis = [2 * d + i for i in range(R)]
    for k, i in enumerate(art_rows):
        basis[i] = n_struct + k

    max_iter = 50 * (R + ncol + 1)
    is_art = np.zeros(ncol, dtype=bool)
    is_art[n_struct:] = True

    if na:
        # phase 1: maximize -(sum of artificials)
        T[-1, n_struct:ncol] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        _simplex(T, basis, np.ones(ncol, dtype=bool), max_iter)
        scale = 1.0 + np.abs(q).max()
        if T[-1, -1] < -FEAS_TOL * scale:
            return LPResult(LPStatus.INFEASIBLE)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(R + 1, dtype=bool)
        for i in range(R):
            if basis[i] >= n_struct:
                row = T[i, :n_struct]
                nz = np.flatnonzero(np.abs(row) > FEAS_TOL)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        if not keep.all():
            T = T[keep]
            basis = [b for b, k in zip(basis, keep[:R]) if k]

    T[-1] = 0.0
    T[-1, :d] = -c
    T[-1, d : 2 * d] = c
    for i, b in enumerate(basis):
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    status = _simplex(T, basis, ~is_art, max_iter)
    if status is LPStatus.UNBOUNDED:
        return LPResult(LPStatus.UNBOUNDED)

    x = np.zeros(ncol)
    for i, b in enumerate(basis):
        x[b] = T[i, -1]
    z = x[:d] - x[d : 2 * d]
    return LPResult(LPStatus.OPTIMAL, float(c @ z), z)


def robustness(A, b, input_set) -> RobustnessResult:
    """Solve ``max t`` s.t. ``A u + b >= t 1`` and ``u`` in the input polytope.

    ``input_set`` is anything with ``Cu``/``du`` attributes
    (:class:`cbfcompat.problem.Polytope`).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    N, m = A.shape
    Cu = np.asarray(input_set.Cu, dtype=float)
    du = np.asarray(input_set.du, dtype=float)
    if b.size != N or Cu.shape[1] != m:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.size}, Cu {Cu.shape}")
    M = np.zeros((N + Cu.shape[0], m + 1))
    M[:N, :m] = -A
    M[:N, m] = 1.0
    M[N:, :m] = Cu
    q = np.concatenate([b, du])
    objective = np.zeros(m + 1)
    objective[m] = 1.0
    res = solve_lp(objective, M, q)
    if res.status is LPStatus.INFEASIBLE:
        return RobustnessResult(float("nan"), None, LPStatus.INFEASIBLE)
    if res.status is LPStatus.UNBOUNDED:
        raise LPNumericalError("robustness program unbounded; the input set must be bounded")
    return RobustnessResult(float(res.z[m]), res.z[:m].copy(), LPStatus.OPTIMAL)


def robustness_batch(A: np.ndarray, b: np.ndarray, Cu: np.ndarray, du: np.ndarray):
    """Robustness for a stack of points: ``A`` is ``(K, N, m)``, ``b`` is ``(K, N)``.

    Returns ``(c, u_star)`` arrays of shape ``(K,)`` and ``(K, m)``.  Picklable
    top-level function so worker processes can run it on slices.
    """
    U = SimpleNamespace(Cu=Cu, du=du)
    K, _, m = A.shape
    c = np.empty(K)
    u = np.empty((K, m))
    for k in range(K):
        res = robustness(A[k], b[k], U)
        if res.status is not LPStatus.OPTIMAL:
            raise LPNumericalError("robustness program infeasible; the input set must be nonempty")
        c[k] = res.c
        u[k] = res.u_star
    return c, u
