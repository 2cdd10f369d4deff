"""Lipschitz bounds for ``A(x)`` and ``b(x)`` in the infinity norm.

For a scalar entry ``phi`` the mean-value theorem with the Hölder pairing of
the 1- and infinity-norms gives

    |phi(x) - phi(x')| <= sup_box ||grad phi||_1 * ||x - x'||_inf

and the supremum is over-approximated by summing interval magnitude bounds
of each partial derivative.  Row-wise this yields

    L_A = max_i sum_j sup ||grad A_ij||_1        (induced inf-norm)
    L_b = max_i sup ||grad b_i||_1
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .expr import gradient, to_string
from .geometry import Box
from .interval import IntervalDomainError, eval_interval

__all__ = [
    "LipschitzBounds",
    "LipschitzError",
    "bound_lipschitz",
    "bound_lipschitz_batch",
    "certified_radius",
    "certified_radii",
    "eta_prime",
]


class LipschitzError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LipschitzBounds:
    L_A: float
    L_b: float
    mode: str  # "user", "auto" or "per-cube"
    box: Box | None = None

    def to_json(self):
        return {"L_A": self.L_A, "L_b": self.L_b, "mode": self.mode, "validated": self.mode != "user"}


@lru_cache(maxsize=16)
def _entry_gradients(spec):
    dA = [[gradient(a, spec.n) for a in row] for row in spec.A_exprs]
    db = [gradient(b, spec.n) for b in spec.b_exprs]
    return dA, db


def _grad_l1(grad, lo, hi, what: str):
    total = 0.0
    for k, d in enumerate(grad):
        try:
            total = total + eval_interval(d, lo, hi).magnitude()
        except IntervalDomainError as exc:
            raise LipschitzError(f"cannot bound d/dx{k + 1} of {what}: {exc}") from None
    return total


def bound_lipschitz_batch(spec, lo, hi):
    """Interval Lipschitz bounds over each box of a batch ``lo``/``hi`` of shape ``(n, K)``.

    Returns arrays ``(L_A, L_b)`` of shape ``(K,)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    shape = lo.shape[1:]
    dA, db = _entry_gradients(spec)
    L_A = np.zeros(shape)
    L_b = np.zeros(shape)
    for i in range(spec.N):
        row = np.zeros(shape)
        for j in range(spec.m):
            row = row + _grad_l1(dA[i][j], lo, hi, f"A[{i + 1}][{j + 1}] = {to_string(spec.A_exprs[i][j])}")
        L_A = np.maximum(L_A, row)
        L_b = np.maximum(L_b, _grad_l1(db[i], lo, hi, f"b[{i + 1}] = {to_string(spec.b_exprs[i])}"))
    return L_A, L_b


def bound_lipschitz(spec, box: Box, mode: str = "auto", L_A: float | None = None, L_b: float | None = None) -> LipschitzBounds:
    """Lipschitz constants of ``A`` and ``b`` valid on ``box``.

    In ``"user"`` mode the supplied constants are returned unchecked.
    """
    if mode == "user":
        if L_A is None or L_b is None:
            raise ValueError("user mode needs L_A and L_b")
        return LipschitzBounds(float(L_A), float(L_b), "user", box)
    if mode not in ("auto", "per-cube"):
        raise ValueError(f"unknown mode {mode!r}")
    la, lb = bound_lipschitz_batch(spec, box.lo, box.hi)
    return LipschitzBounds(float(la), float(lb), mode, box)


def certified_radius(c: float, u_star_infnorm: float, L: LipschitzBounds) -> float:
    """Size of the cube around ``x`` on which compatibility is guaranteed.

    ``2 c / (L_A ||u*||_inf + L_b)``; infinite when both constants vanish.
    """
    if c < 0:
        raise ValueError("certified radius needs c >= 0")
    denom = L.L_A * u_star_infnorm + L.L_b
    if denom == 0.0:
        return float("inf")
    return 2.0 * c / denom


def certified_radii(c, u_star_infnorm, L_A, L_b) -> np.ndarray:
    """Vectorized :func:`certified_radius`; entries with ``c < 0`` come back as NaN."""
    c = np.asarray(c, dtype=float)
    denom = np.asarray(L_A, dtype=float) * np.asarray(u_star_infnorm, dtype=float) + np.asarray(L_b, dtype=float)
    denom = np.broadcast_to(denom, c.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(denom == 0.0, np.inf, 2.0 * c / np.where(denom == 0.0, 1.0, denom))
    return np.where(c < 0, np.nan, rho)


def eta_prime(r_lower: float, lam: float, L: LipschitzBounds, u_max_infnorm: float) -> float:
    """Robustness level that cannot be exceeded once the lattice size falls to ``r_lower``."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    if not r_lower > 0:
        raise ValueError("r_lower must be positive")
    return r_lower * (L.L_A * u_max_infnorm + L.L_b) / (2.0 * lam)
