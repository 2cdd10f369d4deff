"""Naive interval arithmetic over expressions.

Each node is bounded independently (no dependency tracking between repeated
occurrences of a variable), except integer powers which use the tight power
rule.  Every rounded endpoint is pushed one ulp outward with
``np.nextafter`` so enclosures hold for the exact real value as well as for
the floating-point value :func:`cbfcompat.expr.evaluate` returns.

Endpoints may be scalars or numpy arrays of a common shape; a batch of K
boxes is passed as ``lo`` and ``hi`` arrays of shape ``(n, K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import BinOp, Const, EvaluationError, Expr, Func, Neg, Pow, Var, to_string

__all__ = ["Interval", "IntervalDomainError", "eval_interval"]

_TWO_PI = 2.0 * math.pi


class IntervalDomainError(EvaluationError):
    """A division interval contains zero or a sqrt interval dips below zero."""


def _down(a):
    return np.nextafter(a, -np.inf)


def _up(a):
    return np.nextafter(a, np.inf)


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object

    @classmethod
    def point(cls, v) -> "Interval":
        return cls(v, v)

    @property
    def width(self):
        return np.asarray(self.hi) - np.asarray(self.lo)

    def magnitude(self):
        """Upper bound on ``|v|`` over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, v) -> bool:
        return bool(np.all((np.asarray(self.lo) <= v) & (v <= np.asarray(self.hi))))

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __neg__(self) -> "Interval":
        return Interval(-np.asarray(self.hi), -np.asarray(self.lo))

    def __mul__(self, other: "Interval") -> "Interval":
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        lo = np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3]))
        hi = np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3]))
        return Interval(_down(lo), _up(hi))

    def __truediv__(self, other: "Interval") -> "Interval":
        olo = np.asarray(other.lo)
        ohi = np.asarray(other.hi)
        if np.any((olo <= 0.0) & (ohi >= 0.0)):
            raise IntervalDomainError("division by an interval containing zero")
        recip = Interval(_down(1.0 / ohi), _up(1.0 / olo))
        return self * recip

    def __pow__(self, k: int) -> "Interval":
        if k == 0:
            one = np.ones_like(np.asarray(self.lo, dtype=float))
            return Interval(one, one)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        plo = np.power(lo, k)
        phi = np.power(hi, k)
        if k % 2 == 1:
            return Interval(_down(plo), _up(phi))
        top = np.maximum(plo, phi)
        bottom = np.where(lo >= 0.0, plo, np.where(hi <= 0.0, phi, 0.0))
        bottom = np.where(bottom > 0.0, _down(bottom), bottom)
        return Interval(bottom, _up(top))

    def exp(self) -> "Interval":
        return Interval(np.maximum(_down(np.exp(self.lo)), 0.0), _up(np.exp(self.hi)))

    def sqrt(self) -> "Interval":
        if np.any(np.asarray(self.lo) < 0.0):
            raise IntervalDomainError("sqrt of an interval with negative lower bound")
        return Interval(np.maximum(_down(np.sqrt(self.lo)), 0.0), _up(np.sqrt(self.hi)))

    def sin(self) -> "Interval":
        return _periodic(self, np.sin, peak=0.5 * math.pi, trough=-0.5 * math.pi)

    def cos(self) -> "Interval":
        return _periodic(self, np.cos, peak=0.0, trough=math.pi)


def _contains_phase(lo, hi, phase):
    # is there an integer k with lo <= phase + 2 pi k <= hi (slightly generous)
    k = np.ceil((lo - phase) / _TWO_PI - 1e-12)
    return phase + _TWO_PI * k <= hi + 1e-12 * (1.0 + np.abs(hi))


def _periodic(iv: Interval, fn, peak: float, trough: float) -> Interval:
    lo = np.asarray(iv.lo, dtype=float)
    hi = np.asarray(iv.hi, dtype=float)
    a = fn(lo)
    b = fn(hi)
    out_lo = _down(np.minimum(a, b))
    out_hi = _up(np.maximum(a, b))
    wide = (hi - lo) >= _TWO_PI
    out_hi = np.where(wide | _contains_phase(lo, hi, peak), 1.0, out_hi)
    out_lo = np.where(wide | _contains_phase(lo, hi, trough), -1.0, out_lo)
    return Interval(np.clip(out_lo, -1.0, 1.0), np.clip(out_hi, -1.0, 1.0))


def eval_interval(e: Expr, lo, hi=None) -> Interval:
    """Enclose the range of ``e`` over the box ``[lo, hi]``.

    ``lo``/``hi`` have shape ``(n,)`` or ``(n, K)`` for a batch of boxes.  A
    single argument may instead be anything with ``.lo``/``.hi`` (a
    :class:`~cbfcompat.geometry.Box`) or a sequence of :class:`Interval`.
    Raises :class:`IntervalDomainError` naming the offending subexpression.
    """
    if hi is None:
        if hasattr(lo, "lo") and hasattr(lo, "hi"):
            lo, hi = lo.lo, lo.hi
        else:
            lo, hi = [iv.lo for iv in lo], [iv.hi for iv in lo]
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape:
        raise ValueError("lo and hi must have the same shape")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _ieval(e, lo, hi)
    shape = lo.shape[1:]
    return Interval(
        np.broadcast_to(np.asarray(out.lo, dtype=float), shape).copy(),
        np.broadcast_to(np.asarray(out.hi, dtype=float), shape).copy(),
    )


def _ieval(e: Expr, lo, hi) -> Interval:
    if isinstance(e, Const):
        return Interval(e.value, e.value)
    if isinstance(e, Var):
        return Interval(lo[e.index - 1], hi[e.index - 1])
    if isinstance(e, Neg):
        return -_ieval(e.arg, lo, hi)
    if isinstance(e, BinOp):
        a = _ieval(e.left, lo, hi)
        b = _ieval(e.right, lo, hi)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        try:
            return a / b
        except IntervalDomainError as exc:
            raise IntervalDomainError(f"{exc} in {to_string(e)}") from None
    if isinstance(e, Pow):
        return _ieval(e.base, lo, hi) ** e.exponent
    if isinstance(e, Func):
        a = _ieval(e.arg, lo, hi)
        if e.name == "sqrt":
            try:
                return a.sqrt()
            except IntervalDomainError as exc:
                raise IntervalDomainError(f"{exc} in {to_string(e)}") from None
        return getattr(a, e.name)()
    raise TypeError(f"unknown node {e!r}")
