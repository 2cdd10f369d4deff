"""Cubes, boxes and lattice covers of compact regions.

``grid_sample`` covers a region with axis-aligned n-cubes of edge ``r``
taken from a regular lattice centred on the region's bounding box.  Two
region kinds are supported: implicit sets ``{x : h(x) >= 0 for all h}`` and
cube annuli ``B(x, r) \\ B(x, rho)`` used when refining a partially
certified cube.  The intersection test is conservative: a cube is dropped
only when it provably misses the region, so the union of the returned
cubes always covers it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .expr import Expr
from .interval import eval_interval

__all__ = [
    "Box",
    "Cube",
    "ImplicitRegion",
    "AnnulusRegion",
    "GeometryError",
    "EmptyRegionError",
    "NonConvergenceError",
    "range_limits",
    "lattice_indices",
    "grid_sample",
    "implicit_cover",
    "refine_annuli",
    "covers",
]

# slack (in lattice units) when deciding whether a boundary lattice point is a candidate
_LATTICE_EPS = 1e-9


class GeometryError(RuntimeError):
    pass


class EmptyRegionError(GeometryError):
    """Every sub-box of the search box was proven to miss the region."""


class NonConvergenceError(GeometryError):
    """Branch-and-bound exceeded its box budget."""


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("Box lo/hi dimension mismatch")
        if np.any(lo > hi):
            raise ValueError(f"Box requires lo <= hi, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "Box":
        pairs = np.asarray(pairs, dtype=float)
        return cls(pairs[:, 0], pairs[:, 1])

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def inflate(self, margin: float) -> "Box":
        return Box(self.lo - margin, self.hi + margin)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)

    def to_pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True)
class Cube:
    """The closed cube ``center + [-size/2, size/2]^n``."""

    center: tuple
    size: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if not self.size > 0:
            raise ValueError(f"cube size must be positive, got {self.size}")
        object.__setattr__(self, "size", float(self.size))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def box(self) -> Box:
        c = np.asarray(self.center)
        return Box(c - 0.5 * self.size, c + 0.5 * self.size)


@dataclass(frozen=True)
class ImplicitRegion:
    """``{x : h(x) >= 0 for every constraint}``, assumed to lie inside ``search_box``.

    With ``margin`` set the region becomes ``C \\ C_a`` where
    ``C_a = {x : h(x) >= margin for every constraint}``.
    """

    constraints: tuple
    search_box: Box
    margin: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValueError("an implicit region needs at least one constraint")
        if self.margin is not None and not self.margin > 0:
            raise ValueError("margin must be positive")


@dataclass(frozen=True)
class AnnulusRegion:
    """``B(outer.center, outer.size) \\ B(outer.center, inner_size)``; the inner cube is open."""

    outer: Cube
    inner_size: float

    def __post_init__(self):
        if not 0.0 <= self.inner_size < self.outer.size:
            raise ValueError("annulus needs 0 <= inner_size < outer.size")


Region = Union[ImplicitRegion, AnnulusRegion]


# --------------------------------------------------------------------------- #
# Range limits
# --------------------------------------------------------------------------- #


def range_limits(region: Region, tol: float = 1e-3, max_boxes: int = 10**6) -> Box:
    """Per-axis extent of ``region``.

    For implicit regions this runs interval branch-and-bound over the search
    box: sub-boxes where some constraint is provably negative are pruned,
    sub-boxes where all constraints are provably non-negative are kept whole,
    and undecided sub-boxes are bisected along their widest axis until they
    are no wider than ``tol``.  Undecided boxes already inside the hull of
    the provably feasible boxes cannot move the answer and are not refined.
    The returned box always contains the true range.
    """
    if isinstance(region, AnnulusRegion):
        return region.outer.box
    if not tol > 0:
        raise ValueError("tol must be positive")

    lo = region.search_box.lo[:, None].copy()
    hi = region.search_box.hi[:, None].copy()
    n = lo.shape[0]
    inner_lo = np.full(n, np.inf)
    inner_hi = np.full(n, -np.inf)
    kept_lo: list[np.ndarray] = []
    kept_hi: list[np.ndarray] = []
    processed = 0

    while lo.shape[1]:
        processed += lo.shape[1]
        if processed > max_boxes:
            raise NonConvergenceError(f"range_limits exceeded {max_boxes} boxes (tol={tol})")
        feasible = np.ones(lo.shape[1], dtype=bool)
        inside = np.ones(lo.shape[1], dtype=bool)
        for h in region.constraints:
            iv = eval_interval(h, lo, hi)
            feasible &= iv.hi >= 0.0
            inside &= iv.lo >= 0.0
        lo, hi, inside = lo[:, feasible], hi[:, feasible], inside[feasible]

        if inside.any():
            inner_lo = np.minimum(inner_lo, lo[:, inside].min(axis=1))
            inner_hi = np.maximum(inner_hi, hi[:, inside].max(axis=1))
            kept_lo.append(lo[:, inside])
            kept_hi.append(hi[:, inside])
        lo, hi = lo[:, ~inside], hi[:, ~inside]

        width = hi - lo
        small = np.all(width <= tol, axis=0)
        dormant = np.all((lo >= inner_lo[:, None]) & (hi <= inner_hi[:, None]), axis=0)
        settled = small | dormant
        kept_lo.append(lo[:, settled])
        kept_hi.append(hi[:, settled])
        lo, hi, width = lo[:, ~settled], hi[:, ~settled], width[:, ~settled]
        if not lo.shape[1]:
            break

        axis = np.argmax(width, axis=0)
        cols = np.arange(lo.shape[1])
        mid = 0.5 * (lo[axis, cols] + hi[axis, cols])
        left_hi = hi.copy()
        left_hi[axis, cols] = mid
        right_lo = lo.copy()
        right_lo[axis, cols] = mid
        lo = np.concatenate([lo, right_lo], axis=1)
        hi = np.concatenate([left_hi, hi], axis=1)

    all_lo = np.concatenate(kept_lo, axis=1) if kept_lo else np.empty((n, 0))
    all_hi = np.concatenate(kept_hi, axis=1) if kept_hi else np.empty((n, 0))
    if all_lo.shape[1] == 0:
        raise EmptyRegionError("every sub-box of the search box misses the region")
    return Box(all_lo.min(axis=1), all_hi.max(axis=1))


# --------------------------------------------------------------------------- #
# Lattice sampling
# --------------------------------------------------------------------------- #


def lattice_indices(kmin: Sequence[int], kmax: Sequence[int]) -> np.ndarray:
    """All integer points of ``[kmin, kmax]`` in lexicographic order, shape ``(K, n)``."""
    ranges = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    if any(len(r) == 0 for r in ranges):
        return np.empty((0, len(ranges)), dtype=np.int64)
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def _candidate_range(lo, hi, mid, r):
    # lattice mid + k r intersected with [lo - r/2, hi + r/2]
    kmin = np.ceil((lo - 0.5 * r - mid) / r - _LATTICE_EPS).astype(np.int64)
    kmax = np.floor((hi + 0.5 * r - mid) / r + _LATTICE_EPS).astype(np.int64)
    return kmin, kmax


def implicit_cover(region: ImplicitRegion, r: float, bounds: Box | None = None, tol: float = 1e-3):
    """Array form of :func:`grid_sample` for implicit regions.

    Returns ``(centers, indices, bounds)``: cube centres of shape ``(K, n)``,
    their integer lattice coordinates, and the range box the lattice was
    built from.
    """
    if not r > 0:
        raise ValueError("lattice size r must be positive")
    if bounds is None:
        bounds = range_limits(region, tol)
    mid = bounds.center
    kmin, kmax = _candidate_range(bounds.lo, bounds.hi, mid, r)
    idx = lattice_indices(kmin, kmax)
    centers = mid[None, :] + idx * r
    if len(idx) == 0:
        return centers, idx, bounds

    clo = (centers - 0.5 * r).T
    chi = (centers + 0.5 * r).T
    keep = np.ones(len(idx), dtype=bool)
    within_margin = np.ones(len(idx), dtype=bool)
    for h in region.constraints:
        iv = eval_interval(h, clo, chi)
        keep &= iv.hi >= 0.0
        if region.margin is not None:
            within_margin &= iv.lo >= region.margin
    if region.margin is not None:
        keep &= ~within_margin
    return centers[keep], idx[keep], bounds


def _annulus_indices(n: int, r: float, r_next: float) -> np.ndarray:
    k = int(math.floor((0.5 * r + 0.5 * r_next) / r_next + _LATTICE_EPS))
    return lattice_indices([-k] * n, [k] * n)


def refine_annuli(centers: np.ndarray, r: float, rhos: np.ndarray, r_next: float):
    """Re-cover ``B(x, r) \\ B(x, rho)`` for many parents sharing ``r`` and ``r_next``.

    Returns ``(child_centers, parent_index)``, parents in input order and each
    parent's children in lexicographic lattice order.  Equivalent to calling
    :func:`grid_sample` on each :class:`AnnulusRegion` in turn.
    """
    centers = np.asarray(centers, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    n = centers.shape[1]
    idx = _annulus_indices(n, r, r_next)
    offsets = idx * r_next
    # children strictly inside the open inner cube are dropped; boundary contact is kept
    reach = np.abs(offsets).max(axis=1) + 0.5 * r_next
    keep = reach[None, :] >= 0.5 * rhos[:, None]
    parent, child = np.nonzero(keep)
    return centers[parent] + offsets[child], parent


def grid_sample(region: Region, r: float, bounds: Box | None = None, tol: float = 1e-3) -> list[Cube]:
    """Cover ``region`` with cubes of size ``r`` from a lattice centred on its range box.

    Cubes come back in lexicographic order of their integer lattice
    coordinates.  ``bounds`` overrides the computed range box for implicit
    regions.
    """
    if isinstance(region, AnnulusRegion):
        c = np.asarray(region.outer.center)
        children, _ = refine_annuli(c[None, :], region.outer.size, np.array([region.inner_size]), r)
        return [Cube(p, r) for p in children]
    centers, _, _ = implicit_cover(region, r, bounds, tol)
    return [Cube(p, r) for p in centers]


def covers(cubes: Sequence[Cube], points, chunk: int = 4096) -> bool:
    """True iff every point lies in at least one of the closed cubes."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        return True
    if not cubes:
        return False
    centers = np.array([c.center for c in cubes])
    half = 0.5 * np.array([c.size for c in cubes])
    for start in range(0, len(points), chunk):
        p = points[start : start + chunk]
        dist = np.abs(p[:, None, :] - centers[None, :, :]).max(axis=2)
        if not np.all(np.any(dist <= half[None, :], axis=1)):
            return False
    return True
