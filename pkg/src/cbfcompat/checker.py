"""Sample-and-refine compatibility check.

The safe set is covered by a lattice of cubes of size ``r0``.  Every cube of
the current worklist is probed at its centre: the robustness program gives
``c`` and an optimal input ``u*``; a negative ``c`` falsifies compatibility,
otherwise the Lipschitz bounds turn ``c`` into a certified cube size
``rho = 2c / (L_A ||u*||_inf + L_b)``.  Cubes with ``rho >= r`` are done;
the rest have their uncertified annulus re-covered at pitch ``lambda r`` and
go to the next worklist.

Each iteration is evaluated in full before any verdict is taken, and all
reductions follow worklist order, so results do not depend on how many
worker processes solve the LPs.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expr import evaluate
from .geometry import Box, ImplicitRegion, implicit_cover, range_limits, refine_annuli
from .lipschitz import LipschitzBounds, bound_lipschitz, bound_lipschitz_batch, certified_radii, eta_prime
from .lp import robustness_batch
from .options import CheckOptions
from .problem import ProblemSpec, assemble, max_input_infnorm

__all__ = [
    "CERTIFIED",
    "REFINED",
    "INCOMPATIBLE",
    "NonTerminationError",
    "IterationStats",
    "Trace",
    "Verdict",
    "check",
    "safe_set_bounds",
    "oracle_scan",
]

log = logging.getLogger(__name__)

CERTIFIED, REFINED, INCOMPATIBLE = 0, 1, 2
STATUS_NAMES = ("certified", "refined", "incompatible")


class NonTerminationError(RuntimeError):
    """The iteration cap was reached without a verdict (no ``r_min`` configured)."""


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    cube_size: float
    cubes_total: int
    cubes_certified: int
    cubes_refined: int
    cubes_incompatible: int = 0

    def to_json(self):
        return {
            "iteration": self.iteration,
            "cube_size": self.cube_size,
            "cubes_total": self.cubes_total,
            "cubes_certified": self.cubes_certified,
            "cubes_refined": self.cubes_refined,
            "cubes_incompatible": self.cubes_incompatible,
        }


class Trace:
    """Per-cube record of a run, stored column-wise one chunk per iteration."""

    def __init__(self, n: int):
        self.n = n
        self._chunks: list[dict] = []

    def append(self, iteration, centers, sizes, c, rho, status):
        self._chunks.append(
            {
                "iteration": np.full(len(c), iteration, dtype=np.int64),
                "centers": np.asarray(centers, dtype=float).reshape(len(c), self.n),
                "size": np.asarray(sizes, dtype=float),
                "c": np.asarray(c, dtype=float),
                "rho": np.asarray(rho, dtype=float),
                "status": np.asarray(status, dtype=np.int8),
            }
        )

    def __len__(self):
        return sum(len(ch["c"]) for ch in self._chunks)

    def column(self, name):
        if not self._chunks:
            if name == "centers":
                return np.empty((0, self.n))
            return np.empty(0)
        return np.concatenate([ch[name] for ch in self._chunks])

    def records(self):
        """Yield ``(iteration, center, size, c, rho, status_name)`` tuples."""
        for ch in self._chunks:
            for k in range(len(ch["c"])):
                yield (
                    int(ch["iteration"][k]),
                    tuple(ch["centers"][k].tolist()),
                    float(ch["size"][k]),
                    float(ch["c"][k]),
                    float(ch["rho"][k]),
                    STATUS_NAMES[ch["status"][k]],
                )

    def write_csv(self, stream) -> None:
        """Columns ``iter, c1..cn, size, c, rho, status``; floats in shortest round-trip form."""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["iter", *[f"c{j + 1}" for j in range(self.n)], "size", "c", "rho", "status"])
        for it, center, size, c, rho, status in self.records():
            writer.writerow([it, *map(repr, center), repr(size), repr(c), repr(rho), status])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, stream) -> "Trace":
        reader = csv.reader(stream)
        header = next(reader)
        n = len(header) - 5
        trace = cls(n)
        rows = list(reader)
        if not rows:
            return trace
        its = np.array([int(r[0]) for r in rows])
        centers = np.array([[float(v) for v in r[1 : 1 + n]] for r in rows])
        size = np.array([float(r[1 + n]) for r in rows])
        c = np.array([float(r[2 + n]) for r in rows])
        rho = np.array([float(r[3 + n]) for r in rows])
        status = np.array([STATUS_NAMES.index(r[4 + n]) for r in rows])
        for it in np.unique(its):
            sel = its == it
            trace.append(int(it), centers[sel], size[sel], c[sel], rho[sel], status[sel])
        return trace


@dataclass
class Verdict:
    """Outcome of :func:`check`.

    ``status`` is ``"compatible"``, ``"incompatible"`` (with ``witness``,
    ``c`` and ``h_values``) or ``"inconclusive"`` (with ``eta_prime``).
    """

    status: str
    iterations: list = field(default_factory=list)
    witness: tuple | None = None
    c: float | None = None
    h_values: tuple | None = None
    eta_prime: float | None = None
    lipschitz: LipschitzBounds | None = None
    range_box: Box | None = None
    bounding_box: Box | None = None
    wall_time: float = 0.0
    trace: Trace | None = field(default=None, repr=False)

    @property
    def compatible(self) -> bool:
        return self.status == "compatible"

    def verdict_json(self) -> dict:
        out = {"status": self.status}
        if self.status == "incompatible":
            out.update(witness=list(self.witness), c=self.c, h_values=list(self.h_values))
        elif self.status == "inconclusive":
            out["eta_prime"] = self.eta_prime
        return out


def safe_set_bounds(spec: ProblemSpec, options: CheckOptions | None = None) -> Box:
    """Range box of the safe set (user override or interval branch-and-bound)."""
    opts = options or spec.options
    if opts.bounding_box is not None:
        return Box.from_pairs(opts.bounding_box)
    return range_limits(ImplicitRegion(spec.constraints, spec.domain_search_box), opts.range_tol)


class _Solver:
    """Runs batches of robustness LPs, optionally over a process pool."""

    def __init__(self, spec: ProblemSpec, workers: int):
        self.Cu = spec.input_set.Cu
        self.du = spec.input_set.du
        self.workers = workers
        self.pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()

    def solve(self, A, b):
        K = A.shape[0]
        if self.pool is None or K < 2 * self.workers:
            return robustness_batch(A, b, self.Cu, self.du)
        parts = np.array_split(np.arange(K), 4 * self.workers)
        futures = [self.pool.submit(robustness_batch, A[p], b[p], self.Cu, self.du) for p in parts if len(p)]
        results = [f.result() for f in futures]
        return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def _refine(centers, sizes, rho, r_next):
    """Children of every refined cube, grouped by parent in worklist order."""
    K = len(sizes)
    if K == 0:
        return np.empty((0, centers.shape[1])), np.empty(0)
    keys = np.stack([sizes, r_next], axis=1)
    groups, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    out_c, out_parent = [], []
    for g, (size, rn) in enumerate(groups):
        members = np.nonzero(inverse == g)[0]
        children, parent = refine_annuli(centers[members], float(size), rho[members], float(rn))
        out_c.append(children)
        out_parent.append(members[parent])
    child_centers = np.concatenate(out_c)
    parent = np.concatenate(out_parent)
    order = np.argsort(parent, kind="stable")
    return child_centers[order], r_next[parent[order]]


def check(spec: ProblemSpec, options: CheckOptions | None = None, record_trace: bool = True) -> Verdict:
    """Verify, falsify, or bound the robustness of the spec's barrier family."""
    opts = options or spec.options
    t_start = time.perf_counter()
    r0, lam = opts.r0, opts.lam

    range_box = safe_set_bounds(spec, opts)
    region = ImplicitRegion(spec.constraints, spec.domain_search_box, margin=opts.boundary_margin_a)
    centers, _, _ = implicit_cover(region, r0, range_box)
    bounding_box = range_box.inflate(0.5 * r0)

    # refined cubes may poke out of their parent by at most the child pitch,
    # so all cubes ever checked stay within the G0 hull grown by r0 lam / (1 - lam)
    if len(centers):
        overshoot = r0 * lam / (1.0 - lam)
        lip_box = Box(centers.min(axis=0) - 0.5 * r0 - overshoot, centers.max(axis=0) + 0.5 * r0 + overshoot)
    else:
        lip_box = bounding_box
    lm = opts.lipschitz
    if lm.kind == "user":
        L = bound_lipschitz(spec, lip_box, "user", lm.L_A, lm.L_b)
    else:
        L = bound_lipschitz(spec, lip_box, lm.kind)
    u_max = max_input_infnorm(spec.input_set)
    log.info("range box %s, %d initial cubes, L_A=%.6g L_b=%.6g (%s)", range_box, len(centers), L.L_A, L.L_b, L.mode)

    trace = Trace(spec.n) if record_trace else None
    sizes = np.full(len(centers), r0)
    stats: list[IterationStats] = []

    def finish(status, **kw):
        return Verdict(
            status,
            iterations=stats,
            lipschitz=L,
            range_box=range_box,
            bounding_box=bounding_box,
            wall_time=time.perf_counter() - t_start,
            trace=trace,
            **kw,
        )

    k = 0
    with _Solver(spec, opts.thread_count) as solver:
        while len(centers):
            if opts.r_min is not None and np.any(sizes <= opts.r_min):
                eta = eta_prime(opts.r_min, lam, L, u_max)
                log.info("lattice size fell to r_min after %d iterations; eta' = %.6g", k, eta)
                return finish("inconclusive", eta_prime=eta)
            if k >= opts.max_iterations:
                raise NonTerminationError(f"no verdict after {opts.max_iterations} iterations ({len(centers)} cubes pending)")

            A, b = assemble(spec, centers.T)
            c, u_star = solver.solve(A, b)
            if lm.kind == "per-cube":
                half = 0.5 * sizes[:, None]
                L_A, L_b = bound_lipschitz_batch(spec, (centers - half).T, (centers + half).T)
            else:
                L_A, L_b = L.L_A, L.L_b
            rho = certified_radii(c, np.abs(u_star).max(axis=1), L_A, L_b)

            status = np.full(len(c), REFINED, dtype=np.int8)
            status[rho >= sizes] = CERTIFIED
            status[c < 0] = INCOMPATIBLE
            if trace is not None:
                trace.append(k, centers, sizes, c, rho, status)
            refined = status == REFINED
            stats.append(
                IterationStats(
                    k,
                    float(sizes.max()),
                    len(c),
                    int(np.sum(status == CERTIFIED)),
                    int(np.sum(refined)),
                    int(np.sum(status == INCOMPATIBLE)),
                )
            )
            log.info("iteration %d: %s", k, stats[-1])

            bad = np.nonzero(status == INCOMPATIBLE)[0]
            if bad.size:
                # lexicographically smallest centre among this iteration's findings,
                # preferring centres inside the safe set over cover overhang
                h_bad = np.stack([np.asarray(evaluate(bar.h, centers[bad].T), dtype=float) for bar in spec.barriers])
                inside = np.all(h_bad >= 0, axis=0)
                pool = np.nonzero(inside)[0] if inside.any() else np.arange(bad.size)
                j = int(pool[np.lexsort(centers[bad[pool]].T[::-1])[0]])
                i = int(bad[j])
                witness = tuple(centers[i].tolist())
                h_values = tuple(float(v) for v in h_bad[:, j])
                return finish("incompatible", witness=witness, c=float(c[i]), h_values=h_values)

            if opts.rho_capped_refinement:
                r_next = np.minimum(rho[refined], lam * sizes[refined])
            else:
                r_next = np.full(int(refined.sum()), r0 * lam ** (k + 1))
            centers, sizes = _refine(centers[refined], sizes[refined], rho[refined], r_next)
            k += 1

    return finish("compatible")


def oracle_scan(spec: ProblemSpec, pitch: float, margin: float | None = None, options: CheckOptions | None = None):
    """Brute-force robustness on a dense lattice over the bounding box.

    Points are kept when every ``h_i(x) >= -margin`` (``margin`` defaults to
    ``pitch``).  Returns ``(points, c)`` with ``points`` of shape ``(K, n)``.
    """
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    opts = options or spec.options
    margin = pitch if margin is None else margin
    box = safe_set_bounds(spec, opts).inflate(0.5 * opts.r0)
    axes = [lo + pitch * np.arange(int(np.floor((hi - lo) / pitch + 1e-9)) + 1) for lo, hi in zip(box.lo, box.hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.ones(len(pts), dtype=bool)
    for bar in spec.barriers:
        keep &= evaluate(bar.h, pts.T) >= -margin
    pts = pts[keep]
    if not len(pts):
        return pts, np.empty(0)
    A, b = assemble(spec, pts.T)
    c, _ = robustness_batch(A, b, spec.input_set.Cu, spec.input_set.du)
    return pts, c
