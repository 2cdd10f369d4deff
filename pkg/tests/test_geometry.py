import math

import numpy as np
import pytest

from cbfcompat.expr import evaluate, parse
from cbfcompat.geometry import (
    AnnulusRegion,
    Box,
    Cube,
    EmptyRegionError,
    ImplicitRegion,
    NonConvergenceError,
    covers,
    grid_sample,
    implicit_cover,
    lattice_indices,
    range_limits,
    refine_annuli,
)

from helpers import quad_text, random_spd, rejection_sample

Q = np.array([[0.5, 0.1], [0.1, 0.3]])
ANNULUS = (parse("0.5*x1^2 + 0.2*x1*x2 + 0.3*x2^2 - 1", 2), parse("2 - (0.5*x1^2 + 0.2*x1*x2 + 0.3*x2^2)", 2))
SEARCH = Box(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
X1_MAX = math.sqrt(2 / (0.5 - 0.1**2 / 0.3))
X2_MAX = math.sqrt(2 / (0.3 - 0.1**2 / 0.5))


def test_box_basics():
    b = Box.from_pairs([[0, 1], [-2, 2]])
    assert b.n == 2
    np.testing.assert_array_equal(b.center, [0.5, 0.0])
    np.testing.assert_array_equal(b.widths, [1.0, 4.0])
    assert b.contains([1.0, 2.0]) and not b.contains([1.1, 0.0])
    assert b.inflate(0.5) == Box.from_pairs([[-0.5, 1.5], [-2.5, 2.5]])
    with pytest.raises(ValueError):
        Box.from_pairs([[1, 0]])


def test_cube_box():
    c = Cube((1.0, 2.0), 0.5)
    assert c.box == Box.from_pairs([[0.75, 1.25], [1.75, 2.25]])
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)


class TestRangeLimits:
    def test_example_annulus(self):
        box = range_limits(ImplicitRegion(ANNULUS, SEARCH), tol=0.01)
        assert box.hi[0] >= X1_MAX and box.hi[0] - X1_MAX <= 0.02
        assert box.hi[1] >= X2_MAX and box.hi[1] - X2_MAX <= 0.02
        assert box.lo[0] <= -X1_MAX and -X1_MAX - box.lo[0] <= 0.02
        assert box.lo[1] <= -X2_MAX and -X2_MAX - box.lo[1] <= 0.02

    def test_unit_interval(self):
        box = range_limits(ImplicitRegion((parse("1 - x1^2", 1),), Box.from_pairs([[-5, 5]])), tol=1e-3)
        assert box.lo[0] <= -1.0 and box.lo[0] >= -1.0 - 1e-3
        assert box.hi[0] >= 1.0 and box.hi[0] <= 1.0 + 1e-3

    def test_annulus_region_returns_outer_box(self):
        box = range_limits(AnnulusRegion(Cube((0.0, 0.0), 1.0), 0.5))
        assert box == Box.from_pairs([[-0.5, 0.5], [-0.5, 0.5]])

    def test_empty_region(self):
        with pytest.raises(EmptyRegionError):
            range_limits(ImplicitRegion((parse("-1 - x1^2", 1),), Box.from_pairs([[-5, 5]])))

    def test_box_budget(self):
        with pytest.raises(NonConvergenceError):
            range_limits(ImplicitRegion(ANNULUS, SEARCH), tol=1e-9, max_boxes=500)


class TestGridSample:
    def test_unit_interval_cover(self):
        region = ImplicitRegion((parse("x1*(1 - x1)", 1),), Box.from_pairs([[-5, 5]]))
        cubes = grid_sample(region, 1.0, bounds=Box.from_pairs([[0, 1]]))
        assert [c.center[0] for c in cubes] == [-0.5, 0.5, 1.5]
        assert all(c.size == 1.0 for c in cubes)

    def test_example_cover(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        bounds = range_limits(region)
        cubes = grid_sample(region, 0.25, bounds)
        assert abs(len(cubes) - 200) <= 20
        outer = bounds.inflate(0.125)
        np.testing.assert_allclose(outer.hi, [2.2, 2.8], atol=0.05)
        np.testing.assert_allclose(outer.lo, [-2.2, -2.8], atol=0.05)
        rng = np.random.default_rng(1)
        pts = rejection_sample(rng, ANNULUS, bounds, 10_000)
        assert len(pts) == 10_000
        assert covers(cubes, pts)

    def test_lexicographic_order_and_determinism(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        centers, idx, _ = implicit_cover(region, 0.25)
        order = np.lexsort(idx.T[::-1])
        np.testing.assert_array_equal(order, np.arange(len(idx)))
        again, idx2, _ = implicit_cover(region, 0.25)
        np.testing.assert_array_equal(centers, again)
        np.testing.assert_array_equal(idx, idx2)

    def test_centres_come_from_integer_indices(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        centers, idx, bounds = implicit_cover(region, 0.1)
        np.testing.assert_array_equal(centers, bounds.center + idx * 0.1)

    def test_boundary_margin_removes_interior(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        bounds = range_limits(region)
        full, _, _ = implicit_cover(region, 0.25, bounds)
        ring, _, _ = implicit_cover(ImplicitRegion(ANNULUS, SEARCH, margin=0.1), 0.25, bounds)
        assert 0 < len(ring) < len(full)
        assert set(map(tuple, ring)) <= set(map(tuple, full))
        # every removed cube has both h_i >= 0.1 at its centre
        removed = np.array(sorted(set(map(tuple, full)) - set(map(tuple, ring))))
        for h in ANNULUS:
            assert np.all(evaluate(h, removed.T) >= 0.1)

    def test_discarded_cubes_miss_the_set(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        bounds = range_limits(region)
        kept, idx, _ = implicit_cover(region, 0.25, bounds)
        kmin, kmax = idx.min(axis=0) - 1, idx.max(axis=0) + 1
        every = lattice_indices(kmin, kmax)
        kept_set = set(map(tuple, idx))
        dropped = [k for k in map(tuple, every) if k not in kept_set]
        rng = np.random.default_rng(3)
        for k in dropped[:60]:
            c = bounds.center + np.array(k) * 0.25
            pts = c[:, None] + 0.25 * (rng.random((2, 1000)) - 0.5)
            inside = np.ones(1000, dtype=bool)
            for h in ANNULUS:
                inside &= evaluate(h, pts) >= 0
            assert not inside.any()

    def test_finiteness_bound(self):
        region = ImplicitRegion(ANNULUS, SEARCH)
        bounds = range_limits(region)
        for r in (0.05, 0.1, 0.25, 0.5, 1.0):
            cubes = grid_sample(region, r, bounds)
            bound = np.prod(np.ceil(bounds.widths / r) + 2)
            assert len(cubes) <= bound


@pytest.mark.parametrize("seed", range(10))
def test_random_quadratic_annulus_coverage(seed):
    rng = np.random.default_rng(seed)
    n = 2
    Qr = np.round(random_spd(rng, n), 3)
    q = quad_text(Qr)
    cons = (parse(f"{q} - 1", n), parse(f"3 - ({q})", n))
    region = ImplicitRegion(cons, Box(np.full(n, -10.0), np.full(n, 10.0)))
    r = float(rng.uniform(0.05, 0.5))
    bounds = range_limits(region)
    cubes = grid_sample(region, r, bounds)
    assert len(cubes) <= np.prod(np.ceil(bounds.widths / r) + 2)
    pts = rejection_sample(rng, cons, bounds, 1000)
    assert covers(cubes, pts)


class TestAnnulus:
    def test_drops_cubes_inside_the_inner_cube(self):
        outer = Cube((0.0, 0.0), 1.0)
        cubes = grid_sample(AnnulusRegion(outer, 0.6), 0.25)
        for c in cubes:
            assert np.max(np.abs(c.center)) + 0.125 >= 0.3

    def test_zero_inner_size_keeps_everything(self):
        cubes = grid_sample(AnnulusRegion(Cube((0.0, 0.0), 1.0), 0.0), 0.25)
        assert len(cubes) == 25

    def test_boundary_contact_is_kept(self):
        # child of offset 0 touches the inner cube boundary exactly when rho = r_next
        cubes = grid_sample(AnnulusRegion(Cube((0.0,), 1.0), 0.25), 0.25)
        assert (0.0,) in [c.center for c in cubes]
        cubes = grid_sample(AnnulusRegion(Cube((0.0,), 1.0), 0.2500001), 0.25)
        assert (0.0,) not in [c.center for c in cubes]

    @pytest.mark.parametrize("lam", [0.25, 0.3, 0.5, 0.7])
    def test_covers_annulus_and_stays_near_parent(self, lam):
        rng = np.random.default_rng(int(lam * 100))
        r = 0.4
        rho = 0.15
        parent = Cube((0.3, -0.2), r)
        r_next = lam * r
        cubes = grid_sample(AnnulusRegion(parent, rho), r_next)
        c = np.array(parent.center)
        pts = c + r * (rng.random((5000, 2)) - 0.5)
        pts = pts[np.max(np.abs(pts - c), axis=1) >= rho / 2]
        assert covers(cubes, pts)
        for child in cubes:
            reach = np.max(np.abs(np.array(child.center) - c)) + r_next / 2
            assert reach <= r / 2 + r_next + 1e-12

    def test_child_overhang_is_half_pitch_for_quarter_refinement(self):
        children, _ = refine_annuli(np.zeros((1, 2)), 1.0, np.array([0.0]), 0.25)
        assert np.max(np.abs(children)) + 0.125 == pytest.approx(0.5 + 0.125)

    def test_batch_matches_single(self):
        centers = np.array([[0.0, 0.0], [1.0, 1.0]])
        rhos = np.array([0.2, 0.5])
        kids, parent = refine_annuli(centers, 1.0, rhos, 0.25)
        for p in range(2):
            single = grid_sample(AnnulusRegion(Cube(tuple(centers[p]), 1.0), rhos[p]), 0.25)
            np.testing.assert_array_equal(kids[parent == p], [c.center for c in single])
        assert np.all(np.diff(parent) >= 0)


def test_covers():
    assert covers([Cube((0.0,), 1.0)], [[0.5]])
    assert not covers([Cube((0.0,), 1.0)], [[0.51]])
    assert covers([], np.empty((0, 1)))
    assert not covers([], [[0.0]])


def test_lattice_indices_order():
    idx = lattice_indices([0, -1], [1, 0])
    np.testing.assert_array_equal(idx, [[0, -1], [0, 0], [1, -1], [1, 0]])
