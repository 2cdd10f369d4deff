"""Certify two nested quadratic barriers with a generous input box.

The checker covers the safe annulus with cubes, solves one small LP per
cube, and refines only where the certified radius falls short of the cube.
"""

from _common import PROBLEMS

from cbfcompat import check, load_problem

spec = load_problem(PROBLEMS / "example2.json")
print(f"problem: {spec.name}  (n={spec.n}, m={spec.m}, N={len(spec.barriers)})")

verdict = check(spec)
bb = verdict.bounding_box
print(f"safe-set bounding box: [{bb.lo[0]:.4f}, {bb.hi[0]:.4f}] x [{bb.lo[1]:.4f}, {bb.hi[1]:.4f}]")
for it in verdict.iterations:
    print(
        f"  iteration {it.iteration}: pitch {it.cube_size:<9g} cubes {it.cubes_total:>6}"
        f"  certified {it.cubes_certified:>6}  refined {it.cubes_refined:>5}"
    )
print(f"verdict: {verdict.status} after {len(verdict.iterations)} iterations, {verdict.wall_time:.1f}s")
