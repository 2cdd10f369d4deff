"""Cap the refinement depth and the checker gives up with a quantitative bound.

When the worklist would need cubes no larger than r_min, the run ends
inconclusive and reports eta': the barriers cannot be robustly compatible
with a margin above it.
"""

import numpy as np

from _common import PROBLEMS

from cbfcompat import assemble, check, load_problem, oracle_scan, robustness

spec = load_problem(PROBLEMS / "example4.json")
verdict = check(spec)
print(f"verdict: {verdict.status} after {len(verdict.iterations)} iterations, eta' = {verdict.eta_prime:.4f}")

A, b = assemble(spec, np.array([-1.5, -1.25]))
print(f"c(-1.5, -1.25) = {robustness(A, b, spec.input_set).c:.4f}")

_, c = oracle_scan(spec, spec.options.r0 / 8)
print(f"dense scan: {len(c)} states, smallest c = {c.min():.4f} (consistent with eta')")
