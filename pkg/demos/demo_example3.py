"""Shrink the input box and the same barriers stop being compatible.

The first cover already contains states where no admissible input keeps
both barrier conditions satisfied; the checker reports one of them.
"""

import numpy as np

from _common import PROBLEMS

from cbfcompat import assemble, check, load_problem, robustness

spec = load_problem(PROBLEMS / "example3.json")
verdict = check(spec)
print(f"verdict: {verdict.status} in iteration {len(verdict.iterations) - 1}")
print(f"witness x = {verdict.witness}, c = {verdict.c:.4f}, h = {[round(h, 4) for h in verdict.h_values]}")

incompatible = [rec for rec in verdict.trace.records() if rec[-1] == "incompatible"]
print(f"{len(incompatible)} incompatible cubes:")
for _, center, size, c, _, _ in incompatible:
    print(f"  centre {center}  size {size}  c = {c:.4f}")

# the best input at the witness still violates one barrier condition
A, b = assemble(spec, np.array(verdict.witness))
res = robustness(A, b, spec.input_set)
print(f"best input u* = {res.u_star}, margins A u* + b = {A @ res.u_star + b}")
