"""Compare user-supplied, interval-derived global, and per-cube Lipschitz bounds."""

from _common import PROBLEMS

from cbfcompat import LipschitzMode, check, load_problem

spec = load_problem(PROBLEMS / "example2.json")
for mode in (spec.options.lipschitz, LipschitzMode("auto"), LipschitzMode("per-cube")):
    opts = spec.options.with_overrides(lipschitz=mode)
    v = check(spec, opts, record_trace=False)
    lip = v.lipschitz.to_json()
    la, lb = lip.get("L_A"), lip.get("L_b")
    consts = f"L_A={la:.3f} L_b={lb:.3f}"
    if v.lipschitz.mode == "per-cube":
        consts += " (eta' only)"
    cubes = sum(it.cubes_total for it in v.iterations)
    print(f"{v.lipschitz.mode:>9}: {consts:<40} {v.status:<13} {len(v.iterations)} iterations, {cubes} cubes, {v.wall_time:.1f}s")
