#!/usr/bin/env python3
"""Cross-check the exported LP models against an independent MILP solver.

Exports a small instance through the CLI, parses the LP text, solves it
with HiGHS (scipy.optimize.milp), and compares the optimum against the
built-in exact search. Also checks that each payment variable z_t equals
max(0, 1 - cache_before_t . A_t) at the solver's optimum.

Exit codes: 0 pass, 1 fail, 77 skipped (no scipy.milp available).
"""

import argparse
import json
import re
import subprocess
import sys
import tempfile
from pathlib import Path

try:
    import numpy as np
    from scipy.optimize import LinearConstraint, Bounds, milp
except ImportError:
    print("scipy.optimize.milp unavailable; skipping")
    sys.exit(77)

TERM_RE = re.compile(r"([+-])?\s*(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z]\w*)")


def parse_terms(text):
    """'z_1 + 2 x_0_1 - d_3_2' -> [(coef, var), ...]"""
    terms = []
    pos = 0
    while pos < len(text):
        match = TERM_RE.match(text, pos)
        if not match:
            pos += 1
            continue
        sign, coef, var = match.groups()
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        terms.append((value, var))
        pos = match.end()
    return terms


def parse_lp(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("\\")]
    section = None
    objective = []
    constraints = []  # (name, terms, sense, rhs)
    bounds = {}
    binaries, generals = set(), set()
    for line in lines:
        if line in ("Minimize", "Subject To", "Bounds", "Binaries", "Generals", "End"):
            section = line
            continue
        if section == "Minimize":
            objective += parse_terms(line.split(":", 1)[1])
        elif section == "Subject To":
            name, body = line.split(":", 1)
            for sense in ("<=", ">=", "="):
                if sense in body:
                    lhs, rhs = body.rsplit(sense, 1)
                    constraints.append((name.strip(), parse_terms(lhs), sense,
                                        float(rhs)))
                    break
        elif section == "Bounds":
            parts = line.split("<=")
            lo, var, hi = float(parts[0]), parts[1].strip(), float(parts[2])
            bounds[var] = (lo, hi)
        elif section == "Binaries":
            binaries.add(line)
        elif section == "Generals":
            generals.add(line)
    return objective, constraints, bounds, binaries, generals


def solve_lp(text):
    objective, constraints, bounds_map, binaries, generals = parse_lp(text)
    variables = sorted(
        {var for _, var in objective}
        | {var for _, terms, _, _ in constraints for _, var in terms}
        | set(bounds_map) | binaries | generals)
    index = {var: i for i, var in enumerate(variables)}
    n = len(variables)

    c = np.zeros(n)
    for coef, var in objective:
        c[index[var]] += coef

    lin = []
    for _, terms, sense, rhs in constraints:
        row = np.zeros(n)
        for coef, var in terms:
            row[index[var]] += coef
        if sense == "<=":
            lin.append(LinearConstraint(row, -np.inf, rhs))
        elif sense == ">=":
            lin.append(LinearConstraint(row, rhs, np.inf))
        else:
            lin.append(LinearConstraint(row, rhs, rhs))

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for var, (vlo, vhi) in bounds_map.items():
        lo[index[var]], hi[index[var]] = vlo, vhi
    for var in binaries:
        lo[index[var]] = max(lo[index[var]], 0.0)
        hi[index[var]] = min(hi[index[var]], 1.0)
    integrality = np.zeros(n)
    for var in binaries | generals:
        integrality[index[var]] = 1

    result = milp(c=c, constraints=lin, integrality=integrality,
                  bounds=Bounds(lo, hi))
    if not result.success:
        raise RuntimeError(f"external solver failed: {result.message}")
    values = {var: result.x[index[var]] for var in variables}
    return result.fun, values, constraints


def check_linearization(values, constraints, objective_terms):
    """z_t must equal max(0, 1 - sum of cached active nodes) when c_t > 0."""
    cost_of = {}
    for coef, var in objective_terms:
        cost_of[var] = cost_of.get(var, 0.0) + coef
    failures = 0
    for name, terms, sense, rhs in constraints:
        if not name.startswith("pay_") or sense != ">=":
            continue
        z_var = next(var for _, var in terms if var.startswith("z_"))
        if cost_of.get(z_var, 0.0) <= 0:
            continue
        cached = sum(coef * values[var] for coef, var in terms
                     if not var.startswith("z_"))
        want = max(0.0, rhs - cached)
        got = values[z_var]
        if abs(got - want) > 1e-6:
            print(f"  linearization mismatch at {name}: z={got} expected {want}")
            failures += 1
    return failures


def run_case(cli, workload, capacity):
    with tempfile.TemporaryDirectory() as tmp:
        lp_path = Path(tmp) / "model.lp"
        out_path = Path(tmp) / "result.json"
        subprocess.run(
            [cli, "opt", "--workload", workload, "--capacities", str(capacity),
             "--export-milp", str(lp_path), "--out", str(out_path)],
            check=True)
        expected = json.loads(out_path.read_text())[0]["optimal_cost"]
        text = lp_path.read_text()

    objective, _, _, _, _ = parse_lp(text)
    optimum, values, constraints = solve_lp(text)
    status = "ok" if abs(optimum - expected) < 1e-6 else "MISMATCH"
    print(f"  workload={workload} capacity={capacity}: "
          f"external={optimum:.6f} builtin={expected:.6f} [{status}]")
    failures = 0 if status == "ok" else 1
    failures += check_linearization(values, constraints, objective)
    return failures


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cli", required=True, help="path to the pipecache binary")
    args = parser.parse_args()

    failures = 0
    print("cross-solver equivalence:")
    failures += run_case(args.cli, "tree:k=2,d=2,costs=uniform:1,sizes=uniform:1", 2)
    failures += run_case(
        args.cli, "tree:k=2,d=2,costs=twopoint:1:9:0.5,sizes=twopoint:1:3:0.5,seed=3",
        4)
    failures += run_case(
        args.cli, "tree:k=3,d=2,costs=root:50:1,sizes=uniform:2,seed=1", 6)
    failures += run_case(args.cli, "tree:k=2,d=2,costs=uniform:1,sizes=uniform:1", 0)
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all cross-solver checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
