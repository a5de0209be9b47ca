"""Run branch-and-bound and the exhaustive enumeration side by side and audit pruning.

Usage: python scripts/audit_pruning.py {example1,example2,river} [--horizon-hours H]

Prints every pruned node with the smallest leaf value below it, then the
number of violations of ``C(pruned) <= min leaf + 1e-8``.
"""
import argparse
import math

from pathstable.bnb import audit_pruning, enumerate_exhaustive, solve_bnb
from pathstable.core import NodeAssignment
from pathstable.hydro import CascadeModel, build_river_problem
from pathstable.problems import build_parabola, build_unit_circle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem", choices=("example1", "example2", "river"))
    ap.add_argument("--horizon-hours", type=float, default=8.0)
    args = ap.parse_args()
    if args.problem == "example1":
        p = build_unit_circle()
    elif args.problem == "example2":
        p = build_parabola()
    else:
        p = build_river_problem(1, CascadeModel.default(1).with_horizon(args.horizon_hours))

    bnb = solve_bnb(p)
    enum = enumerate_exhaustive(p)
    print(f"bnb  {bnb.delta_bits()} {bnb.objective!r} nodes={bnb.nodes_visited}")
    print(f"enum {enum.delta_bits()} {enum.objective!r} leaves={enum.nodes_visited}")
    for rec in bnb.node_log:
        if not rec.pruned:
            continue
        node = NodeAssignment.parse(rec.assignment)
        below = [row["objective"] for row in enum.leaf_table if NodeAssignment.parse(row["assignment"]).extends(node)]
        best = min(below, default=math.inf)
        print(f"pruned {rec.assignment} ({rec.action}) C={rec.value!r} min leaf below={best!r}")
    bad = audit_pruning(bnb, enum)
    print(f"violations: {len(bad)}")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
