"""Build the frozen reference values used by the test suite.

Independent of the solver: the parabola example is solved by brute force on a
grid and refined with a bounded local search, and the unit-circle KKT residual
is evaluated symbolically with sympy. Output: tests/oracles/*.json.
"""
import json
import pathlib

import numpy as np
import sympy
from scipy.optimize import minimize

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "oracles"


def parabola_branch(x1_lo, x1_hi, step=1e-4):
    """min 0.001 x2 + x3^2 with x2 = x1^2 - x3 eliminated, over a box in (x1, x3)."""
    x1 = np.arange(x1_lo, x1_hi + step / 2, step)
    x3 = np.arange(-1.0, 1.0 + step / 2, step)
    best = (np.inf, None)
    for i in range(0, len(x1), 500):  # chunks keep memory small
        X1, X3 = np.meshgrid(x1[i:i + 500], x3, indexing="ij")
        F = 0.001 * (X1**2 - X3) + X3**2
        k = np.unravel_index(np.argmin(F), F.shape)
        if F[k] < best[0]:
            best = (float(F[k]), (float(X1[k]), float(X3[k])))

    def f(v):
        return 0.001 * (v[0] ** 2 - v[1]) + v[1] ** 2

    res = minimize(f, best[1], bounds=[(x1_lo, x1_hi), (-1.0, 1.0)], method="L-BFGS-B", tol=1e-16,
                   options={"ftol": 1e-16, "gtol": 1e-14})
    x1s, x3s = (float(v) for v in res.x)
    return {"grid_objective": best[0], "grid_point": best[1], "x1": x1s, "x3": x3s,
            "x2": x1s**2 - x3s, "objective": float(res.fun)}


def unit_circle_kkt():
    """Barrier KKT residual of the relaxed unit-circle problem at fixed points."""
    x1, d, lam, mu, th = sympy.symbols("x1 d lam mu theta", real=True)
    lo = (sympy.Rational(1, 2), 0)
    hi = (10, 1)
    f = -x1
    c = (1 - th) * (x1 + d) + th * (x1**2 + d**2) - 1
    L = f + lam * c
    out = []
    for pt in ({x1: 0.7, d: 0.2, lam: 0.3, mu: 0.01, th: 0.0},
               {x1: 1.3, d: 0.6, lam: -0.4, mu: 0.05, th: 0.5},
               {x1: 0.9, d: 0.1, lam: 1.1, mu: 1e-3, th: 1.0}):
        stat = [sympy.diff(L, v) - mu * (1 / (v - a) - 1 / (b - v)) for v, a, b in zip((x1, d), lo, hi)]
        res = [float(e.subs(pt)) for e in stat] + [float(c.subs(pt))]
        out.append({"point": {str(k): float(v) for k, v in pt.items()}, "residual": res})
    return out


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    left = parabola_branch(-2.0, -1.0)
    right = parabola_branch(2.0, 3.0)
    (OUT / "example2_grid.json").write_text(json.dumps({"left": left, "right": right}, indent=2, sort_keys=True) + "\n")
    (OUT / "example1_kkt.json").write_text(json.dumps(unit_circle_kkt(), indent=2, sort_keys=True) + "\n")
    print(json.dumps({"left": left, "right": right}, indent=2))


if __name__ == "__main__":
    main()
