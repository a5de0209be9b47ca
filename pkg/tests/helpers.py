"""Finite-difference oracles shared by the test modules."""
import numpy as np
import scipy.sparse as sp


def dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def fd_jacobian(fun, z, h=1e-6):
    """Central differences, one column per coordinate."""
    z = np.asarray(z, dtype=float)
    f0 = np.atleast_1d(fun(z))
    J = np.empty((f0.size, z.size))
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        J[:, i] = (np.atleast_1d(fun(z + e)) - np.atleast_1d(fun(z - e))) / (2 * h)
    return J


def fd_directional(fun, z, v, h=1e-6):
    return (np.atleast_1d(fun(z + h * v)) - np.atleast_1d(fun(z - h * v))) / (2 * h)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def stacked(problem):
    """Callbacks of ``problem`` as functions of the stacked vector ``[x; delta]``."""
    n = problem.n_cont

    def split(z):
        return z[:n], z[n:]

    return {
        "f": lambda z, t: problem.objective(*split(z), t),
        "g": lambda z, t: dense(problem.objective_grad(*split(z), t)).reshape(-1),
        "H": lambda z, t: dense(problem.objective_hess(*split(z), t)),
        "c": lambda z, t: np.asarray(problem.eq_constraints(*split(z), t), dtype=float),
        "J": lambda z, t: dense(problem.eq_jacobian(*split(z), t)),
        "C": lambda z, t, lam: dense(problem.eq_hessian(*split(z), t, lam)),
    }


def random_interior(problem, rng, spread=1.0):
    """Uniform point inside the box, infinite sides replaced by ``spread`` around 0."""
    lo = np.concatenate([problem.lower_bounds, np.zeros(problem.n_bin)])
    hi = np.concatenate([problem.upper_bounds, np.ones(problem.n_bin)])
    a = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi - 2 * spread, -spread))
    b = np.where(np.isfinite(hi), hi, a + 2 * spread)
    return a + (b - a) * rng.uniform(0.05, 0.95, size=a.size)
