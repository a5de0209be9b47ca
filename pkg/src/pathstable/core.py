"""Problem representation, node assignments and the relaxation operator.

A :class:`ParametricMINLP` is stored in minimisation form::

    min  f(x, delta, theta)
    s.t. c(x, delta, theta) = 0
         D delta = e
         lower <= x <= upper
         delta in {0, 1}

All derivative callbacks are taken with respect to the stacked vector
``[x; delta]``. The :func:`relax` operator turns a partial binary assignment
into a continuous problem over ``[x; delta_free]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp


class PathstableError(Exception):
    pass


class DomainError(PathstableError, ValueError):
    """An iterate touches or leaves the open box, or a model quantity left its domain."""


class ContractViolation(PathstableError, ValueError):
    pass


class DivergedError(PathstableError):
    pass


class SingularPointError(PathstableError):
    pass


class InfeasibleError(PathstableError):
    pass


class NoSolutionError(PathstableError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    SINGULAR_POINT = "SingularPoint"
    DIVERGED = "Diverged"


class IntFeasibility(str, enum.Enum):
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


def _as_matrix(mat, shape):
    """Sparse callbacks stay sparse (CSC), dense ones become float arrays."""
    out = mat.tocsc() if sp.issparse(mat) else np.asarray(mat, dtype=float)
    if out.shape != shape:
        raise ContractViolation(f"callback returned shape {out.shape}, expected {shape}")
    return out


@dataclass(frozen=True, eq=False)
class ParametricMINLP:
    """Mixed-integer problem in minimisation form with analytic derivatives.

    ``int_matrix``/``int_rhs`` encode the integer-only constraints
    ``int_matrix @ delta == int_rhs``; only linear integer constraints are
    representable.
    """

    n_cont: int
    n_bin: int
    n_eq: int
    objective: Callable
    objective_grad: Callable
    objective_hess: Callable
    eq_constraints: Callable
    eq_jacobian: Callable
    eq_hessian: Callable  # (x, delta, theta, lam) -> sum_k lam_k * hess c_k
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    int_matrix: Optional[np.ndarray] = None
    int_rhs: Optional[np.ndarray] = None
    initial_guess: Optional[np.ndarray] = None
    warm_start: Optional[Callable] = None  # (delta, theta) -> x, a Phase-I starting point
    sense: str = "min"
    name: str = "problem"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = np.asarray(self.lower_bounds, dtype=float).reshape(-1)
        hi = np.asarray(self.upper_bounds, dtype=float).reshape(-1)
        if lo.shape != (self.n_cont,) or hi.shape != (self.n_cont,):
            raise ContractViolation("bounds must have length n_cont")
        if not np.all(lo < hi):
            raise ContractViolation("lower_bounds must be strictly below upper_bounds")
        if np.any(np.isinf(lo) & (lo > 0)) or np.any(np.isinf(hi) & (hi < 0)):
            raise ContractViolation("bounds point the wrong way")
        object.__setattr__(self, "lower_bounds", lo)
        object.__setattr__(self, "upper_bounds", hi)
        if self.sense != "min":
            raise ContractViolation("problems are stored in minimisation form; use maximize()")
        if self.int_matrix is None:
            D = np.zeros((0, self.n_bin))
            e = np.zeros(0)
        else:
            if callable(self.int_matrix) or sp.issparse(self.int_matrix):
                raise ContractViolation("integer constraints must be given as a dense linear system")
            D = np.atleast_2d(np.asarray(self.int_matrix, dtype=float))
            e = np.asarray(self.int_rhs, dtype=float).reshape(-1)
            if D.shape[1] != self.n_bin or D.shape[0] != e.shape[0]:
                raise ContractViolation("int_matrix must be (r, n_bin) with matching int_rhs")
        object.__setattr__(self, "int_matrix", D)
        object.__setattr__(self, "int_rhs", e)
        if self.initial_guess is not None:
            g = np.asarray(self.initial_guess, dtype=float).reshape(-1)
            if g.shape != (self.n_cont,):
                raise ContractViolation("initial_guess must have length n_cont")
            object.__setattr__(self, "initial_guess", g)

    @classmethod
    def maximize(cls, objective, objective_grad, objective_hess, **kwargs):
        """Build from a maximisation objective by negating it."""
        return cls(
            objective=lambda x, d, t: -objective(x, d, t),
            objective_grad=lambda x, d, t: -np.asarray(objective_grad(x, d, t)),
            objective_hess=lambda x, d, t: -objective_hess(x, d, t),
            **kwargs,
        )

    @property
    def n_vars(self):
        return self.n_cont + self.n_bin

    def int_residual(self, delta):
        return self.int_matrix @ np.asarray(delta, dtype=float) - self.int_rhs


class NodeAssignment(tuple):
    """Partial binary assignment; entries are 0, 1 or ``None`` (free).

    The string form uses ``'0'``, ``'1'`` and ``'x'`` for free entries.
    """

    def __new__(cls, values=()):
        vals = []
        for v in values:
            if v is None:
                vals.append(None)
            elif v in (0, 1):
                vals.append(int(v))
            else:
                raise ContractViolation(f"invalid binary status {v!r}")
        return super().__new__(cls, vals)

    @classmethod
    def root(cls, n_bin):
        return cls([None] * n_bin)

    @classmethod
    def parse(cls, text):
        table = {"0": 0, "1": 1, "x": None, "X": None, "*": None, "-": None}
        try:
            return cls([table[ch] for ch in text.strip()])
        except KeyError as exc:
            raise ContractViolation(f"invalid node string {text!r}") from exc

    @property
    def free_indices(self):
        return [i for i, v in enumerate(self) if v is None]

    @property
    def is_leaf(self):
        return all(v is not None for v in self)

    @property
    def depth(self):
        return sum(v is not None for v in self)

    def extends(self, other):
        """True when every fixing of ``other`` is also made (identically) here."""
        return len(self) == len(other) and all(o is None or s == o for s, o in zip(self, other))

    def bitmask(self):
        return "".join("x" if v is None else str(v) for v in self)

    def __repr__(self):
        return f"NodeAssignment({self.bitmask()!r})"


@dataclass(frozen=True, eq=False)
class Relaxation:
    """Continuous problem over ``z = [x; delta_free]`` (build it with :func:`relax`).

    ``domains`` holds one ``(lo, hi)`` pair per binary; ``lo == hi`` means the
    binary is fixed to that point value.
    """

    problem: ParametricMINLP
    domains: tuple

    @cached_property
    def free_index(self):
        return np.array([i for i, (lo, hi) in enumerate(self.domains) if lo < hi], dtype=int)

    @cached_property
    def _point_delta(self):
        return np.array([lo for lo, _ in self.domains], dtype=float)

    @cached_property
    def _columns(self):
        p = self.problem
        return np.concatenate([np.arange(p.n_cont), p.n_cont + self.free_index])

    @property
    def n(self):
        return self.problem.n_cont + len(self.free_index)

    @property
    def n_eq(self):
        return self.problem.n_eq

    @cached_property
    def lower(self):
        lo = [self.domains[i][0] for i in self.free_index]
        return np.concatenate([self.problem.lower_bounds, np.array(lo, dtype=float)])

    @cached_property
    def upper(self):
        hi = [self.domains[i][1] for i in self.free_index]
        return np.concatenate([self.problem.upper_bounds, np.array(hi, dtype=float)])

    def split(self, z):
        z = np.asarray(z, dtype=float)
        nc = self.problem.n_cont
        delta = self._point_delta.copy()
        delta[self.free_index] = z[nc:]
        return z[:nc], delta

    def join(self, x, delta):
        return np.concatenate([np.asarray(x, dtype=float), np.asarray(delta, dtype=float)[self.free_index]])

    def objective(self, z, theta):
        x, d = self.split(z)
        return float(self.problem.objective(x, d, theta))

    def gradient(self, z, theta):
        x, d = self.split(z)
        return np.asarray(self.problem.objective_grad(x, d, theta), dtype=float).reshape(-1)[self._columns]

    def constraints(self, z, theta):
        x, d = self.split(z)
        return np.asarray(self.problem.eq_constraints(x, d, theta), dtype=float).reshape(-1)

    def jacobian(self, z, theta):
        x, d = self.split(z)
        p = self.problem
        J = _as_matrix(p.eq_jacobian(x, d, theta), (p.n_eq, p.n_vars))
        return J[:, self._columns]

    def lagrangian_hessian(self, z, theta, lam):
        """Hessian of ``f + lam^T c`` in ``z`` (no barrier term)."""
        x, d = self.split(z)
        p = self.problem
        shape = (p.n_vars, p.n_vars)
        H = _as_matrix(p.objective_hess(x, d, theta), shape)
        if p.n_eq:
            C = _as_matrix(p.eq_hessian(x, d, theta, np.asarray(lam, dtype=float)), shape)
            H = sp.csc_matrix(H) + C if sp.issparse(C) and not sp.issparse(H) else H + C
            if isinstance(H, np.matrix):
                H = np.asarray(H)
        cols = self._columns
        if sp.issparse(H):
            return H.tocsr()[cols][:, cols].tocsc()
        return H[np.ix_(cols, cols)]

    def initial_point(self):
        """A point inside the box: midpoints, offsets from one-sided bounds, or the guess.

        A problem's ``warm_start`` hook, when present, supplies the continuous
        part from the binary midpoints at ``theta = 0``.
        """
        lo, hi = self.lower, self.upper
        z = np.zeros(self.n)
        p = self.problem
        if p.warm_start is not None:
            delta = self._point_delta.copy()
            delta[self.free_index] = 0.5 * (lo[p.n_cont:] + hi[p.n_cont:])
            z[: p.n_cont] = np.asarray(p.warm_start(delta, 0.0), dtype=float).reshape(-1)
        elif p.initial_guess is not None:
            z[: p.n_cont] = p.initial_guess
        both = np.isfinite(lo) & np.isfinite(hi)
        z[both] = 0.5 * (lo[both] + hi[both])
        only_lo = np.isfinite(lo) & ~np.isfinite(hi)
        z[only_lo] = np.maximum(z[only_lo], lo[only_lo] + 1.0)
        only_hi = ~np.isfinite(lo) & np.isfinite(hi)
        z[only_hi] = np.minimum(z[only_hi], hi[only_hi] - 1.0)
        return z


def relax(problem: ParametricMINLP, node: Sequence) -> Relaxation:
    """Fixed binaries become point values, free ones the interval [0, 1]."""
    if len(node) != problem.n_bin:
        raise ContractViolation(f"node has {len(node)} entries, problem has {problem.n_bin} binaries")
    domains = []
    for v in node:
        if v is None:
            domains.append((0.0, 1.0))
        elif isinstance(v, tuple):
            lo, hi = float(v[0]), float(v[1])
            if not 0.0 <= lo <= hi <= 1.0:
                raise ContractViolation(f"binary domain {v} is not a subset of [0, 1]")
            domains.append((lo, hi))
        else:
            domains.append((float(v), float(v)))
    return Relaxation(problem, tuple(domains))


def check_integer_feasible(problem: ParametricMINLP, node: Sequence, tol=1e-9) -> IntFeasibility:
    """Interval propagation of ``D delta = e`` over the free entries."""
    D, e = problem.int_matrix, problem.int_rhs
    if D.shape[0] == 0:
        return IntFeasibility.UNKNOWN
    fixed = np.array([0.0 if v is None else float(v) for v in node])
    free = np.array([v is None for v in node])
    base = D[:, ~free] @ fixed[~free]
    Df = D[:, free]
    lo = base + np.minimum(Df, 0.0).sum(axis=1)
    hi = base + np.maximum(Df, 0.0).sum(axis=1)
    if np.any(e < lo - tol) or np.any(e > hi + tol):
        return IntFeasibility.INFEASIBLE
    return IntFeasibility.UNKNOWN


@dataclass
class SolveReport:
    status: Status
    objective: float = float("inf")
    x: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    multipliers: Optional[np.ndarray] = None
    kkt_residual: float = float("nan")
    mu: float = float("nan")
    iterations: dict = field(default_factory=dict)
    nodes_visited: int = 0
    lower_bound: float = float("nan")
    warnings: int = 0
    message: str = ""
    trace: object = None
    node_log: list = field(default_factory=list)
    leaf_table: list = field(default_factory=list)
    incumbent_history: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status is Status.OPTIMAL

    def delta_bits(self):
        if self.delta is None:
            return ""
        return "".join(str(int(round(v))) for v in self.delta)
