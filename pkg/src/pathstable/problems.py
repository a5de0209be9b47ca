"""Small analytic test problems and the big-M / slack building blocks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ContractViolation, ParametricMINLP


@dataclass(frozen=True)
class InequalityBlock:
    """``lo(delta) <= x[var] <= hi(delta)`` with bounds affine in one binary.

    ``lo(delta) = lo_const + lo_coef * delta[binary]`` and likewise for ``hi``.
    """

    var_index: int
    lo_const: float
    hi_const: float
    lo_coef: float = 0.0
    hi_coef: float = 0.0
    binary_index: Optional[int] = None

    def lo(self, delta=None):
        return self.lo_const + (self.lo_coef * delta[self.binary_index] if self.binary_index is not None else 0.0)

    def hi(self, delta=None):
        return self.hi_const + (self.hi_coef * delta[self.binary_index] if self.binary_index is not None else 0.0)


@dataclass(frozen=True)
class SlackBlock:
    """Equality form ``x - lo(delta) - s_lo = 0`` and ``hi(delta) - x - s_hi = 0``, slacks >= 0."""

    block: InequalityBlock
    slack_lo_index: int
    slack_hi_index: int

    def slack_values(self, x, delta=None):
        v = x[self.block.var_index]
        return v - self.block.lo(delta), self.block.hi(delta) - v

    def residuals(self, x, delta=None):
        b = self.block
        v = x[b.var_index]
        return np.array([
            v - b.lo(delta) - x[self.slack_lo_index],
            b.hi(delta) - v - x[self.slack_hi_index],
        ])

    def jacobian(self, n_cont, n_bin):
        """Constant 2 x (n_cont + n_bin) Jacobian in ``[x; delta]``."""
        b = self.block
        J = np.zeros((2, n_cont + n_bin))
        J[0, b.var_index] = 1.0
        J[0, self.slack_lo_index] = -1.0
        J[1, b.var_index] = -1.0
        J[1, self.slack_hi_index] = -1.0
        if b.binary_index is not None:
            J[0, n_cont + b.binary_index] = -b.lo_coef
            J[1, n_cont + b.binary_index] = b.hi_coef
        return J


def slackify(block: InequalityBlock, slack_lo_index: int, slack_hi_index: int) -> SlackBlock:
    if not (np.isfinite(block.lo_const) and np.isfinite(block.hi_const)):
        raise ContractViolation("slack transformation needs finite bounds")
    return SlackBlock(block, slack_lo_index, slack_hi_index)


@dataclass(frozen=True)
class BigMBlock:
    """Disjunction ``x <= upper_off`` (delta = 0) or ``x >= lower_on`` (delta = 1).

    Encoded as ``lower_on - M (1 - delta) <= x <= upper_off + M delta``. ``M``
    must strictly exceed what is needed to relax each side over the box, so a
    relaxed side never coincides with a box bound.
    """

    var_index: int
    big_m: float
    binary_index: int
    upper_off: float
    lower_on: float
    box: tuple

    def __post_init__(self):
        lo, hi = self.box
        need = max(self.lower_on - lo, hi - self.upper_off)
        if not self.big_m > need:
            raise ContractViolation(f"big-M {self.big_m} does not cover the box {self.box} (need > {need})")

    def inequality(self) -> InequalityBlock:
        return InequalityBlock(
            var_index=self.var_index,
            lo_const=self.lower_on - self.big_m,
            lo_coef=self.big_m,
            hi_const=self.upper_off,
            hi_coef=self.big_m,
            binary_index=self.binary_index,
        )


def build_unit_circle(upper=10.0) -> ParametricMINLP:
    """Maximise x1 on the blended unit circle with x1 >= 0.5 and binary delta1.

    Constraint: ``(1 - t)(x1 + d1) + t (x1^2 + d1^2) - 1 = 0``. The open side
    of x1 is capped at ``upper``; the circle keeps x1 <= 1 for t > 0.
    """

    def f(x, d, t):
        return x[0]

    def grad(x, d, t):
        return np.array([1.0, 0.0])

    def hess(x, d, t):
        return np.zeros((2, 2))

    def c(x, d, t):
        return np.array([(1 - t) * (x[0] + d[0]) + t * (x[0] ** 2 + d[0] ** 2) - 1.0])

    def jac(x, d, t):
        return np.array([[(1 - t) + 2 * t * x[0], (1 - t) + 2 * t * d[0]]])

    def chess(x, d, t, lam):
        return 2 * t * lam[0] * np.eye(2)

    return ParametricMINLP.maximize(
        f, grad, hess,
        n_cont=1, n_bin=1, n_eq=1,
        eq_constraints=c, eq_jacobian=jac, eq_hessian=chess,
        lower_bounds=[0.5], upper_bounds=[upper],
        name="example1",
    )


def build_parabola(M=5.0) -> ParametricMINLP:
    """Pick the lower of two parabola branches selected by a big-M binary.

    Variables ``x = (x1, x2, x3, s1, s2)``, binary ``delta1``::

        min 0.001 x2 + x3^2
        (1 - t) x1 + t x1^2 - x2 - x3 = 0
        x1 - (2 - M (1 - d1)) - s1 = 0
        (-1 + M d1) - x1 - s2 = 0
        -2 <= x1 <= 3, -1 <= x3 <= 1, s >= 0
    """
    if M < 5:
        raise ContractViolation("M must be at least 5 to cover x1 in [-2, 3]")
    bigm = BigMBlock(var_index=0, big_m=float(M), binary_index=0, upper_off=-1.0, lower_on=2.0, box=(-2.0, 3.0))
    slack = slackify(bigm.inequality(), slack_lo_index=3, slack_hi_index=4)
    J_slack = slack.jacobian(5, 1)

    def f(x, d, t):
        return 0.001 * x[1] + x[2] ** 2

    def grad(x, d, t):
        return np.array([0.0, 0.001, 2 * x[2], 0.0, 0.0, 0.0])

    def hess(x, d, t):
        H = np.zeros((6, 6))
        H[2, 2] = 2.0
        return H

    def c(x, d, t):
        parabola = (1 - t) * x[0] + t * x[0] ** 2 - x[1] - x[2]
        return np.concatenate([[parabola], slack.residuals(x, d)])

    def jac(x, d, t):
        J = np.zeros((3, 6))
        J[0, 0] = (1 - t) + 2 * t * x[0]
        J[0, 1] = -1.0
        J[0, 2] = -1.0
        J[1:] = J_slack
        return J

    def chess(x, d, t, lam):
        H = np.zeros((6, 6))
        H[0, 0] = 2 * t * lam[0]
        return H

    inf = np.inf
    return ParametricMINLP(
        n_cont=5, n_bin=1, n_eq=3,
        objective=f, objective_grad=grad, objective_hess=hess,
        eq_constraints=c, eq_jacobian=jac, eq_hessian=chess,
        lower_bounds=[-2.0, -inf, -1.0, 0.0, 0.0],
        upper_bounds=[3.0, inf, 1.0, inf, inf],
        name="example2",
        metadata={"big_m": bigm, "slack": slack},
    )
