"""Newton's method on the KKT system of the log-barrier problem.

For a relaxation with box ``lower < z < upper`` and equality constraints
``c(z, theta) = 0`` the residual is::

    F_mu(z, lam) = [ grad f + J^T lam - mu * b(z) ;  c(z, theta) ]

with ``b_i = 1/(z_i - l_i) - 1/(u_i - z_i)`` (terms dropped for infinite
bounds). The Jacobian is ``[[H + mu * diag(1/(z-l)^2 + 1/(u-z)^2), J^T], [J, 0]]``.

Iterates carry a compensation term ``x_lo`` next to ``x`` (two-sum updates),
so the slack to a nearby bound keeps full relative precision even when it is
far below the spacing of doubles around ``x``. Callbacks only see ``x``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import DivergedError, DomainError, Relaxation, SingularPointError

NEWTON_TOL = 1e-10
MAX_NEWTON_ITER = 50
SINGULAR_TOL = 1e-12
BOUNDARY_FRACTION = 0.995
RESIDUAL_SAFEGUARD = 1e4
DENSE_LIMIT = 400


@dataclass(frozen=True, eq=False)
class BarrierIterate:
    x: np.ndarray
    lam: np.ndarray
    mu: float
    theta: float
    newton_iters: int = 0
    residual_norm: float = float("nan")
    x_lo: np.ndarray = None

    def __post_init__(self):
        if self.x_lo is None:
            object.__setattr__(self, "x_lo", np.zeros_like(np.asarray(self.x, dtype=float)))
        if not self.mu > 0:
            raise DomainError(f"barrier parameter must be positive, got {self.mu}")
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"homotopy parameter must lie in [0, 1], got {self.theta}")

    def at(self, theta=None, mu=None):
        return replace(
            self,
            theta=self.theta if theta is None else theta,
            mu=self.mu if mu is None else mu,
            newton_iters=0,
            residual_norm=float("nan"),
        )


def advance(iterate: BarrierIterate, alpha, dz, dlam=None, **changes) -> BarrierIterate:
    """``x + alpha dz`` with the rounding error kept in ``x_lo``."""
    a, b = iterate.x, alpha * np.asarray(dz, dtype=float)
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    lo = iterate.x_lo + err
    x = s + lo
    lo = lo - (x - s)
    lam = iterate.lam if dlam is None else iterate.lam + alpha * np.asarray(dlam, dtype=float)
    return replace(iterate, x=x, x_lo=lo, lam=lam, **changes)


def _slacks(relaxation: Relaxation, z, z_lo=None):
    lo = z - relaxation.lower
    hi = relaxation.upper - z
    if z_lo is not None:
        lo = lo + z_lo
        hi = hi - z_lo
    if np.any(lo <= 0) or np.any(hi <= 0) or not np.all(np.isfinite(z)):
        raise DomainError("iterate is not strictly inside the box")
    return lo, hi


def barrier_gradient(relaxation, z, z_lo=None):
    lo, hi = _slacks(relaxation, z, z_lo)
    return 1.0 / lo - 1.0 / hi  # 1/inf == 0 for one-sided bounds


def barrier_diagonal(relaxation, z, z_lo=None):
    lo, hi = _slacks(relaxation, z, z_lo)
    return 1.0 / lo**2 + 1.0 / hi**2


def barrier_objective(relaxation, z, theta, mu, z_lo=None):
    lo, hi = _slacks(relaxation, z, z_lo)
    logs = np.log(lo[np.isfinite(lo)]).sum() + np.log(hi[np.isfinite(hi)]).sum()
    return relaxation.objective(z, theta) - mu * logs


def kkt_residual(relaxation: Relaxation, iterate: BarrierIterate) -> np.ndarray:
    z, lam = iterate.x, iterate.lam
    bg = barrier_gradient(relaxation, z, iterate.x_lo)
    stat = relaxation.gradient(z, iterate.theta) - iterate.mu * bg
    if relaxation.n_eq:
        stat = stat + relaxation.jacobian(z, iterate.theta).T @ lam
    return np.concatenate([stat, relaxation.constraints(z, iterate.theta)])


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def _diag_or(a, sparse):
    if np.ndim(a) == 1:
        return sp.diags(a) if sparse else np.diag(a)
    return sp.csc_matrix(a) if sparse else _dense(a)


def saddle_matrix(top_left, A, bottom_right=None):
    """``[[top_left, A^T], [A, bottom_right]]``, dense when small and sparse CSC otherwise.

    ``top_left`` and ``bottom_right`` may be given as 1-D diagonals.
    """
    n, m = top_left.shape[0], A.shape[0]
    if n + m <= DENSE_LIMIT:
        K = np.zeros((n + m, n + m))
        K[:n, :n] = _diag_or(top_left, False)
        if m:
            Ad = _dense(A)
            K[n:, :n] = Ad
            K[:n, n:] = Ad.T
            if bottom_right is not None:
                K[n:, n:] = _diag_or(bottom_right, False)
        return K
    tl = _diag_or(top_left, True)
    if not m:
        return sp.csc_matrix(tl)
    br = None if bottom_right is None else _diag_or(bottom_right, True)
    A = sp.csc_matrix(A)
    return sp.bmat([[tl, A.T], [A, br]], format="csc")


def kkt_jacobian(relaxation: Relaxation, iterate: BarrierIterate):
    """(n + l) x (n + l) Jacobian of :func:`kkt_residual` in ``(x, lam)``.

    Dense for small systems, sparse CSC otherwise (see :func:`saddle_matrix`).
    """
    z, lam = iterate.x, iterate.lam
    D = barrier_diagonal(relaxation, z, iterate.x_lo)
    H = relaxation.lagrangian_hessian(z, iterate.theta, lam)
    H = H + (sp.diags(iterate.mu * D) if sp.issparse(H) else np.diag(iterate.mu * D))
    return saddle_matrix(H, relaxation.jacobian(z, iterate.theta))


def _equilibrate(K):
    """Symmetric scaling ``S K S`` with ``S = 1/sqrt(max |row|)``, zero rows left alone."""
    if sp.issparse(K):
        K = sp.csc_matrix(K)
        rmax = abs(K).max(axis=1).toarray().ravel()
        cmax = abs(K).max(axis=0).toarray().ravel()
    else:
        K = np.asarray(K, dtype=float)
        rmax, cmax = np.abs(K).max(axis=1, initial=0.0), np.abs(K).max(axis=0, initial=0.0)
    scale = np.sqrt(np.maximum(rmax, cmax))
    scale[~(scale > 0)] = 1.0
    s = 1.0 / scale
    if sp.issparse(K):
        return sp.diags(s) @ K @ sp.diags(s), s
    return s[:, None] * K * s[None, :], s


class Factorization:
    """LU of a square matrix with a pivot-ratio singularity test.

    The matrix is equilibrated symmetrically first, then factored by dense
    partial-pivoting LU below ``DENSE_LIMIT`` unknowns and by SuperLU above.
    """

    def __init__(self, K, singular_tol=SINGULAR_TOL):
        n = K.shape[0]
        self.dense = n <= DENSE_LIMIT
        K, self._scale = _equilibrate(K)
        if self.dense:
            A = _dense(K)
            if not np.all(np.isfinite(A)):
                raise SingularPointError("non-finite entries in KKT matrix")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", la.LinAlgWarning)
                self._lu = la.lu_factor(A, check_finite=False)
            pivots = np.abs(np.diag(self._lu[0]))
        else:
            try:
                self._lu = spla.splu(sp.csc_matrix(K), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularPointError(str(exc)) from exc
            pivots = np.abs(self._lu.U.diagonal())
        top = pivots.max() if pivots.size else 1.0
        self.pivot_ratio = pivots.min() / top if pivots.size and top > 0 else 0.0
        if n and not self.pivot_ratio >= singular_tol:
            raise SingularPointError(f"KKT matrix is numerically singular (pivot ratio {self.pivot_ratio:.3e})")

    def solve(self, rhs):
        rhs = self._scale * np.asarray(rhs, dtype=float)
        if self.dense:
            out = la.lu_solve(self._lu, rhs, check_finite=False)
        else:
            out = self._lu.solve(rhs)
        return self._scale * out


def fraction_to_boundary(relaxation, z, dz, tau=BOUNDARY_FRACTION, z_lo=None):
    """Largest step in (0, 1] keeping ``z + a dz`` at least (1 - tau) of the way off each bound."""
    alpha = 1.0
    lo = z - relaxation.lower
    hi = relaxation.upper - z
    if z_lo is not None:
        lo, hi = lo + z_lo, hi - z_lo
    dec = dz < 0
    inc = dz > 0
    with np.errstate(over="ignore"):  # denormal steps overflow to inf, which never binds
        if np.any(dec & np.isfinite(lo)):
            m = dec & np.isfinite(lo)
            alpha = min(alpha, np.min(tau * lo[m] / -dz[m]))
        if np.any(inc & np.isfinite(hi)):
            m = inc & np.isfinite(hi)
            alpha = min(alpha, np.min(tau * hi[m] / dz[m]))
    return float(alpha)


def newton_solve(
    relaxation: Relaxation,
    start: BarrierIterate,
    tol=NEWTON_TOL,
    max_iter=MAX_NEWTON_ITER,
    singular_tol=SINGULAR_TOL,
    fraction=BOUNDARY_FRACTION,
    safeguard=RESIDUAL_SAFEGUARD,
) -> BarrierIterate:
    """Full Newton steps capped by the fraction-to-the-boundary rule."""
    n = relaxation.n
    it = start
    F = kkt_residual(relaxation, it)
    norm0 = norm = np.linalg.norm(F, np.inf)
    if norm <= tol:
        return replace(it, newton_iters=0, residual_norm=norm)
    for k in range(1, max_iter + 1):
        fac = Factorization(kkt_jacobian(relaxation, it), singular_tol)
        step = fac.solve(-F)
        if not np.all(np.isfinite(step)):
            raise SingularPointError("Newton step is not finite")
        dz, dlam = step[:n], step[n:]
        alpha = fraction_to_boundary(relaxation, it.x, dz, fraction, it.x_lo)
        it = advance(it, alpha, dz, dlam)
        F = kkt_residual(relaxation, it)
        norm = np.linalg.norm(F, np.inf)
        if not np.isfinite(norm) or norm > safeguard * max(norm0, tol):
            raise DivergedError(f"KKT residual grew to {norm:.3e} (start {norm0:.3e})")
        if norm <= tol:
            return replace(it, newton_iters=k, residual_norm=norm)
    raise DivergedError(f"no convergence in {max_iter} Newton iterations (residual {norm:.3e})")
