"""Global solution of a relaxation by homotopy continuation.

Pipeline: Phase-I interior point at theta = 0, the convex barrier problem at
``theta = 0`` and ``mu0``, predictor-corrector tracing in theta at fixed ``mu0``,
then barrier reduction at ``theta = 1`` down to ``mu_min``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .barrier import (
    BarrierIterate,
    Factorization,
    barrier_gradient,
    barrier_diagonal,
    barrier_objective,
    advance,
    fraction_to_boundary,
    kkt_jacobian,
    kkt_residual,
    newton_solve,
    saddle_matrix,
)
from .core import (
    ContractViolation,
    DivergedError,
    DomainError,
    InfeasibleError,
    PathstableError,
    Relaxation,
    SingularPointError,
    SolveReport,
    Status,
)

PHASE_ONE_TOL = 1e-8


@dataclass(frozen=True)
class ContinuationSchedule:
    mu0: float = 1e-2
    mu_min: float = 1e-9
    sigma: float = 0.2
    dtheta0: float = 0.1
    dtheta_min: float = 1e-6
    grow: float = 2.0
    shrink: float = 0.5
    newton_tol: float = 1e-10
    max_newton_iter: int = 50
    singular_tol: float = 1e-12

    def __post_init__(self):
        if not 0 < self.mu_min < self.mu0:
            raise ContractViolation("need 0 < mu_min < mu0")
        if not 0 < self.sigma < 1:
            raise ContractViolation("sigma must lie in (0, 1)")
        if not 0 < self.dtheta_min <= self.dtheta0 <= 1:
            raise ContractViolation("need 0 < dtheta_min <= dtheta0 <= 1")
        if not self.grow >= 1 or not 0 < self.shrink < 1:
            raise ContractViolation("need grow >= 1 and 0 < shrink < 1")
        if not self.newton_tol > 0 or self.max_newton_iter < 1:
            raise ContractViolation("invalid Newton settings")

    def newton_kwargs(self):
        return dict(tol=self.newton_tol, max_iter=self.max_newton_iter, singular_tol=self.singular_tol)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    theta: float
    mu: float
    objective: float
    residual_norm: float
    newton_iters: int


@dataclass
class PathTrace:
    records: list = field(default_factory=list)

    def add(self, relaxation, iterate):
        self.records.append(
            TraceRecord(
                step=len(self.records),
                theta=float(iterate.theta),
                mu=float(iterate.mu),
                objective=relaxation.objective(iterate.x, iterate.theta),
                residual_norm=float(iterate.residual_norm),
                newton_iters=int(iterate.newton_iters),
            )
        )

    def __len__(self):
        return len(self.records)

    COLUMNS = ("step", "theta", "mu", "objective", "residual_norm", "newton_iters")

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.records:
            w.writerow([r.step, repr(r.theta), repr(r.mu), repr(r.objective), repr(r.residual_norm), r.newton_iters])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class PathFailure(PathstableError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


def _interior(relaxation, z, margin=0.0):
    """Strict interiority; ``margin`` is relative to min(1, half the box width)."""
    width = relaxation.upper - relaxation.lower
    m = margin * np.minimum(1.0, 0.5 * width)
    return bool(np.all(z - relaxation.lower > m) and np.all(relaxation.upper - z > m))


def _project(relaxation, z, reg=1e-12, sweeps=5):
    """Minimum-norm correction onto ``c(z, 0) = 0`` (Gauss-Newton sweeps).

    Returns ``None`` when a sweep leaves the domain of the constraint callbacks.
    """
    for _ in range(sweeps):
        try:
            r = relaxation.constraints(z, 0.0)
        except DomainError:
            return None
        if np.linalg.norm(r, np.inf) < PHASE_ONE_TOL:
            break
        A = relaxation.jacobian(z, 0.0)
        n, m = relaxation.n, relaxation.n_eq
        K = saddle_matrix(np.ones(n), A, np.full(m, -reg))
        sol = Factorization(K, singular_tol=0.0).solve(np.concatenate([np.zeros(n), -r]))
        z = z + sol[:n]
    return z


def _accept(relaxation, z, tol, margin):
    if z is None or not _interior(relaxation, z, margin):
        return False
    return np.linalg.norm(relaxation.constraints(z, 0.0), np.inf) < tol


def phase_one(relaxation: Relaxation, tol=PHASE_ONE_TOL, mu_start=1.0, mu_floor=1e-14, max_inner=60, margin=1e-3):
    """Strictly interior point with ``|c(z, 0)|_inf < tol``.

    Minimises ``0.5 |c(z, 0)|^2`` under the log barrier with a decreasing
    barrier weight, trying a projection onto the constraints after every
    stage. A projected point is accepted once it keeps ``margin`` away from
    the bounds; after the last stage any strictly interior projection is
    accepted. Raises :class:`InfeasibleError` otherwise.
    """
    z = relaxation.initial_point()
    if relaxation.n_eq == 0:
        return z
    zp = _project(relaxation, z)
    if _accept(relaxation, zp, tol, margin):
        return zp
    n, m = relaxation.n, relaxation.n_eq
    lo_fin = np.isfinite(relaxation.lower)
    hi_fin = np.isfinite(relaxation.upper)

    def merit(v, mu):
        r = relaxation.constraints(v, 0.0)
        s_lo = v[lo_fin] - relaxation.lower[lo_fin]
        s_hi = relaxation.upper[hi_fin] - v[hi_fin]
        return 0.5 * r @ r - mu * (np.log(s_lo).sum() + np.log(s_hi).sum())

    mu = mu_start
    while mu >= mu_floor:
        for _ in range(max_inner):
            r = relaxation.constraints(z, 0.0)
            A = relaxation.jacobian(z, 0.0)
            g_bar = -mu * barrier_gradient(relaxation, z)
            grad = A.T @ r + g_bar
            K = saddle_matrix(mu * barrier_diagonal(relaxation, z) + 1e-12, A, -np.ones(m))
            sol = Factorization(K, singular_tol=0.0).solve(np.concatenate([-g_bar, -r]))
            dz = sol[:n]
            slope = grad @ dz
            if not np.isfinite(slope) or slope > -1e-16 * max(1.0, abs(merit(z, mu))):
                break
            alpha = fraction_to_boundary(relaxation, z, dz)
            f0 = merit(z, mu)
            while alpha > 1e-12 and not merit(z + alpha * dz, mu) <= f0 + 1e-4 * alpha * slope:
                alpha *= 0.5
            if alpha <= 1e-12:
                break
            z = z + alpha * dz
        zp = _project(relaxation, z)
        if _accept(relaxation, zp, tol, margin):
            return zp
        mu *= 0.1
    if _accept(relaxation, zp, tol, 0.0):
        return zp
    resid = np.linalg.norm(relaxation.constraints(z, 0.0), np.inf)
    raise InfeasibleError(f"no strictly interior point with c(z, 0) = 0 (best residual {resid:.3e})")


def _least_squares_multipliers(relaxation, z, theta, mu):
    g = relaxation.gradient(z, theta) - mu * barrier_gradient(relaxation, z)
    if relaxation.n_eq == 0:
        return np.zeros(0)
    A = relaxation.jacobian(z, theta)
    n, m = relaxation.n, relaxation.n_eq
    K = saddle_matrix(np.ones(n), A, np.full(m, -1e-12))
    sol = Factorization(K, singular_tol=0.0).solve(np.concatenate([-g, np.zeros(m)]))
    return sol[n:]


def solve_zero_problem(relaxation: Relaxation, mu0=1e-2, schedule=None) -> BarrierIterate:
    """Solve the convex barrier problem at ``theta = 0`` from a Phase-I point.

    The problem is convex with linear constraints, so Newton steps are damped
    by backtracking on the barrier objective until the full step is accepted.
    """
    schedule = schedule or ContinuationSchedule(mu0=mu0)
    z = phase_one(relaxation)
    lam = _least_squares_multipliers(relaxation, z, 0.0, mu0)
    it = BarrierIterate(z, lam, mu0, 0.0)
    n = relaxation.n
    F = kkt_residual(relaxation, it)
    norm = np.linalg.norm(F, np.inf)
    iters = 0
    limit = 4 * schedule.max_newton_iter
    while norm > schedule.newton_tol:
        if iters >= limit:
            raise DivergedError(f"theta = 0 problem did not converge (residual {norm:.3e})")
        fac = Factorization(kkt_jacobian(relaxation, it), schedule.singular_tol)
        step = fac.solve(-F)
        dz, dlam = step[:n], step[n:]
        alpha = fraction_to_boundary(relaxation, it.x, dz, z_lo=it.x_lo)
        grad = relaxation.gradient(it.x, 0.0) - mu0 * barrier_gradient(relaxation, it.x, it.x_lo)
        slope = grad @ dz
        if slope < 0:
            phi0 = barrier_objective(relaxation, it.x, 0.0, mu0, it.x_lo)
            while alpha > 1e-14:
                trial = advance(it, alpha, dz)
                try:
                    if barrier_objective(relaxation, trial.x, 0.0, mu0, trial.x_lo) <= phi0 + 1e-4 * alpha * slope:
                        break
                except DomainError:
                    pass
                alpha *= 0.5
        it = replace(advance(it, alpha, dz), lam=it.lam + dlam)
        F = kkt_residual(relaxation, it)
        norm = np.linalg.norm(F, np.inf)
        iters += 1
    return replace(it, newton_iters=iters, residual_norm=norm)


def trace_path(relaxation: Relaxation, start: BarrierIterate, schedule=None):
    """Predictor-corrector continuation from ``start.theta`` to 1 at fixed mu.

    Returns ``(iterate at theta = 1, PathTrace)``; raises :class:`PathFailure`
    when the step falls below ``dtheta_min``.
    """
    schedule = schedule or ContinuationSchedule()
    trace = PathTrace()
    trace.add(relaxation, start)
    current = start
    theta = float(start.theta)
    step = schedule.dtheta0
    while theta < 1.0:
        target = min(1.0, theta + step)
        try:
            new = newton_solve(relaxation, current.at(theta=target), **schedule.newton_kwargs())
        except (DivergedError, SingularPointError, DomainError) as exc:
            step *= schedule.shrink
            if step < schedule.dtheta_min:
                raise PathFailure(f"step underflow at theta = {theta:.6g}: {exc}", trace) from exc
            continue
        current, theta = new, target
        trace.add(relaxation, current)
        step = min(step * schedule.grow, schedule.dtheta0)
    return current, trace


def _mu_tangent(relaxation, iterate, singular_tol):
    """d(z, lam)/d(mu) along the barrier path, from ``K dv = [b; 0]``."""
    K = kkt_jacobian(relaxation, iterate)
    rhs = np.concatenate([barrier_gradient(relaxation, iterate.x, iterate.x_lo), np.zeros(relaxation.n_eq)])
    return Factorization(K, singular_tol).solve(rhs)


def _predict_mu(relaxation, iterate, target, tangent):
    n = relaxation.n
    step = (target - iterate.mu) * tangent
    alpha = fraction_to_boundary(relaxation, iterate.x, step[:n], z_lo=iterate.x_lo)
    return advance(iterate.at(mu=target), alpha, step[:n], step[n:])


def reduce_barrier(relaxation, iterate, schedule, trace=None, max_cuts=30):
    """Drive mu from its current value to ``mu_min`` at fixed theta.

    Each cut starts Newton from a first-order prediction along the barrier
    path; on failure the cut is shortened geometrically.
    """
    current = iterate
    while current.mu > schedule.mu_min:
        target = max(schedule.sigma * current.mu, schedule.mu_min)
        try:
            tangent = _mu_tangent(relaxation, current, schedule.singular_tol)
        except SingularPointError:
            tangent = None
        for _ in range(max_cuts):
            try:
                if tangent is not None:
                    guess = _predict_mu(relaxation, current, target, tangent)
                else:
                    guess = current.at(mu=target)
                current = newton_solve(relaxation, guess, **schedule.newton_kwargs())
                break
            except (DivergedError, SingularPointError, DomainError) as exc:
                last = exc
                target = math.sqrt(target * current.mu)
        else:
            raise PathFailure(f"barrier reduction stalled at mu = {current.mu:.3e}: {last}", trace)
        if trace is not None:
            trace.add(relaxation, current)
    return current


def solve_relaxation(relaxation: Relaxation, schedule=None) -> SolveReport:
    """Optimal objective value of a relaxation; failures are encoded in the status."""
    schedule = schedule or ContinuationSchedule()
    iters = {"zero": 0, "trace": 0, "barrier": 0}
    try:
        zero = solve_zero_problem(relaxation, schedule.mu0, schedule)
    except InfeasibleError as exc:
        return SolveReport(Status.INFEASIBLE, objective=math.inf, message=str(exc), iterations=iters)
    except SingularPointError as exc:
        return SolveReport(Status.SINGULAR_POINT, message=str(exc), iterations=iters)
    except (DivergedError, DomainError) as exc:
        return SolveReport(Status.DIVERGED, message=str(exc), iterations=iters)
    iters["zero"] = zero.newton_iters
    try:
        end, trace = trace_path(relaxation, zero, schedule)
        iters["trace"] = sum(r.newton_iters for r in trace.records[1:])
        n_trace = len(trace)
        final = reduce_barrier(relaxation, end, schedule, trace)
        iters["barrier"] = sum(r.newton_iters for r in trace.records[n_trace:])
    except PathFailure as exc:
        return SolveReport(Status.SINGULAR_POINT, message=str(exc), iterations=iters, trace=exc.trace)
    x, delta = relaxation.split(final.x)
    return SolveReport(
        Status.OPTIMAL,
        objective=relaxation.objective(final.x, 1.0),
        x=x,
        delta=delta,
        multipliers=final.lam,
        kkt_residual=float(final.residual_norm),
        mu=float(final.mu),
        iterations=iters,
        trace=trace,
    )
