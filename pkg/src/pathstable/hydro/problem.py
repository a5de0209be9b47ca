"""The cascaded-river optimal-control MINLP.

Unknowns are the levels ``H`` and discharges ``Q`` at hydraulic levels
``j = 1..J`` (level 0 is the steady initial state), stored level by level as
``[H_0..H_{nc-1}, Q_0..Q_{nf-1}]``. Binaries ``delta[k * n_control + c - 1]``
select the discharge of weir ``k`` at control instant ``c``.

Per time step the equality rows are: continuity (scaled by ``dt / width``),
momentum (scaled by ``dt``), the upstream inflow and one row per weir. Row
scaling does not change the feasible set; it brings every row to level or
discharge units.
"""
from __future__ import annotations

import csv

import numpy as np
import scipy.sparse as sp

from ..core import ContractViolation, DomainError, ParametricMINLP
from .model import CascadeModel
from .scheme import build_stencil, continuity_residual, momentum_derivatives, momentum_kernels, momentum_residual
from .simulate import simulate, solve_steady_state


class RiverLayout:
    """Index bookkeeping shared by the residual, Jacobian and Hessian."""

    def __init__(self, model: CascadeModel, objective_scale=None):
        self.model = model
        self.stencil = build_stencil(model)
        self.nc, self.nf = model.n_cells, model.n_faces
        self.nb = self.nc + self.nf
        self.J = model.n_steps
        self.nm = len(self.stencil.faces)
        self.n_cont = self.J * self.nb
        self.n_bin = model.n_binaries
        self.H0, self.Q0 = solve_steady_state(model)
        self.inflow = model.inflow(model.times)
        self.row_scale_cont = model.dt_hydraulic / model.width
        self.row_scale_mom = model.dt_hydraulic
        # mean square level by default, so objective gradients are O(|H|)
        self.objective_scale = 1.0 / ((self.J + 1) * self.nc) if objective_scale is None else float(objective_scale)
        self._build_jacobian_pattern()
        self._build_hessian_pattern()

    # variable and row numbering ------------------------------------------
    def h_var(self, j, c):
        """Column of H at level ``j`` (``-1`` for the fixed initial level)."""
        j, c = np.broadcast_arrays(np.asarray(j), np.asarray(c))
        return np.where(j >= 1, (j - 1) * self.nb + c, -1)

    def q_var(self, j, f):
        j, f = np.broadcast_arrays(np.asarray(j), np.asarray(f))
        return np.where(j >= 1, (j - 1) * self.nb + self.nc + f, -1)

    def rows(self, j, k):
        return j * self.nb + k

    def unpack(self, x):
        """``(H, Q)`` with shapes (J + 1, nc) and (J + 1, nf), level 0 included."""
        x = np.asarray(x, dtype=float).reshape(self.J, self.nb)
        H = np.vstack([self.H0, x[:, : self.nc]])
        Q = np.vstack([self.Q0, x[:, self.nc:]])
        return H, Q

    def pack(self, H, Q):
        return np.hstack([np.asarray(H)[1:], np.asarray(Q)[1:]]).reshape(-1)

    # sparsity --------------------------------------------------------------
    def _build_jacobian_pattern(self):
        m, st = self.model, self.stencil
        nc, nm = self.nc, self.nm
        steps = np.arange(self.J)
        rows, cols, vals = [], [], []

        # continuity: constant coefficients
        jj, cc = np.meshgrid(steps, np.arange(nc), indexing="ij")
        r = self.rows(jj, cc)
        s = self.row_scale_cont[cc]
        w, dx, dt = m.width[cc], m.dx[cc], m.dt_hydraulic
        for col, val in (
            (self.h_var(jj + 1, cc), s * w / dt),
            (self.h_var(jj, cc), -s * w / dt),
            (self.q_var(jj + 1, cc + 1), s / dx),
            (self.q_var(jj + 1, cc), -s / dx),
        ):
            rows.append(r), cols.append(col), vals.append(val)
        const = [np.concatenate([a.ravel() for a in v]) for v in (rows, cols, vals)]

        # boundary rows: inflow and weirs (delta coefficients below)
        r_in = self.rows(steps, nc + nm)
        b_rows = [r_in, *(self.rows(steps, nc + nm + 1 + k) for k in range(m.n_weirs))]
        b_cols = [self.q_var(steps + 1, 0), *(self.q_var(steps + 1, f) for f in m.weir_faces)]
        const[0] = np.concatenate([const[0], *b_rows])
        const[1] = np.concatenate([const[1], *b_cols])
        const[2] = np.concatenate([const[2], np.ones(sum(len(r) for r in b_rows))])

        # delta columns of the weir rows
        W = m.control_weights[1:, 1:]  # (J, n_control)
        span = m.weir_high - m.weir_low
        d_rows, d_cols, d_vals = [], [], []
        for k in range(m.n_weirs):
            jj, cc = np.nonzero(W)
            d_rows.append(self.rows(jj, nc + nm + 1 + k))
            d_cols.append(self.n_cont + k * m.n_control + cc)
            d_vals.append(-span * W[jj, cc])
        const = [np.concatenate([a, *b]) for a, b in zip(const, (d_rows, d_cols, d_vals))]
        keep = const[1] >= 0
        self._const = tuple(a[keep] for a in const)

        # momentum: (J, nm, 12) columns from the stencil
        jj = steps[:, None]
        cols = np.concatenate(
            [
                self.q_var(jj[..., None], st.q_idx[None]),
                self.h_var(jj[..., None], st.h_old_idx[None]),
                self.q_var(jj + 1, st.faces[None])[..., None],
                self.h_var(jj[..., None] + 1, st.h_new_idx[None]),
            ],
            axis=-1,
        )
        self._mom_cols = cols
        self._mom_rows = np.broadcast_to(self.rows(jj, nc + np.arange(nm)[None])[..., None], cols.shape)
        self._mom_keep = cols >= 0

    def _build_hessian_pattern(self):
        _, _, pairs, _ = momentum_kernels()
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        ca = self._mom_cols[..., a]
        cb = self._mom_cols[..., b]
        self._hess_pairs = (ca, cb, (ca >= 0) & (cb >= 0), a != b)

    # residuals -------------------------------------------------------------
    def weir_targets(self, delta):
        return self.model.weir_flows(delta)[1:]

    def constraints(self, x, delta, theta):
        m = self.model
        H, Q = self.unpack(x)
        cont = continuity_residual(m, H[:-1], H[1:], Q[1:]) * self.row_scale_cont
        mom = momentum_residual(m, H[:-1], Q[:-1], H[1:], Q[1:], theta, self.stencil) * self.row_scale_mom
        inflow = Q[1:, :1] - self.inflow[1:, None]
        weirs = Q[1:, m.weir_faces] - self.weir_targets(delta)
        return np.hstack([cont, mom, inflow, weirs]).reshape(-1)

    def jacobian(self, x, delta, theta):
        H, Q = self.unpack(x)
        grad, _ = momentum_derivatives(self.model, H[:-1], Q[:-1], H[1:], Q[1:], theta, self.stencil)
        keep = self._mom_keep
        rows = np.concatenate([self._const[0], self._mom_rows[keep]])
        cols = np.concatenate([self._const[1], self._mom_cols[keep]])
        vals = np.concatenate([self._const[2], (grad * self.row_scale_mom)[keep]])
        n = self.n_cont + self.n_bin
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n_cont, n))

    def constraint_hessian(self, x, delta, theta, lam):
        H, Q = self.unpack(x)
        _, hess = momentum_derivatives(self.model, H[:-1], Q[:-1], H[1:], Q[1:], theta, self.stencil)
        lam = np.asarray(lam, dtype=float).reshape(self.J, self.nb)[:, self.nc: self.nc + self.nm]
        w = hess * (self.row_scale_mom * lam)[..., None]
        ca, cb, keep, off = self._hess_pairs
        k_off = keep & off
        rows = np.concatenate([ca[keep], cb[k_off]])
        cols = np.concatenate([cb[keep], ca[k_off]])
        vals = np.concatenate([w[keep], w[k_off]])
        n = self.n_cont + self.n_bin
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

    # objective -------------------------------------------------------------
    @property
    def h_columns(self):
        return self.h_var(np.arange(1, self.J + 1)[:, None], np.arange(self.nc)[None]).ravel()

    def objective(self, x, delta, theta):
        H, _ = self.unpack(x)
        return self.objective_scale * float(np.sum(H**2))

    def level_objective(self, H):
        """Unscaled sum of squared levels over all H nodes and levels."""
        return float(np.sum(np.asarray(H) ** 2))

    def objective_grad(self, x, delta, theta):
        g = np.zeros(self.n_cont + self.n_bin)
        g[self.h_columns] = 2.0 * self.objective_scale * np.asarray(x)[self.h_columns]
        return g

    def objective_hess(self, x, delta, theta):
        n = self.n_cont + self.n_bin
        d = np.zeros(n)
        d[self.h_columns] = 2.0 * self.objective_scale
        return sp.diags(d, format="csc")


def build_river_problem(num_weirs=1, model: CascadeModel = None, objective_scale=None) -> ParametricMINLP:
    """Cascade of ``num_weirs`` reaches, each ending in a binary weir.

    Minimises the sum of squared water levels over all H nodes and hydraulic
    levels (level 0 included), multiplied by ``objective_scale``. The default
    scale divides by the number of terms, giving the mean square level; the
    ranking of policies is unchanged. Levels are bounded below by the channel
    bottom, the domain where the cross-section is wetted.

    ``warm_start`` forward-simulates the scheme for the given (possibly
    fractional) binaries, which satisfies the constraints exactly. The
    returned problem's ``metadata`` holds the model, the :class:`RiverLayout`
    and an ``unpack`` callable mapping ``x`` to ``(H, Q)``.
    """
    if model is None:
        model = CascadeModel.default(num_weirs)
    if model.n_weirs != num_weirs:
        raise ContractViolation(f"model has {model.n_weirs} weirs, {num_weirs} requested")
    lay = RiverLayout(model, objective_scale)
    guess = np.tile(np.concatenate([lay.H0, lay.Q0]), lay.J)
    n = lay.n_cont
    lower = np.full(n, -np.inf)
    lower[lay.h_columns] = np.tile(model.bottom, lay.J)  # the wetted domain A(H) > 0

    def warm_start(delta, theta):
        try:
            state = simulate(model, delta=delta, theta=theta, start=(lay.H0, lay.Q0))
        except DomainError:
            return guess
        return lay.pack(state.H, state.Q)

    return ParametricMINLP(
        n_cont=n,
        n_bin=lay.n_bin,
        n_eq=n,
        objective=lay.objective,
        objective_grad=lay.objective_grad,
        objective_hess=lay.objective_hess,
        eq_constraints=lay.constraints,
        eq_jacobian=lay.jacobian,
        eq_hessian=lay.constraint_hessian,
        lower_bounds=lower,
        upper_bounds=np.full(n, np.inf),
        initial_guess=guess,
        warm_start=warm_start,
        name=f"river-{num_weirs}",
        metadata={"model": model, "layout": lay, "unpack": lay.unpack},
    )


def policy_objective(model: CascadeModel, delta, theta=1.0, objective_scale=None):
    """Scaled objective of a fixed binary policy, computed by forward simulation."""
    state = simulate(model, delta=delta, theta=theta)
    if objective_scale is None:
        objective_scale = 1.0 / (state.H.size)
    return objective_scale * float(np.sum(state.H**2)), state


def location_ids(model: CascadeModel):
    return [f"H{c + 1}" for c in range(model.n_cells)], [f"Q{f}" for f in range(model.n_faces)]


def write_results(path, model: CascadeModel, H, Q):
    """Long-format CSV: one row per node per hydraulic level."""
    h_ids, q_ids = location_ids(model)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "location_id", "H_m", "Q_m3s"])
        for j, t in enumerate(model.times):
            for c, name in enumerate(h_ids):
                w.writerow([repr(float(t)), name, repr(float(H[j, c])), ""])
            for f, name in enumerate(q_ids):
                w.writerow([repr(float(t)), name, "", repr(float(Q[j, f]))])
