"""Steady state and forward simulation of a cascade with prescribed weir flows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ContractViolation, DivergedError
from .scheme import build_stencil, continuity_residual, momentum_derivatives, momentum_residual


@dataclass(frozen=True)
class HydraulicState:
    """Levels ``H[j, cell]`` and discharges ``Q[j, face]`` on hydraulic levels ``j``."""

    times: np.ndarray
    H: np.ndarray
    Q: np.ndarray

    def volume(self, model):
        return (model.area(self.H) * model.dx).sum(axis=-1)


def solve_steady_state(model, inflow=None, weir_flows=None, tol=1e-12, max_iter=50):
    """Steady levels for uniform discharge, anchored at each reach's first profile level.

    Every reach carries the discharge entering it; each weir must pass that
    same discharge. Newton on the time-invariant momentum balance, started
    from the configured profile.
    """
    inflow = float(model.inflow(0.0) if inflow is None else inflow)
    if inflow <= 0:
        raise ContractViolation("steady state needs a positive inflow")
    weirs = np.full(model.n_weirs, model.initial_weir_flow if weir_flows is None else np.nan)
    if weir_flows is not None:
        weirs = np.asarray(weir_flows, dtype=float).reshape(model.n_weirs)
    if not np.allclose(weirs, inflow, rtol=0, atol=1e-12):
        raise ContractViolation(f"weir flows {weirs} do not pass the inflow {inflow}; no steady state")
    Q = np.full(model.n_faces, inflow)
    H = model.profile_levels.copy()
    stencil = build_stencil(model)
    anchors = model.cell_offsets[:-1]
    free = np.setdiff1d(np.arange(model.n_cells), anchors)
    for _ in range(max_iter):
        r = momentum_residual(model, H, Q, H, Q, 1.0, stencil)
        if np.max(np.abs(r)) <= tol:
            break
        grad, _ = momentum_derivatives(model, H, Q, H, Q, 1.0, stencil)
        J = np.zeros((len(stencil.faces), model.n_cells))
        rows = np.arange(len(stencil.faces))
        for k in range(6):
            np.add.at(J, (rows, stencil.h_old_idx[:, k]), grad[:, 3 + k])
        for k in range(2):
            np.add.at(J, (rows, stencil.h_new_idx[:, k]), grad[:, 10 + k])
        H[free] -= np.linalg.solve(J[:, free], r)
    else:
        raise DivergedError("steady-state Newton did not converge")
    return H, Q


def initial_state(model):
    return solve_steady_state(model)


def _step_jacobian(model, stencil, grad):
    """Jacobian of one step's residuals in the new-level unknowns ``[H; Q]``."""
    nc, nf = model.n_cells, model.n_faces
    nm = len(stencil.faces)
    nb = nc + nf
    J = np.zeros((nb, nb))
    c = np.arange(nc)
    J[c, c] = model.width / model.dt_hydraulic
    J[c, nc + c + 1] = 1.0 / model.dx
    J[c, nc + c] = -1.0 / model.dx
    rows = nc + np.arange(nm)
    J[rows, nc + stencil.faces] += grad[:, 9]
    np.add.at(J, (rows, stencil.h_new_idx[:, 0]), grad[:, 10])
    np.add.at(J, (rows, stencil.h_new_idx[:, 1]), grad[:, 11])
    J[nc + nm, nc] = 1.0
    for k, f in enumerate(model.weir_faces):
        J[nc + nm + 1 + k, nc + f] = 1.0
    return J


def step_residual(model, H_old, Q_old, H_new, Q_new, inflow, weirs, theta=1.0, stencil=None):
    stencil = stencil or build_stencil(model)
    return np.concatenate([
        continuity_residual(model, H_old, H_new, Q_new),
        momentum_residual(model, H_old, Q_old, H_new, Q_new, theta, stencil),
        [Q_new[0] - inflow],
        Q_new[model.weir_faces] - weirs,
    ])


def simulate(model, delta=None, weir_series=None, theta=1.0, start=None, tol=1e-11):
    """March the scheme over the horizon.

    Weir flows come from binaries ``delta`` (interpolated control values) or
    directly from ``weir_series`` of shape (n_steps + 1, n_weirs). Each step is
    linear in the new level, so Newton finishes in one or two iterations.
    """
    if weir_series is None:
        if delta is None:
            delta = np.zeros(model.n_binaries)
        weir_series = model.weir_flows(delta)
    weir_series = np.asarray(weir_series, dtype=float)
    H0, Q0 = start if start is not None else initial_state(model)
    stencil = build_stencil(model)
    nc = model.n_cells
    J = model.n_steps
    H = np.empty((J + 1, nc))
    Q = np.empty((J + 1, model.n_faces))
    H[0], Q[0] = H0, Q0
    inflow = model.inflow(model.times)
    for j in range(J):
        h, q = H[j].copy(), Q[j].copy()
        grad, _ = momentum_derivatives(model, H[j], Q[j], h, q, theta, stencil)
        K = _step_jacobian(model, stencil, grad)
        for _ in range(5):
            r = step_residual(model, H[j], Q[j], h, q, inflow[j + 1], weir_series[j + 1], theta, stencil)
            if np.max(np.abs(r)) <= tol:
                break
            d = np.linalg.solve(K, -r)
            h, q = h + d[:nc], q + d[nc:]
        else:
            raise DivergedError(f"time step {j} did not converge")
        H[j + 1], Q[j + 1] = h, q
    return HydraulicState(model.times.copy(), H, Q)
