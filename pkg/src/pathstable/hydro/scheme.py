"""Semi-implicit staggered-grid Saint-Venant residuals.

Continuity per cell ``c`` (step j -> j+1)::

    (A(H_c^{j+1}) - A(H_c^j)) / dt + (Q_{c+1}^{j+1} - Q_c^{j+1}) / dx

Momentum per interior face ``f`` is ``theta * full + (1 - theta) * linear``::

    full   = (Qn - Q) / dt + conv + g A_f (Hn_R - Hn_L) / dx + g Qn |Q|_eps / (A_f R_f C^2)
    linear = (Qn - Q) / dt + g Abar_f (Hn_R - Hn_L) / dx + g Qn |Qbar|_eps / (Abar_f Rbar_f C^2)

Face areas blend the two neighbouring cells with the upwind weight
``w = 1 / (1 + exp(-K Q / Qbar))``; the convective term blends backward and
forward differences of ``Q^2 / A_f`` with the same weight. ``A_f``, ``R_f``,
``|Q|_eps`` and ``conv`` use level ``j``; ``Qn`` and the ``Hn`` use ``j+1``.

The momentum stencil has twelve state inputs (see :data:`STENCIL`); its
gradient and Hessian are derived once with sympy and evaluated vectorised.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

from ..core import DomainError

# old level: three fluxes, six cell levels (left/right of faces f-1, f, f+1);
# new level: the face flux and its two cell levels.
STENCIL = ("Qm", "Q0", "Qp", "Ha", "Hb", "Hc", "Hd", "He", "Hf", "Qn", "HnL", "HnR")
PARAMS = ("ba", "bb", "bc", "bd", "be", "bf", "width", "chezy", "dx", "dt", "g", "K", "Qbar", "eps", "Abar", "Rbar", "theta")


def smooth_abs(q, eps):
    return np.sqrt(np.asarray(q) ** 2 + eps)


def upwind_weight(q, steepness, q_nominal):
    return 1.0 / (1.0 + np.exp(-steepness * np.asarray(q) / q_nominal))


def _symbolic_momentum():
    s = dict(zip(STENCIL, sympy.symbols(STENCIL, real=True)))
    p = dict(zip(PARAMS, sympy.symbols(PARAMS, real=True)))
    width, K, Qbar = p["width"], p["K"], p["Qbar"]

    def w(q):
        return 1 / (1 + sympy.exp(-K * q / Qbar))

    def face(q, hl, bl, hr, br):
        wq = w(q)
        A = wq * width * (hl - bl) + (1 - wq) * width * (hr - br)
        P = wq * (width + 2 * (hl - bl)) + (1 - wq) * (width + 2 * (hr - br))
        return A, A / P

    Am, _ = face(s["Qm"], s["Ha"], p["ba"], s["Hb"], p["bb"])
    A0, R0 = face(s["Q0"], s["Hc"], p["bc"], s["Hd"], p["bd"])
    Ap, _ = face(s["Qp"], s["He"], p["be"], s["Hf"], p["bf"])
    Fm, F0, Fp = s["Qm"] ** 2 / Am, s["Q0"] ** 2 / A0, s["Qp"] ** 2 / Ap
    w0 = w(s["Q0"])
    conv = (w0 * (F0 - Fm) + (1 - w0) * (Fp - F0)) / p["dx"]
    g, dx, dt, C = p["g"], p["dx"], p["dt"], p["chezy"]
    dQ = (s["Qn"] - s["Q0"]) / dt
    grad_h = (s["HnR"] - s["HnL"]) / dx
    full = dQ + conv + g * A0 * grad_h + g * s["Qn"] * sympy.sqrt(s["Q0"] ** 2 + p["eps"]) / (A0 * R0 * C**2)
    lin = dQ + g * p["Abar"] * grad_h + g * s["Qn"] * sympy.sqrt(Qbar**2 + p["eps"]) / (p["Abar"] * p["Rbar"] * C**2)
    return [s[k] for k in STENCIL], [p[k] for k in PARAMS], full, lin


@lru_cache(maxsize=None)
def momentum_kernels():
    """Lambdified value, gradient and Hessian of the blended momentum stencil.

    Returns ``(value, grad, hess_pairs, hess)`` where ``hess_pairs`` lists the
    structurally non-zero ``(i, j)`` with ``i <= j`` of the (theta-free) Hessian
    of the full residual.
    """
    v, p, full, lin = _symbolic_momentum()
    theta = p[-1]
    res = theta * full + (1 - theta) * lin
    grad = [sympy.diff(res, vi) for vi in v]
    pairs, entries = [], []
    for i in range(len(v)):
        for j in range(i, len(v)):
            e = sympy.diff(full, v[i], v[j])
            if e != 0:
                pairs.append((i, j))
                entries.append(e)
    args = v + p
    f_val = sympy.lambdify(args, res, modules="numpy", cse=True)
    f_grad = sympy.lambdify(args, grad, modules="numpy", cse=True)
    f_hess = sympy.lambdify(args, entries, modules="numpy", cse=True)
    return f_val, f_grad, tuple(pairs), f_hess


@dataclass(frozen=True)
class MomentumStencil:
    """Index maps for all interior faces of a :class:`CascadeModel`.

    ``q_old``, ``h_old`` etc. index into per-level H / Q arrays; ``params``
    holds the per-face geometric constants in :data:`PARAMS` order (without
    theta).
    """

    faces: np.ndarray
    q_idx: np.ndarray  # (n, 3) faces f-1, f, f+1
    h_old_idx: np.ndarray  # (n, 6) cells
    h_new_idx: np.ndarray  # (n, 2) cells left/right of f
    params: np.ndarray  # (n, len(PARAMS) - 1)


def build_stencil(model) -> MomentumStencil:
    faces = model.momentum_faces
    q_idx, h_old, h_new, params = [], [], [], []
    w_bar = upwind_weight(model.q_nominal, model.steepness, model.q_nominal)
    for f in faces:
        reach = int(model.cell_reach[f])  # face f > reach start, so cell f is in the same reach
        cells = []
        for g in (f - 1, f, f + 1):
            cells.extend(model.face_cells(g, reach))
        q_idx.append((f - 1, f, f + 1))
        h_old.append(cells)
        h_new.append((f - 1, f))
        bots = model.bottom[cells]
        geom = model.reaches[reach]
        a_l = geom.width * (model.h_nominal - model.bottom[f - 1])
        a_r = geom.width * (model.h_nominal - model.bottom[f])
        p_l = geom.width + 2 * (model.h_nominal - model.bottom[f - 1])
        p_r = geom.width + 2 * (model.h_nominal - model.bottom[f])
        a_bar = w_bar * a_l + (1 - w_bar) * a_r
        r_bar = a_bar / (w_bar * p_l + (1 - w_bar) * p_r)
        params.append([*bots, geom.width, geom.chezy, geom.dx, model.dt_hydraulic, model.gravity,
                       model.steepness, model.q_nominal, model.eps, a_bar, r_bar])
    return MomentumStencil(
        faces=np.asarray(faces, dtype=int),
        q_idx=np.asarray(q_idx, dtype=int).reshape(-1, 3),
        h_old_idx=np.asarray(h_old, dtype=int).reshape(-1, 6),
        h_new_idx=np.asarray(h_new, dtype=int).reshape(-1, 2),
        params=np.asarray(params, dtype=float).reshape(-1, len(PARAMS) - 1),
    )


def _stencil_args(stencil, H_old, Q_old, H_new, Q_new, theta):
    H_old, Q_old, H_new, Q_new = (np.asarray(a, dtype=float) for a in (H_old, Q_old, H_new, Q_new))
    qo = Q_old[..., stencil.q_idx]
    ho = H_old[..., stencil.h_old_idx]
    qn = Q_new[..., stencil.faces]
    hn = H_new[..., stencil.h_new_idx]
    shape = qn.shape
    bottoms = stencil.params[:, :6]
    if np.any(ho <= bottoms):
        raise DomainError("water level at or below the channel bottom")
    state = [qo[..., 0], qo[..., 1], qo[..., 2], *(ho[..., k] for k in range(6)), qn, hn[..., 0], hn[..., 1]]
    par = [np.broadcast_to(stencil.params[:, k], shape) for k in range(stencil.params.shape[1])]
    return state + par + [np.full(shape, float(theta))]


def momentum_residual(model, H_old, Q_old, H_new, Q_new, theta, stencil=None):
    """Residual at every interior face; leading axes of the state arrays are kept."""
    stencil = stencil or build_stencil(model)
    f_val, _, _, _ = momentum_kernels()
    return np.asarray(f_val(*_stencil_args(stencil, H_old, Q_old, H_new, Q_new, theta)), dtype=float)


def momentum_derivatives(model, H_old, Q_old, H_new, Q_new, theta, stencil=None):
    """``(grad, hess)`` of the momentum stencil.

    ``grad`` has shape (..., n_faces, 12); ``hess`` (..., n_faces, n_pairs)
    holds ``theta`` times the non-zero upper-triangle entries listed by
    :func:`momentum_kernels`.
    """
    stencil = stencil or build_stencil(model)
    _, f_grad, pairs, f_hess = momentum_kernels()
    args = _stencil_args(stencil, H_old, Q_old, H_new, Q_new, theta)
    shape = args[0].shape
    grad = np.stack([np.broadcast_to(g, shape) for g in f_grad(*args)], axis=-1)
    hess = float(theta) * np.stack([np.broadcast_to(h, shape) for h in f_hess(*args)], axis=-1)
    return grad, hess


def continuity_residual(model, H_old, H_new, Q_new):
    """Volume balance per cell; leading axes are kept."""
    H_old, H_new, Q_new = (np.asarray(a, dtype=float) for a in (H_old, H_new, Q_new))
    dA = model.width * (H_new - H_old)
    return dA / model.dt_hydraulic + (Q_new[..., 1:] - Q_new[..., :-1]) / model.dx
