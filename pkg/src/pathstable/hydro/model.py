"""River cascade geometry, time grids and boundary data."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import yaml

from ..core import ContractViolation

HOUR = 3600.0


@dataclass(frozen=True)
class ReachGeometry:
    """One reach on a staggered grid: H at cell centres, Q at the faces.

    Rectangular-style section: ``A(H) = width (H - Hb)``, ``P(H) = width + 2 (H - Hb)``.
    """

    length: float = 10000.0
    n_cells: int = 5
    bottom: tuple = ()
    initial_levels: tuple = ()
    width: float = 50.0
    chezy: float = 40.0

    def __post_init__(self):
        if not self.bottom:
            object.__setattr__(self, "bottom", tuple(np.linspace(-4.90, -5.10, self.n_cells)))
        if not self.initial_levels:
            object.__setattr__(self, "initial_levels", tuple(np.linspace(0.0, -0.222, self.n_cells)))
        if len(self.bottom) != self.n_cells or len(self.initial_levels) != self.n_cells:
            raise ContractViolation("bottom and initial_levels need one value per cell")
        if self.length <= 0 or self.width <= 0 or self.chezy <= 0 or self.n_cells < 2:
            raise ContractViolation("invalid reach geometry")
        if np.any(np.asarray(self.initial_levels) <= np.asarray(self.bottom)):
            raise ContractViolation("initial levels must lie above the bottom")

    @property
    def dx(self):
        return self.length / self.n_cells

    def area(self, H, bottom=None):
        b = np.asarray(self.bottom if bottom is None else bottom)
        return self.width * (np.asarray(H) - b)

    def perimeter(self, H, bottom=None):
        b = np.asarray(self.bottom if bottom is None else bottom)
        return self.width + 2.0 * (np.asarray(H) - b)

    def hydraulic_radius(self, H, bottom=None):
        return self.area(H, bottom) / self.perimeter(H, bottom)


def ramp_hydrograph(q_start=100.0, q_end=300.0, ramp_hours=12.0):
    return (0.0, ramp_hours * HOUR), (q_start, q_end)


@dataclass(frozen=True)
class CascadeModel:
    """Reaches in series, each terminated by an adjustable weir.

    Global numbering is 0-based: cells ``0..n_cells-1``, faces ``0..n_cells``
    with face ``f`` between cells ``f-1`` and ``f``. Face 0 carries the
    upstream inflow; the last face of every reach is a weir.
    """

    reaches: tuple = field(default_factory=lambda: (ReachGeometry(),))
    dt_hydraulic: float = 600.0
    dt_control: float = 4 * HOUR
    horizon: float = 24 * HOUR
    h_nominal: float = 0.0
    q_nominal: float = 100.0
    eps: float = 1e-12
    steepness: float = 10.0
    gravity: float = 9.81
    weir_low: float = 100.0
    weir_high: float = 200.0
    initial_weir_flow: float = 100.0
    hydrograph: tuple = field(default_factory=ramp_hydrograph)

    def __post_init__(self):
        object.__setattr__(self, "reaches", tuple(self.reaches))
        if not self.reaches:
            raise ContractViolation("need at least one reach")
        if self.dt_hydraulic <= 0 or self.dt_control <= 0 or self.horizon <= 0:
            raise ContractViolation("time steps must be positive")
        if not _is_multiple(self.dt_control, self.dt_hydraulic):
            raise ContractViolation("control step must be an integer multiple of the hydraulic step")
        if not _is_multiple(self.horizon, self.dt_control):
            raise ContractViolation("horizon must be an integer multiple of the control step")
        times, values = (np.asarray(v, dtype=float) for v in self.hydrograph)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0 or np.any(np.diff(times) <= 0):
            raise ContractViolation("hydrograph needs increasing times with one value each")
        if np.any(values <= 0):
            raise ContractViolation("inflow must be positive")
        object.__setattr__(self, "hydrograph", (tuple(times), tuple(values)))

    @classmethod
    def default(cls, num_weirs=1, **overrides):
        return cls(reaches=tuple(ReachGeometry() for _ in range(num_weirs)), **overrides)

    def with_horizon(self, hours):
        return replace(self, horizon=hours * HOUR)

    # grid -----------------------------------------------------------------
    @property
    def n_reaches(self):
        return len(self.reaches)

    n_weirs = n_reaches

    @cached_property
    def cell_offsets(self):
        return np.concatenate([[0], np.cumsum([r.n_cells for r in self.reaches])]).astype(int)

    @property
    def n_cells(self):
        return int(self.cell_offsets[-1])

    @property
    def n_faces(self):
        return self.n_cells + 1

    @cached_property
    def weir_faces(self):
        return self.cell_offsets[1:].copy()

    @cached_property
    def momentum_faces(self):
        bound = set(self.cell_offsets.tolist())
        return np.array([f for f in range(self.n_faces) if f not in bound], dtype=int)

    @cached_property
    def cell_reach(self):
        return np.repeat(np.arange(self.n_reaches), [r.n_cells for r in self.reaches])

    def _per_cell(self, attr):
        return np.concatenate([np.full(r.n_cells, getattr(r, attr), dtype=float) for r in self.reaches])

    @cached_property
    def bottom(self):
        return np.concatenate([np.asarray(r.bottom, dtype=float) for r in self.reaches])

    @cached_property
    def width(self):
        return self._per_cell("width")

    @cached_property
    def chezy(self):
        return self._per_cell("chezy")

    @cached_property
    def dx(self):
        return np.concatenate([np.full(r.n_cells, r.dx) for r in self.reaches])

    @cached_property
    def profile_levels(self):
        return np.concatenate([np.asarray(r.initial_levels, dtype=float) for r in self.reaches])

    def face_cells(self, face, reach):
        """(left, right) cells used for the area at ``face`` seen from ``reach``."""
        a, b = self.cell_offsets[reach], self.cell_offsets[reach + 1]
        return max(face - 1, a), min(face, b - 1)

    def area(self, H):
        return self.width * (np.asarray(H) - self.bottom)

    # time -----------------------------------------------------------------
    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt_hydraulic))

    @property
    def n_control(self):
        """Decision instants per weir (t = dt_control ... horizon)."""
        return int(round(self.horizon / self.dt_control))

    @property
    def n_binaries(self):
        return self.n_weirs * self.n_control

    @cached_property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt_hydraulic

    @cached_property
    def control_times(self):
        return np.arange(self.n_control + 1) * self.dt_control

    @cached_property
    def control_weights(self):
        """(n_steps + 1, n_control + 1) linear interpolation weights onto hydraulic levels."""
        eye = np.eye(self.n_control + 1)
        return np.stack([np.interp(self.times, self.control_times, eye[c]) for c in range(self.n_control + 1)], axis=1)

    def inflow(self, t):
        times, values = self.hydrograph
        return np.interp(t, times, values)

    def control_values(self, delta):
        """(n_weirs, n_control + 1) weir discharges at the control instants."""
        d = np.asarray(delta, dtype=float).reshape(self.n_weirs, self.n_control)
        v = np.empty((self.n_weirs, self.n_control + 1))
        v[:, 0] = self.initial_weir_flow
        v[:, 1:] = self.weir_low + (self.weir_high - self.weir_low) * d
        return v

    def weir_flows(self, delta):
        """(n_steps + 1, n_weirs) weir discharges on the hydraulic levels."""
        return self.control_weights @ self.control_values(delta).T


def _is_multiple(a, b):
    k = a / b
    return abs(k - round(k)) < 1e-9 and round(k) >= 1


def read_hydrograph(path):
    """CSV with columns ``time_s`` and ``inflow_m3s``."""
    times, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"time_s", "inflow_m3s"} <= set(reader.fieldnames):
            raise ContractViolation(f"{path}: expected columns time_s, inflow_m3s")
        for row in reader:
            times.append(float(row["time_s"]))
            values.append(float(row["inflow_m3s"]))
    return tuple(times), tuple(values)


def write_hydrograph(path, times, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "inflow_m3s"])
        for t, q in zip(times, values):
            w.writerow([repr(float(t)), repr(float(q))])


_TOP_KEYS = {
    "reaches", "dt_hydraulic_s", "dt_control_s", "horizon_h", "h_nominal", "q_nominal",
    "eps", "steepness", "gravity", "weir_low", "weir_high", "initial_weir_flow", "hydrograph",
}
_REACH_KEYS = {"length", "n_cells", "bottom", "initial_levels", "width", "chezy", "count"}


def _profile(value, n):
    if value is None:
        return ()
    if isinstance(value, dict):
        return tuple(np.linspace(float(value["start"]), float(value["end"]), n))
    vals = tuple(float(v) for v in value)
    if len(vals) == 2 and n != 2:
        return tuple(np.linspace(vals[0], vals[1], n))
    return vals


def load_model_config(path, num_weirs=None):
    """Build a :class:`CascadeModel` from a YAML file.

    ``bottom`` / ``initial_levels`` accept a full list, a ``[start, end]`` pair
    or ``{start: .., end: ..}`` (linear profile). ``hydrograph`` is a CSV path
    relative to the config file. A reach entry with ``count: n`` is repeated.
    """
    import os

    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ContractViolation(f"{path}: top level must be a mapping")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ContractViolation(f"{path}: unknown keys {sorted(unknown)}")
    reaches = []
    for entry in cfg.get("reaches", [{}]):
        unknown = set(entry) - _REACH_KEYS
        if unknown:
            raise ContractViolation(f"{path}: unknown reach keys {sorted(unknown)}")
        n = int(entry.get("n_cells", 5))
        geom = ReachGeometry(
            length=float(entry.get("length", 10000.0)),
            n_cells=n,
            bottom=_profile(entry.get("bottom"), n),
            initial_levels=_profile(entry.get("initial_levels"), n),
            width=float(entry.get("width", 50.0)),
            chezy=float(entry.get("chezy", 40.0)),
        )
        reaches.extend([geom] * int(entry.get("count", 1)))
    if num_weirs is not None:
        if len(reaches) == 1:
            reaches = reaches * num_weirs
        elif len(reaches) != num_weirs:
            raise ContractViolation(f"config defines {len(reaches)} reaches but {num_weirs} weirs were requested")
    kwargs = {}
    simple = {
        "dt_hydraulic_s": "dt_hydraulic", "dt_control_s": "dt_control", "h_nominal": "h_nominal",
        "q_nominal": "q_nominal", "eps": "eps", "steepness": "steepness", "gravity": "gravity",
        "weir_low": "weir_low", "weir_high": "weir_high", "initial_weir_flow": "initial_weir_flow",
    }
    for key, name in simple.items():
        if key in cfg:
            kwargs[name] = float(cfg[key])
    if "horizon_h" in cfg:
        kwargs["horizon"] = float(cfg["horizon_h"]) * HOUR
    if "hydrograph" in cfg:
        hpath = os.path.join(os.path.dirname(os.path.abspath(path)), cfg["hydrograph"])
        kwargs["hydrograph"] = read_hydrograph(hpath)
    return CascadeModel(reaches=tuple(reaches), **kwargs)
