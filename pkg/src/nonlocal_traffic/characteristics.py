"""Characteristic curves ``dX/dt = V(w(t, X))`` of a computed nonlocal field.

The field ``w`` is known on a space-time lattice (snapshot times x cell edges);
it is interpolated bilinearly and the ODE is advanced with the classical
four-stage Runge-Kutta method using the snapshot spacing as step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainExit, PathOrderError
from .trajectory import Trajectory
from .velocity import VelocityModel, greenshields

SPARSE_SNAPSHOT_FACTOR = 5.0


@dataclass(frozen=True, eq=False)
class CharacteristicPath:
    start_time: float
    start_point: float
    times: np.ndarray
    X: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))

    @property
    def t_first(self) -> float:
        return float(min(self.times[0], self.times[-1]))

    @property
    def t_last(self) -> float:
        return float(max(self.times[0], self.times[-1]))

    def __call__(self, t: float) -> float:
        if not self.t_first - 1e-12 <= t <= self.t_last + 1e-12:
            raise ValueError(f"path defined on [{self.t_first}, {self.t_last}], not at t={t}")
        order = np.argsort(self.times)
        return float(np.interp(t, self.times[order], self.X[order]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "X"])
            for t, x in zip(self.times, self.X):
                wr.writerow([repr(float(t)), repr(float(x))])


class _Field:
    def __init__(self, traj: Trajectory):
        self.times = np.asarray(traj.times, dtype=float)
        self.nodes, self.vals = traj.field_nodes()
        self.x_lo, self.x_hi = float(self.nodes[0]), float(self.nodes[-1])

    def __call__(self, t: float, x: float) -> float:
        ts = self.times
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, max(ts.size - 2, 0)))
        if ts.size == 1:
            return float(np.interp(x, self.nodes, self.vals[0]))
        t0, t1 = ts[k], ts[k + 1]
        theta = 0.0 if t1 == t0 else min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        w0 = np.interp(x, self.nodes, self.vals[k])
        w1 = np.interp(x, self.nodes, self.vals[k + 1])
        return float((1.0 - theta) * w0 + theta * w1)


def trace(traj: Trajectory, s: float, xi: float, t_end: float, vm: Optional[VelocityModel] = None,
          check_density: bool = True) -> CharacteristicPath:
    """Trace the characteristic through ``(s, xi)`` up to time ``t_end``.

    ``t_end < s`` traces backward.  Raises :class:`DomainExit` (with the partial
    path attached) when the curve leaves the grid.
    """
    vm = greenshields() if vm is None else vm
    ts = np.asarray(traj.times, dtype=float)
    lo, hi = float(ts[0]), float(ts[-1])
    tol = 1e-12 * max(1.0, abs(hi))
    if not (lo - tol <= s <= hi + tol and lo - tol <= t_end <= hi + tol):
        raise ValueError(f"s={s} and t_end={t_end} must lie in the trajectory span [{lo}, {hi}]")
    if check_density and traj.dt_log.size and ts.size > 1:
        spacing = float(np.max(np.diff(ts)))
        if spacing > SPARSE_SNAPSHOT_FACTOR * float(np.max(traj.dt_log)) * (1 + 1e-9):
            raise ValueError(f"snapshot spacing {spacing} exceeds {SPARSE_SNAPSHOT_FACTOR} solver steps")
    fld = _Field(traj)
    if xi < fld.x_lo or xi > fld.x_hi:
        raise DomainExit(f"start point {xi} outside the grid", CharacteristicPath(s, xi, [s], [xi]))

    a, b = sorted((s, t_end))
    inner = ts[(ts > a + tol) & (ts < b - tol)]
    knots = np.concatenate(([a], inner, [b]))
    if t_end < s:
        knots = knots[::-1]

    def rhs(t, x):
        return float(vm.V(np.array(fld(t, x))))

    out_t, out_x = [float(knots[0])], [float(xi)]
    x = float(xi)
    for t0, t1 in zip(knots[:-1], knots[1:]):
        h = t1 - t0
        if h == 0:
            continue
        try:
            k1 = rhs(t0, x)
            k2 = rhs(t0 + h / 2, _inside(fld, x + h / 2 * k1))
            k3 = rhs(t0 + h / 2, _inside(fld, x + h / 2 * k2))
            k4 = rhs(t1, _inside(fld, x + h * k3))
        except _Outside:
            k1 = None
        x_new = None if k1 is None else x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if x_new is None or not fld.x_lo <= x_new <= fld.x_hi:
            partial = CharacteristicPath(s, xi, out_t, out_x, {"integrator": "rk4", "exit_time": float(t1)})
            raise DomainExit(f"characteristic from ({s}, {xi}) left [{fld.x_lo}, {fld.x_hi}] near t={t1}", partial)
        x = x_new
        out_t.append(float(t1))
        out_x.append(x)
    return CharacteristicPath(s, xi, out_t, out_x,
                              {"integrator": "rk4", "interpolation": "bilinear", "steps": len(out_t) - 1})


class _Outside(Exception):
    pass


def _inside(fld: _Field, x: float) -> float:
    if not fld.x_lo <= x <= fld.x_hi:
        raise _Outside
    return x


def mass_between(traj: Trajectory, path1: CharacteristicPath, path2: CharacteristicPath, t: float,
                 tol: float = 1e-12) -> float:
    """``int_{X1(t)}^{X2(t)} u(t, y) dy`` with exact partial-cell quadrature."""
    x1, x2 = path1(t), path2(t)
    if x1 > x2 + tol:
        raise PathOrderError(f"paths crossed at t={t}: X1={x1} > X2={x2}")
    if x1 >= x2:
        return 0.0
    i = traj.index_of(t, tol=1e-9)
    g = traj.grid
    primitive = np.concatenate(([0.0], np.cumsum(traj.u[i]) * g.cell_width))
    # the primitive of a piecewise constant function is linear between edges
    p = np.interp([x1, x2], g.edges, primitive)
    return float(p[1] - p[0])
