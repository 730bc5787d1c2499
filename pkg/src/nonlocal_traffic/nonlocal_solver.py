"""Explicit upwind finite-volume solver for ``u_t + (V(u * eta_eps) u)_x = 0``.

The numerical flux through the edge between cells ``j`` and ``j + 1`` is
``V(w_{j+1/2}) u_j`` where ``w_{j+1/2}`` averages the cells strictly ahead of
the edge.  With ``V >= 0``, non-increasing weights summing to one and
``dt (max|V| + Lip(V) gamma_0) <= dx`` the update is a convex combination that
keeps ``0 <= u <= 1``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import DomainError, MaximumPrincipleViolation, NumericalBlowup, StabilityError
from .grid import Grid1D, Profile
from .kernel import DEFAULT_TAIL_TOL, MIN_CELLS_PER_EPS, DiscreteKernel, KernelSpec, discretize
from .trajectory import Trajectory
from .velocity import VelocityModel

log = logging.getLogger(__name__)

DT_FLOOR_SPEED = 1e-12
BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class NonlocalRunConfig:
    grid: Grid1D
    kernel: KernelSpec
    epsilon: float
    velocity: VelocityModel
    t_end: float
    cfl: float = 0.5
    snapshot_times: Optional[Sequence[float]] = None
    tail_tol: float = DEFAULT_TAIL_TOL
    min_cells_per_eps: float = MIN_CELLS_PER_EPS

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        snaps = self.snapshot_times
        snaps = np.array([0.0, self.t_end] if snaps is None else snaps, dtype=float)
        if snaps.size == 0:
            snaps = np.array([self.t_end])
        if np.any(np.diff(snaps) < 0):
            raise ValueError("snapshot_times must be sorted")
        if snaps[0] < 0 or snaps[-1] > self.t_end * (1 + 1e-12):
            raise ValueError("snapshot_times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", tuple(float(s) for s in np.unique(snaps)))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "kernel": self.kernel.to_dict(),
            "epsilon": self.epsilon,
            "velocity": self.velocity.to_dict(),
            "t_end": self.t_end,
            "cfl": self.cfl,
            "n_snapshot_times": len(self.snapshot_times),
            "tail_tol": self.tail_tol,
            "min_cells_per_eps": self.min_cells_per_eps,
        }


def cfl_dt(cfg) -> float:
    dt = cfg.cfl * cfg.grid.cell_width / max(cfg.velocity.max_abs_V, DT_FLOOR_SPEED)
    if cfg.t_end > 0:
        dt = min(dt, cfg.t_end)
    return dt


def _check_bounds(values, what, t):
    if not np.all(np.isfinite(values)):
        raise NumericalBlowup(f"non-finite {what} at t={t}")
    lo, hi = float(values.min()), float(values.max())
    if lo < -BOUND_TOL or hi > 1.0 + BOUND_TOL:
        raise MaximumPrincipleViolation(f"{what} left [0, 1] at t={t}: min={lo}, max={hi}")
    return lo, hi


def _lax_friedrichs_update(u, speeds, left, right, lam, a):
    ext = np.concatenate(([left], u, [right]))
    ul, ur = ext[:-1], ext[1:]
    flux = 0.5 * speeds * (ul + ur) - 0.5 * a * (ur - ul)
    return u - lam * (flux[1:] - flux[:-1])


def _advance(u: np.ndarray, edges_w: np.ndarray, grid: Grid1D, vm: VelocityModel, dt: float,
             upwind: bool) -> np.ndarray:
    lam = dt / grid.cell_width
    speeds = np.asarray(vm.V(edges_w), dtype=float)
    if upwind:
        return _backend.upwind_update(u, speeds, grid.boundary_left, lam)
    return _lax_friedrichs_update(u, speeds, grid.boundary_left, grid.boundary_right, lam,
                                  max(vm.max_abs_V, DT_FLOOR_SPEED))


def step(u: Profile, dk: DiscreteKernel, vm: VelocityModel, dt: float) -> Profile:
    """One explicit Euler step of the interface-anchored upwind scheme."""
    grid = u.grid
    if dt * vm.max_abs_V > grid.cell_width * (1 + 1e-12):
        raise StabilityError(f"dt={dt} exceeds the CFL limit dx/max|V|={grid.cell_width / vm.max_abs_V}")
    if not math.isclose(dk.cell_width, grid.cell_width, rel_tol=1e-12):
        raise StabilityError("kernel discretised on a different grid")
    upwind = vm.nonnegative
    if not upwind:
        warnings.warn("speed law takes negative values; using the Lax-Friedrichs fallback", RuntimeWarning)
    edges_w = _backend.lookahead(u.values, dk.weights, grid.boundary_right)
    new = _advance(u.values, edges_w, grid, vm, dt, upwind)
    _check_bounds(new, "u", float("nan"))
    return Profile(grid, new)


def solve(cfg: NonlocalRunConfig, u0: Profile, dk: Optional[DiscreteKernel] = None) -> Trajectory:
    grid = cfg.grid
    if not grid.same_cells(u0.grid):
        raise DomainError("initial datum lives on a different grid than the run config")
    grid = u0.grid
    if u0.values.min() < 0 or u0.values.max() > 1:
        raise DomainError("initial datum must take values in [0, 1]")
    if dk is None:
        dk = discretize(cfg.kernel, cfg.epsilon, grid.cell_width, cfg.tail_tol, cfg.min_cells_per_eps)
    vm = cfg.velocity
    upwind = vm.nonnegative
    if not upwind:
        warnings.warn("speed law takes negative values; using the Lax-Friedrichs fallback", RuntimeWarning)
    dt_max = cfl_dt(cfg)
    gamma0 = float(dk.weights[0])
    if upwind and dt_max * (vm.max_abs_V + vm.lip_const * gamma0) > grid.cell_width * (1 + 1e-12):
        raise StabilityError("time step violates dt (max|V| + Lip(V) gamma_0) <= dx")

    snaps = list(cfg.snapshot_times)
    times, us, ws = [], [], []
    dts, masses, bfl = [], [], []
    u = np.array(u0.values, dtype=float)
    t = 0.0
    dx = grid.cell_width
    masses.append(dx * float(u.sum()))
    ext = {"u_min": float(u.min()), "u_max": float(u.max())}
    ext["w_min"], ext["w_max"] = 1.0, 0.0

    k = 0
    while True:
        edges_w = _backend.lookahead(u, dk.weights, grid.boundary_right)
        lo, hi = _check_bounds(edges_w, "w", t)
        ext["w_min"] = min(ext["w_min"], lo)
        ext["w_max"] = max(ext["w_max"], hi)
        while k < len(snaps) and snaps[k] <= t + 1e-13 * max(1.0, t):
            times.append(snaps[k])
            us.append(u.copy())
            ws.append(edges_w[:-1].copy())
            k += 1
        if k >= len(snaps):
            break
        dt = min(dt_max, snaps[k] - t)
        speeds = np.asarray(vm.V(edges_w), dtype=float)
        lam = dt / dx
        if upwind:
            u_new = _backend.upwind_update(u, speeds, grid.boundary_left, lam)
            f_in = speeds[0] * grid.boundary_left
            f_out = speeds[-1] * u[-1]
        else:
            u_new = _lax_friedrichs_update(u, speeds, grid.boundary_left, grid.boundary_right, lam,
                                           max(vm.max_abs_V, DT_FLOOR_SPEED))
            f_in = f_out = float("nan")
        lo, hi = _check_bounds(u_new, "u", t + dt)
        ext["u_min"] = min(ext["u_min"], lo)
        ext["u_max"] = max(ext["u_max"], hi)
        u = u_new
        t = snaps[k] if dt == snaps[k] - t else t + dt
        dts.append(dt)
        masses.append(dx * float(u.sum()))
        bfl.append(f_in - f_out)

    traj = Trajectory(
        kind="nonlocal",
        grid=grid,
        times=np.array(times),
        u=np.array(us),
        w=np.array(ws),
        epsilon=cfg.epsilon,
        dk=dk,
        dt_log=np.array(dts),
        mass_log=np.array(masses),
        boundary_flux_log=np.array(bfl),
        extremes=ext,
        meta={"config": cfg.to_dict(), "scheme": "upwind" if upwind else "lax-friedrichs",
              "backend": _backend.NAME},
    )
    log.debug("nonlocal run eps=%g: %d steps, %d snapshots", cfg.epsilon, len(dts), len(times))
    return traj
