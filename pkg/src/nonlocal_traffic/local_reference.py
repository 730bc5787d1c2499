"""Monotone finite-volume solver for the local LWR law ``u_t + (u V(u))_x = 0``.

Godunov's flux is used for Greenshields (closed form through the demand and
supply functions of the concave flux); any other speed law gets the
Engquist-Osher splitting, tabulated once per model.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, MaximumPrincipleViolation, NumericalBlowup, StabilityError, UnsupportedModel
from .grid import Grid1D, Profile
from .trajectory import Trajectory
from .velocity import VelocityModel

log = logging.getLogger(__name__)

EO_TABLE_POINTS = 8193
BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LocalRunConfig:
    grid: Grid1D
    velocity: VelocityModel
    t_end: float
    cfl: float = 0.9
    snapshot_times: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.cfl <= 0:
            raise ValueError(f"cfl must be positive, got {self.cfl}")
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
        return {"grid": self.grid.to_dict(), "velocity": self.velocity.to_dict(), "t_end": self.t_end,
                "cfl": self.cfl, "n_snapshot_times": len(self.snapshot_times)}


# ------------------------------------------------------------------ fluxes


class _EOTable:
    """Increasing and decreasing parts of ``f`` sampled on a fine uniform table.

    ``f_plus`` accumulates the positive increments of ``f`` and ``f_minus`` the
    negative ones, so both stay monotone under linear interpolation and
    ``f(0) + f_plus + f_minus`` reproduces ``f`` at the table nodes.
    """

    def __init__(self, vm: VelocityModel, n: int = EO_TABLE_POINTS):
        self.s = np.linspace(0.0, 1.0, n)
        fs = vm.f(self.s)
        df = np.diff(fs)
        self.f0 = float(fs[0])
        self.f_plus = np.concatenate(([0.0], np.cumsum(np.maximum(df, 0.0))))
        self.f_minus = np.concatenate(([0.0], np.cumsum(np.minimum(df, 0.0))))
        self.max_speed = float(np.max(np.abs(df))) * (n - 1)

    def __call__(self, a, b):
        return self.f0 + np.interp(a, self.s, self.f_plus) + np.interp(b, self.s, self.f_minus)


_EO_CACHE: dict = {}


def _eo_table(vm: VelocityModel) -> _EOTable:
    key = id(vm)
    entry = _EO_CACHE.get(key)
    if entry is None or entry[0] is not vm:
        entry = (vm, _EOTable(vm))
        _EO_CACHE[key] = entry
    return entry[1]


def _godunov_greenshields(a, b):
    # demand(a) = f(min(a, 1/2)), supply(b) = f(max(b, 1/2)); the flux is their minimum
    ad = np.minimum(a, 0.5)
    bs = np.maximum(b, 0.5)
    return np.minimum(ad * (1.0 - ad), bs * (1.0 - bs))


def numerical_flux(vm: VelocityModel, uL, uR):
    """Vectorised two-point monotone flux (Godunov or Engquist-Osher)."""
    a = np.asarray(uL, dtype=float)
    b = np.asarray(uR, dtype=float)
    if vm.is_greenshields:
        return _godunov_greenshields(a, b)
    return _eo_table(vm)(a, b)


def godunov_flux(vm: VelocityModel, uL: float, uR: float) -> float:
    if not (0.0 <= uL <= 1.0 and 0.0 <= uR <= 1.0):
        raise DomainError(f"states ({uL}, {uR}) outside [0, 1]")
    return float(numerical_flux(vm, uL, uR))


def max_characteristic_speed(vm: VelocityModel) -> float:
    if vm.is_greenshields:
        return 1.0
    s = np.linspace(0.0, 1.0, 4097)
    return max(float(np.max(np.abs(vm.f_prime(s)))), _eo_table(vm).max_speed)


# ------------------------------------------------------------------ marching


def _fluxes(vm, u, left, right):
    ext = np.concatenate(([left], u, [right]))
    return numerical_flux(vm, ext[:-1], ext[1:])


def local_step(u: np.ndarray, vm: VelocityModel, left: float, right: float, lam: float) -> np.ndarray:
    F = _fluxes(vm, u, left, right)
    return u - lam * (F[1:] - F[:-1])


def cell_entropy_residual(u_old: np.ndarray, u_new: np.ndarray, vm: VelocityModel, left: float, right: float,
                          lam: float, c: float) -> float:
    """Largest value of the discrete Kruzkov cell-entropy inequality.

    For a monotone scheme ``|u^{n+1} - c| - |u^n - c| + lam (G_{j+1/2} - G_{j-1/2})``
    is non-positive with ``G(a, b) = F(a v c, b v c) - F(a ^ c, b ^ c)``; the
    returned maximum should therefore be at most rounding.
    """
    ext = np.concatenate(([left], u_old, [right]))
    a, b = ext[:-1], ext[1:]
    G = numerical_flux(vm, np.maximum(a, c), np.maximum(b, c)) - numerical_flux(vm, np.minimum(a, c),
                                                                                np.minimum(b, c))
    r = np.abs(u_new - c) - np.abs(u_old - c) + lam * (G[1:] - G[:-1])
    return float(np.max(r))


def solve_local(cfg: LocalRunConfig, u0: Profile,
                monitor: Optional[Callable[[float, np.ndarray, np.ndarray, float], None]] = None) -> Trajectory:
    """March the monotone scheme; ``monitor(t, u_old, u_new, lam)`` is called after each step."""
    grid = u0.grid
    if not grid.same_cells(cfg.grid):
        raise DomainError("initial datum lives on a different grid than the run config")
    if u0.values.min() < 0 or u0.values.max() > 1:
        raise DomainError("initial datum must take values in [0, 1]")
    vm = cfg.velocity
    speed = max_characteristic_speed(vm)
    if cfg.cfl * (1 - 1e-12) > 1.0:
        raise StabilityError(f"cfl={cfg.cfl} exceeds 1; the monotone scheme needs dt max|f'| <= dx")
    dx = grid.cell_width
    dt_max = cfg.cfl * dx / max(speed, 1e-12)
    if cfg.t_end > 0:
        dt_max = min(dt_max, cfg.t_end)
    left, right = grid.boundary_left, grid.boundary_right

    snaps = list(cfg.snapshot_times)
    times, us, dts, masses, bfl = [], [], [], [], []
    u = np.array(u0.values, dtype=float)
    masses.append(dx * float(u.sum()))
    ext = {"u_min": float(u.min()), "u_max": float(u.max())}
    t = 0.0
    k = 0
    while True:
        while k < len(snaps) and snaps[k] <= t + 1e-13 * max(1.0, t):
            times.append(snaps[k])
            us.append(u.copy())
            k += 1
        if k >= len(snaps):
            break
        dt = min(dt_max, snaps[k] - t)
        lam = dt / dx
        F = _fluxes(vm, u, left, right)
        u_new = u - lam * (F[1:] - F[:-1])
        if not np.all(np.isfinite(u_new)):
            raise NumericalBlowup(f"non-finite u at t={t + dt}")
        lo, hi = float(u_new.min()), float(u_new.max())
        if lo < -BOUND_TOL or hi > 1 + BOUND_TOL:
            raise MaximumPrincipleViolation(f"u left [0, 1] at t={t + dt}: min={lo}, max={hi}")
        ext["u_min"] = min(ext["u_min"], lo)
        ext["u_max"] = max(ext["u_max"], hi)
        if monitor is not None:
            monitor(t, u, u_new, lam)
        u = u_new
        t = snaps[k] if dt == snaps[k] - t else t + dt
        dts.append(dt)
        masses.append(dx * float(u.sum()))
        bfl.append(float(F[0] - F[-1]))

    arr = np.array(us)
    return Trajectory(kind="local", grid=grid, times=np.array(times), u=arr, w=arr.copy(),
                      dt_log=np.array(dts), mass_log=np.array(masses), boundary_flux_log=np.array(bfl),
                      extremes=ext, meta={"config": cfg.to_dict(),
                                          "scheme": "godunov" if vm.is_greenshields else "engquist-osher"})


# ------------------------------------------------------------------ exact Riemann solutions


def exact_riemann(vm: VelocityModel, uL: float, uR: float, t: float, x, x0: float = 0.0):
    """Entropy solution of the Greenshields Riemann problem at ``(t, x)``.

    ``uL < uR`` gives a shock travelling at ``1 - uL - uR``; ``uL > uR`` a
    rarefaction ``u = clamp((1 - (x - x0)/t)/2, uR, uL)``.
    """
    if not vm.is_greenshields:
        raise UnsupportedModel("exact Riemann solutions are only available for Greenshields")
    xs = np.asarray(x, dtype=float) - x0
    if t <= 0 or uL == uR:
        out = np.where(xs > 0, uR, uL) if uL != uR else np.full_like(xs, uL)
    elif uL < uR:
        out = np.where(xs > (1.0 - uL - uR) * t, uR, uL)
    else:
        out = np.clip(0.5 * (1.0 - xs / t), uR, uL)
    return float(out) if out.ndim == 0 else out


def exact_riemann_primitive(vm: VelocityModel, uL: float, uR: float, t: float, x, x0: float = 0.0):
    """``int_{x0}^{x} u(t, y) dy`` of the exact Riemann solution, for exact cell averages."""
    if not vm.is_greenshields:
        raise UnsupportedModel("exact Riemann solutions are only available for Greenshields")
    xs = np.asarray(x, dtype=float) - x0
    if t <= 0 or uL <= uR:
        s = 0.0 if t <= 0 else (1.0 - uL - uR) * t
        return np.where(xs < s, uL * xs, uL * s + uR * (xs - s))
    a, b = t * (1.0 - 2.0 * uL), t * (1.0 - 2.0 * uR)
    xc = np.clip(xs, a, b)

    def fan(y):
        return 0.5 * y - y * y / (4.0 * t)

    return uL * np.minimum(xs, a) + (fan(xc) - fan(a)) + uR * np.maximum(xs - b, 0.0)


def exact_riemann_averages(vm: VelocityModel, uL: float, uR: float, t: float, grid: Grid1D,
                           x0: float = 0.0) -> Profile:
    P = exact_riemann_primitive(vm, uL, uR, t, grid.edges, x0)
    return Profile(grid.with_boundaries(uL, uR), np.diff(P) / grid.cell_width)
