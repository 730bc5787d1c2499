"""Time-stamped snapshots of a run, shared by the nonlocal and local solvers."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Grid1D, Profile


@dataclass(eq=False)
class Trajectory:
    """Snapshots ``(t, u, w)`` plus the per-step ledger of a run.

    ``u`` and ``w`` are stored as ``(n_snapshots, n_cells)`` arrays; ``w`` is
    the look-ahead average at the left edge of each cell (for local runs
    ``w`` is ``u`` itself).
    """

    kind: str
    grid: Grid1D
    times: np.ndarray
    u: np.ndarray
    w: np.ndarray
    epsilon: Optional[float] = None
    dk: object = None
    dt_log: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass_log: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_flux_log: np.ndarray = field(default_factory=lambda: np.zeros(0))
    extremes: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def u_profile(self, i: int) -> Profile:
        return Profile(self.grid, self.u[i])

    def w_profile(self, i: int) -> Profile:
        return Profile(self.grid, self.w[i])

    @property
    def snapshots(self):
        for i, t in enumerate(self.times):
            yield float(t), self.u_profile(i), self.w_profile(i)

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return i

    def field_nodes(self):
        """Spatial nodes and per-snapshot node values of ``w``.

        Nonlocal runs store ``w`` on the left cell edges, and the last edge only
        sees the right state.  Local runs store cell averages, which are placed
        at the centres and padded with the boundary states.
        """
        g = self.grid
        n = len(self)
        if self.kind == "nonlocal":
            return g.edges, np.column_stack([self.w, np.full(n, g.boundary_right)])
        nodes = np.concatenate(([g.x_left], g.centers, [g.x_right]))
        vals = np.column_stack([np.full(n, g.boundary_left), self.w, np.full(n, g.boundary_right)])
        return nodes, vals

    def mass(self, i: int) -> float:
        return self.grid.cell_width * float(np.sum(self.u[i]))

    def max_mass_drift_rate(self) -> float:
        """Largest |mass(t) - mass(0)| / t over the step ledger."""
        if self.mass_log.size < 2:
            return 0.0
        t = np.cumsum(self.dt_log)
        drift = np.abs(self.mass_log[1:] - self.mass_log[0])
        return float(np.max(drift / np.maximum(t, 1e-300)))

    def max_balance_drift_rate(self) -> float:
        """Largest |mass(t) - mass(0) - boundary inflow up to t| / t over the step ledger."""
        if self.mass_log.size < 2 or self.boundary_flux_log.size != self.dt_log.size:
            return 0.0
        if not np.all(np.isfinite(self.boundary_flux_log)):
            return float("nan")
        t = np.cumsum(self.dt_log)
        inflow = np.cumsum(self.dt_log * self.boundary_flux_log)
        drift = np.abs(self.mass_log[1:] - self.mass_log[0] - inflow)
        return float(np.max(drift / np.maximum(t, 1e-300)))

    def manifest(self) -> dict:
        d = {
            "kind": self.kind,
            "grid": self.grid.to_dict(),
            "epsilon": self.epsilon,
            "n_snapshots": int(self.times.size),
            "t_end": self.t_end,
            "n_steps": int(self.dt_log.size),
            "dt_max": float(self.dt_log.max()) if self.dt_log.size else 0.0,
            "mass_initial": float(self.mass_log[0]) if self.mass_log.size else self.mass(0),
            "mass_final": float(self.mass_log[-1]) if self.mass_log.size else self.mass(len(self) - 1),
            "mass_drift_rate_max": self.max_mass_drift_rate(),
            "mass_balance_drift_rate_max": self.max_balance_drift_rate(),
            "extremes": self.extremes,
        }
        if self.dk is not None:
            d["kernel_cells"] = int(self.dk.n_weights)
            d["kernel_truncation_mass"] = float(self.dk.truncation_mass)
        d.update(self.meta)
        return d

    def write(self, directory, every: int = 1) -> None:
        """Snapshot CSVs (x_center, u, w) and ``manifest.json`` into ``directory``."""
        snap_dir = os.path.join(directory, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        x = self.grid.centers
        for i in range(0, len(self), every):
            path = os.path.join(snap_dir, f"t_{i:05d}.csv")
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["x_center", "u", "w"])
                for row in zip(x, self.u[i], self.w[i]):
                    wr.writerow([repr(float(v)) for v in row])
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True, default=float)
