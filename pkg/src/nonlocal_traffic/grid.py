"""Uniform 1-D grids, piecewise-constant profiles and BV tooling.

A :class:`Profile` is the piecewise-constant function equal to ``values[j]``
on cell ``j`` and extended by the constant states ``boundary_left`` /
``boundary_right`` outside the grid.  Total variation and L1 distances are
computed for that extended function.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridError


@dataclass(frozen=True)
class Grid1D:
    x_left: float
    cell_width: float
    n_cells: int
    boundary_left: float = 0.0
    boundary_right: float = 0.0

    def __post_init__(self):
        if not self.cell_width > 0:
            raise GridError(f"cell_width must be positive, got {self.cell_width}")
        if self.n_cells < 2:
            raise GridError(f"need at least 2 cells, got {self.n_cells}")
        for name in ("boundary_left", "boundary_right"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GridError(f"{name}={v} outside [0, 1]")

    @property
    def dx(self) -> float:
        return self.cell_width

    @property
    def x_right(self) -> float:
        return self.x_left + self.n_cells * self.cell_width

    @property
    def edges(self) -> np.ndarray:
        return self.x_left + self.cell_width * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_left + self.cell_width * (np.arange(self.n_cells) + 0.5)

    def with_boundaries(self, left: float, right: float) -> "Grid1D":
        return Grid1D(self.x_left, self.cell_width, self.n_cells, left, right)

    def same_cells(self, other: "Grid1D") -> bool:
        return (
            self.n_cells == other.n_cells
            and math.isclose(self.cell_width, other.cell_width, rel_tol=1e-12)
            and math.isclose(self.x_left, other.x_left, rel_tol=1e-12, abs_tol=1e-12 * self.cell_width)
        )

    def refined(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.x_left, self.cell_width / factor, self.n_cells * factor,
                      self.boundary_left, self.boundary_right)

    def to_dict(self) -> dict:
        return {
            "x_left": self.x_left,
            "cell_width": self.cell_width,
            "n_cells": self.n_cells,
            "boundary_left": self.boundary_left,
            "boundary_right": self.boundary_right,
        }


@dataclass(frozen=True, eq=False)
class Profile:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise GridError(f"expected {self.grid.n_cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("profile contains NaN or infinite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def boundary_left(self) -> float:
        return self.grid.boundary_left

    @property
    def boundary_right(self) -> float:
        return self.grid.boundary_right

    def extended(self) -> np.ndarray:
        """Values with one ghost cell on each side."""
        return np.concatenate(([self.grid.boundary_left], self.values, [self.grid.boundary_right]))

    def mass(self) -> float:
        return self.grid.cell_width * float(np.sum(self.values))

    def __add__(self, other):
        if isinstance(other, Profile):
            _check_same_grid(self, other)
            other = other.values
        return Profile(self.grid, self.values + other)

    def with_values(self, values) -> "Profile":
        return Profile(self.grid, values)

    def to_csv(self, path, column: str = "value") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x_center", column])
            for x, v in zip(self.grid.centers, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])

    def to_json(self) -> str:
        return json.dumps({"grid": self.grid.to_dict(), "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        data = json.loads(text)
        return cls(Grid1D(**data["grid"]), np.asarray(data["values"], dtype=float))


def _check_same_grid(p: Profile, q: Profile) -> None:
    if not p.grid.same_cells(q.grid):
        raise GridError(f"grid mismatch: {p.grid} vs {q.grid}")


def total_variation(p: Profile) -> float:
    ext = p.extended()
    return float(np.sum(np.abs(np.diff(ext))))


def tv_decomposition(p: Profile) -> tuple[float, float]:
    """Split the variation into the net jump and the decreasing part.

    Returns ``(boundary_right - boundary_left, sum of negative increments)``;
    the total variation equals ``jump + 2 * negative``.
    """
    d = np.diff(p.extended())
    jump = p.grid.boundary_right - p.grid.boundary_left
    negative = float(np.sum(np.maximum(0.0, -d)))
    return float(jump), negative


def l1_distance(p: Profile, q: Profile) -> float:
    _check_same_grid(p, q)
    return p.grid.cell_width * float(np.sum(np.abs(p.values - q.values)))


def shifted(p: Profile, n_cells: int) -> Profile:
    """Translate ``p`` by ``n_cells`` cells to the right (constant extension fills)."""
    v = p.values
    n = v.size
    out = np.empty_like(v)
    if n_cells >= 0:
        k = min(n_cells, n)
        out[:k] = p.grid.boundary_left
        out[k:] = v[: n - k]
    else:
        k = min(-n_cells, n)
        out[: n - k] = v[k:]
        out[n - k:] = p.grid.boundary_right
    return Profile(p.grid, out)


def _l1_piecewise_linear_vs_constant(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exact mean of |g - c| over a cell where g goes linearly from a to b."""
    da = a - c
    db = b - c
    same = da * db >= 0
    out = np.empty_like(da)
    out[same] = 0.5 * np.abs(da[same] + db[same])
    diff = ~same
    if np.any(diff):
        s = np.abs(da[diff]) + np.abs(db[diff])
        out[diff] = 0.5 * (da[diff] ** 2 + db[diff] ** 2) / s
    return out


def mollify_defect(p: Profile, dk) -> float:
    """L1 norm of ``p * eta_eps - p``.

    The convolution is taken from :func:`nonlocal_traffic.kernel.convolve`
    (values at the left cell edges) and interpolated linearly across each
    cell; this is exact for the uniform kernel when epsilon is a multiple of
    the cell width.
    """
    from .kernel import lookahead_edges

    if not math.isclose(dk.cell_width, p.grid.cell_width, rel_tol=1e-12):
        raise GridError("kernel discretised on a different cell width")
    edges = lookahead_edges(p, dk)
    per_cell = _l1_piecewise_linear_vs_constant(edges[:-1], edges[1:], p.values)
    return p.grid.cell_width * float(np.sum(per_cell))


def cell_averages_piecewise_constant(grid: Grid1D, breaks: Sequence[float], levels: Sequence[float]) -> np.ndarray:
    """Exact cell averages of a step function.

    ``levels[i]`` holds on ``]breaks[i-1], breaks[i][`` with ``levels[0]`` to the
    left of ``breaks[0]`` and ``levels[-1]`` to the right of ``breaks[-1]``.
    """
    breaks = np.asarray(breaks, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if levels.size != breaks.size + 1:
        raise ValueError("need len(levels) == len(breaks) + 1")
    if np.any(np.diff(breaks) < 0):
        raise ValueError("breaks must be sorted")
    e = grid.edges
    lo, hi = e[:-1], e[1:]
    out = np.full(grid.n_cells, levels[0])
    # add (levels[i+1] - levels[i]) times the fraction of the cell right of breaks[i]
    for b, jump in zip(breaks, np.diff(levels)):
        out += jump * np.clip((hi - np.maximum(lo, b)) / (hi - lo), 0.0, 1.0)
    # cells containing no break take their level exactly (no rounding above max(levels))
    k_lo = np.searchsorted(breaks, lo, side="right")
    k_hi = np.searchsorted(breaks, hi, side="left")
    clean = k_lo == k_hi
    out[clean] = levels[k_lo[clean]]
    return out


def aligned_grid(x_min: float, x_max: float, dx: float, boundary_left: float = 0.0,
                 boundary_right: float = 0.0) -> Grid1D:
    """Grid covering ``[x_min, x_max]`` whose edges sit on integer multiples of ``dx``."""
    i0 = math.floor(x_min / dx + 1e-9)
    i1 = math.ceil(x_max / dx - 1e-9)
    return Grid1D(i0 * dx, dx, max(i1 - i0, 2), boundary_left, boundary_right)


def domain_for(feature_min: float, feature_max: float, dx: float, t_end: float, max_speed: float,
               lookahead: float, boundary_left: float = 0.0, boundary_right: float = 0.0,
               pad: float = 0.0) -> Grid1D:
    """Grid wide enough that nothing reaches the boundaries before ``t_end``.

    Speeds are nonnegative, so the right margin is ``t_end * max_speed +
    lookahead``; the left margin only has to hold the look-ahead window.
    """
    left = feature_min - lookahead - pad
    right = feature_max + t_end * max_speed + lookahead + pad
    return aligned_grid(left, right, dx, boundary_left, boundary_right)
