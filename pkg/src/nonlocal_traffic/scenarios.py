"""Initial data: building blocks, the multi-scale counter-example and standard test data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ResolutionError, ScaleError
from .grid import Grid1D, Profile, aligned_grid, cell_averages_piecewise_constant


@dataclass(frozen=True)
class BuildingBlock:
    """Two rectangles of height ``h`` on ``]-7l, -6l[`` and ``]-3l, -2l[``."""

    h: float
    ell: float

    def __post_init__(self):
        if not 0.0 < self.h <= 1.0:
            raise ScaleError(f"block height h={self.h} outside ]0, 1]")
        if not 0.0 < self.ell < 1.0:
            raise ScaleError(f"block length ell={self.ell} outside ]0, 1[")

    @property
    def closure_case(self) -> bool:
        """``h == 1`` lies outside the open interval of the construction; kept for sharp tests."""
        return self.h == 1.0

    @property
    def breaks(self) -> tuple:
        l = self.ell
        return (-7 * l, -6 * l, -3 * l, -2 * l)

    @property
    def levels(self) -> tuple:
        return (0.0, self.h, 0.0, self.h, 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        l = self.ell
        inside = ((x > -7 * l) & (x < -6 * l)) | ((x > -3 * l) & (x < -2 * l))
        return np.where(inside, self.h, 0.0)

    def cell_averages(self, grid: Grid1D) -> np.ndarray:
        return cell_averages_piecewise_constant(grid, self.breaks, self.levels)

    def table(self) -> dict:
        return {"h": self.h, "ell": self.ell, "support": [-7 * self.ell, -2 * self.ell],
                "closure_case": self.closure_case}


def building_block(h: float, ell: float) -> BuildingBlock:
    return BuildingBlock(h, ell)


def _step_averages(grid: Grid1D, x0: float = 0.0) -> np.ndarray:
    return cell_averages_piecewise_constant(grid, [x0], [0.0, 1.0])


@dataclass(frozen=True)
class CounterexampleSpec:
    eps_seq: tuple
    h_seq: tuple
    n_blocks: Optional[int] = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_seq)
        hs = tuple(float(h) for h in self.h_seq)
        n = len(eps) if self.n_blocks is None else int(self.n_blocks)
        if n < 1 or n > len(eps) or n > len(hs):
            raise ScaleError(f"n_blocks={n} incompatible with {len(eps)} scales and {len(hs)} heights")
        if any(e <= 0 for e in eps):
            raise ScaleError("scales must be positive")
        for i in range(len(eps) - 1):
            if eps[i + 1] > eps[i] / 16 * (1 + 1e-12):
                raise ScaleError(f"eps[{i + 1}]={eps[i + 1]} > eps[{i}]/16; successive scales must shrink by 16")
        if any(not 0.0 <= h <= 1.0 for h in hs):
            raise ScaleError("heights must lie in [0, 1]")
        object.__setattr__(self, "eps_seq", eps)
        object.__setattr__(self, "h_seq", hs)
        object.__setattr__(self, "n_blocks", n)

    @classmethod
    def default(cls, n_blocks: int, eps1: float = 1.0) -> "CounterexampleSpec":
        """``eps_n = 16^(1-n) eps1`` and ``h_n = 2^-n``."""
        eps = tuple(eps1 * 16.0 ** (1 - n) for n in range(1, n_blocks + 1))
        hs = tuple(2.0 ** -n for n in range(1, n_blocks + 1))
        return cls(eps, hs, n_blocks)

    @property
    def ells(self) -> tuple:
        return tuple(e / 4 for e in self.eps_seq[: self.n_blocks])

    def blocks(self) -> list:
        return [BuildingBlock(h, l) for h, l in zip(self.h_seq[: self.n_blocks], self.ells) if h > 0]

    def exact_tv(self) -> float:
        return 4.0 * sum(self.h_seq[: self.n_blocks]) + 1.0

    def block_table(self) -> list:
        return [dict(n=i + 1, eps=e, **BuildingBlock(h, e / 4).table())
                for i, (e, h) in enumerate(zip(self.eps_seq[: self.n_blocks], self.h_seq[: self.n_blocks]))
                if h > 0]

    def flags(self) -> list:
        return ["h=1 closure case"] if any(h == 1.0 for h in self.h_seq[: self.n_blocks]) else []


def counterexample_grid(spec: CounterexampleSpec, dx: float, reach: float, t_end: float = 0.0,
                        pad: float = 0.0) -> Grid1D:
    """Grid for the counter-example: left of the outermost block with room for ``reach``."""
    ell1 = spec.ells[0]
    x_min = -8 * ell1 - reach - pad
    x_max = reach + t_end + pad + dx
    return aligned_grid(x_min, x_max, dx, 0.0, 1.0)


def counterexample_datum(spec: CounterexampleSpec, grid: Grid1D) -> Profile:
    offending = [n + 1 for n, l in enumerate(spec.ells) if grid.cell_width > l / 16 * (1 + 1e-12)]
    if offending:
        raise ResolutionError(f"dx={grid.cell_width} does not resolve blocks n={offending} (need dx <= ell_n/16)")
    if grid.x_left > -8 * spec.ells[0] + 1e-12 or grid.x_right <= 0:
        raise ResolutionError("grid must cover [-8 ell_1, 0]")
    g = grid.with_boundaries(0.0, 1.0)
    vals = _step_averages(g)
    for b in spec.blocks():
        vals = vals + b.cell_averages(g)
    return Profile(g, vals)


def lemma55_datum(h: float, ell: float, eps: float, delta: float, grid: Grid1D,
                  s: Optional[Callable[[Grid1D], np.ndarray]] = None) -> Profile:
    """Block + unit step + optional perturbation ``s`` supported in ``]-delta, 0[``.

    ``s`` maps a grid to cell averages; values must lie in [0, 1] and vanish
    outside ``]-delta, 0[``.
    """
    if not ell > max(eps + delta, 2 * eps):
        raise ScaleError(f"need ell > max(eps + delta, 2 eps); got ell={ell}, eps={eps}, delta={delta}")
    if not 0 <= delta < 2 * ell:
        raise ScaleError("need 0 <= delta < 2 ell")
    g = grid.with_boundaries(0.0, 1.0)
    vals = BuildingBlock(h, ell).cell_averages(g) + _step_averages(g)
    if s is not None:
        sv = np.asarray(s(g), dtype=float)
        e = g.edges
        outside = (e[1:] <= -delta) | (e[:-1] >= 0)
        if np.any(sv < 0) or np.any(sv > 1) or np.any(np.abs(sv[outside]) > 0):
            raise ScaleError("perturbation must take values in [0, 1] and vanish outside ]-delta, 0[")
        vals = vals + sv
    return Profile(g, vals)


# --------------------------------------------------------------- standard data


@dataclass(frozen=True)
class Riemann:
    u_left: float
    u_right: float
    x0: float = 0.0

    @property
    def exact_tv(self) -> float:
        return abs(self.u_right - self.u_left)

    @property
    def feature_range(self) -> tuple:
        return (self.x0, self.x0)

    def cell_averages(self, grid: Grid1D) -> np.ndarray:
        return cell_averages_piecewise_constant(grid, [self.x0], [self.u_left, self.u_right])

    def to_dict(self) -> dict:
        return {"kind": "Riemann", "u_left": self.u_left, "u_right": self.u_right, "x0": self.x0}


@dataclass(frozen=True)
class MonotoneRamp:
    u_min: float = 0.0
    u_max: float = 1.0
    x0: float = -0.5
    x1: float = 0.5

    @property
    def exact_tv(self) -> float:
        return self.u_max - self.u_min

    @property
    def feature_range(self) -> tuple:
        return (self.x0, self.x1)

    @property
    def u_left(self):
        return self.u_min

    @property
    def u_right(self):
        return self.u_max

    def cell_averages(self, grid: Grid1D) -> np.ndarray:
        # exact averages of the clamped linear ramp via its antiderivative
        e = grid.edges
        a, b = self.x0, self.x1
        slope = (self.u_max - self.u_min) / (b - a)
        xc = np.clip(e, a, b)
        G = self.u_min * np.minimum(e, a) + self.u_min * (xc - a) + 0.5 * slope * (xc - a) ** 2 \
            + self.u_max * np.maximum(e - b, 0.0)
        out = np.diff(G) / grid.cell_width
        # cells without a corner: exact constants, or the centre value on the linear part
        lo, hi = e[:-1], e[1:]
        out[hi <= a] = self.u_min
        out[lo >= b] = self.u_max
        lin = (lo >= a) & (hi <= b)
        out[lin] = self.u_min + slope * (0.5 * (lo[lin] + hi[lin]) - a)
        return out

    def to_dict(self) -> dict:
        return {"kind": "MonotoneRamp", "u_min": self.u_min, "u_max": self.u_max, "x0": self.x0, "x1": self.x1}


@dataclass(frozen=True)
class RandomBV:
    """Step function with ``n_jumps`` random jumps in ``[x_min, x_max]`` and random levels."""

    seed: int
    n_jumps: int = 20
    x_min: float = -1.0
    x_max: float = 1.0
    _table: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        breaks = np.sort(rng.uniform(self.x_min, self.x_max, self.n_jumps))
        levels = rng.uniform(0.0, 1.0, self.n_jumps + 1)
        object.__setattr__(self, "_table", (breaks, levels))

    @property
    def breaks(self) -> np.ndarray:
        return self._table[0]

    @property
    def levels(self) -> np.ndarray:
        return self._table[1]

    @property
    def u_left(self) -> float:
        return float(self.levels[0])

    @property
    def u_right(self) -> float:
        return float(self.levels[-1])

    @property
    def exact_tv(self) -> float:
        return float(np.sum(np.abs(np.diff(self.levels))))

    @property
    def feature_range(self) -> tuple:
        return (self.x_min, self.x_max)

    def cell_averages(self, grid: Grid1D) -> np.ndarray:
        return cell_averages_piecewise_constant(grid, self.breaks, self.levels)

    def to_dict(self) -> dict:
        return {"kind": "RandomBV", "seed": self.seed, "n_jumps": self.n_jumps,
                "x_min": self.x_min, "x_max": self.x_max, "exact_tv": self.exact_tv}


def standard_datum(kind, grid: Grid1D) -> Profile:
    g = grid.with_boundaries(kind.u_left, kind.u_right)
    vals = kind.cell_averages(g)
    return Profile(g, np.clip(vals, 0.0, 1.0))


def datum_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "Riemann":
        return Riemann(float(cfg["u_left"]), float(cfg["u_right"]), float(cfg.get("x0", 0.0)))
    if kind == "MonotoneRamp":
        return MonotoneRamp(float(cfg.get("u_min", 0.0)), float(cfg.get("u_max", 1.0)),
                            float(cfg.get("x0", -0.5)), float(cfg.get("x1", 0.5)))
    if kind == "RandomBV":
        return RandomBV(int(cfg["seed"]), int(cfg.get("n_jumps", 20)), float(cfg.get("x_min", -1.0)),
                        float(cfg.get("x_max", 1.0)))
    raise ValueError(f"unknown datum kind {kind!r}")


def grid_for_datum(kind, dx: float, t_end: float, max_speed: float, reach: float, pad: float = 0.1) -> Grid1D:
    """Aligned grid with room for the look-ahead window and rightward transport."""
    a, b = kind.feature_range
    left = a - reach - pad
    right = b + t_end * max_speed + reach + pad
    g = aligned_grid(left, right, dx)
    return g.with_boundaries(kind.u_left, kind.u_right)
