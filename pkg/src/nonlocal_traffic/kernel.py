"""Anisotropic convolution kernels and the look-ahead average ``w = u * eta_eps``.

Kernels live on the negative half-line: drivers at ``x`` average the density
over ``[x, x + support]`` downstream.  After scaling by epsilon the discrete
weights ``gamma_k`` are the masses of ``eta_eps`` over the k-th cell ahead of
an evaluation edge, so for a piecewise-constant density the discrete average
at a cell edge coincides with the continuum convolution there.

Convention: ``convolve(u)[j]`` is ``w`` at the *left edge* of cell ``j``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import _backend
from .errors import GridError, InvalidKernel, ResolutionError, TruncationError
from .grid import Profile

MIN_CELLS_PER_EPS = 8
DEFAULT_TAIL_TOL = 1e-10
MAX_KERNEL_CELLS = 10**6


class KernelFamily(str, enum.Enum):
    EXPONENTIAL = "Exponential"
    UNIFORM = "Uniform"
    PIECEWISE_LINEAR = "PiecewiseLinear"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel ``eta`` on the real line, declared with its traffic properties.

    ``cumulative`` (optional) is ``xi -> integral of eta over ]-inf, xi]``; when
    present the discrete weights are exact cell masses.
    """

    family: KernelFamily
    density: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    is_convex: bool
    left_limit_at_zero: float
    cumulative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not self.left_limit_at_zero >= 0:
            raise InvalidKernel("left limit at 0 must be nonnegative")
        if not self.support_radius > 0:
            raise InvalidKernel("support radius must be positive")

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support_radius)

    def first_moment(self) -> float:
        """``C_eta = integral |xi| eta(xi) d xi``."""
        if self.family is KernelFamily.EXPONENTIAL:
            return 1.0
        if self.family is KernelFamily.UNIFORM:
            return 0.5
        lo = -self.support_radius if self.compact else -np.inf
        val, _ = integrate.quad(lambda s: -s * float(self.density(np.array([s]))[0]), lo, 0.0, limit=400)
        return val

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "is_convex": self.is_convex,
             "left_limit_at_zero": self.left_limit_at_zero,
             "support_radius": self.support_radius if self.compact else "infinite"}
        d.update(self.params)
        return d


def exponential() -> KernelSpec:
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, np.exp(np.minimum(x, 0.0)), 0.0)

    def cumulative(x):
        return np.exp(np.minimum(np.asarray(x, dtype=float), 0.0))

    return KernelSpec(KernelFamily.EXPONENTIAL, density, math.inf, True, 1.0, cumulative)


def uniform() -> KernelSpec:
    def density(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > -1.0) & (x < 0.0), 1.0, 0.0)

    def cumulative(x):
        return np.clip(np.asarray(x, dtype=float) + 1.0, 0.0, 1.0)

    return KernelSpec(KernelFamily.UNIFORM, density, 1.0, False, 1.0, cumulative)


def piecewise_linear(nodes, values, family=KernelFamily.PIECEWISE_LINEAR) -> KernelSpec:
    """Linear interpolation of ``values`` at ``nodes`` (ending at 0), zero elsewhere.

    The mass is whatever the table integrates to; :func:`validate_kernel`
    flags tables that are not normalised.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2 or nodes.size != values.size:
        raise InvalidKernel("need matching node/value tables with at least two entries")
    if np.any(np.diff(nodes) <= 0):
        raise InvalidKernel("nodes must be strictly increasing")
    if nodes[-1] != 0.0 or nodes[0] >= 0.0:
        raise InvalidKernel("nodes must span [xi_0, 0] with xi_0 < 0")
    widths = np.diff(nodes)
    seg_mass = 0.5 * widths * (values[:-1] + values[1:])
    cum_at_nodes = np.concatenate(([0.0], np.cumsum(seg_mass)))
    slopes = np.diff(values) / widths

    def density(x):
        x = np.asarray(x, dtype=float)
        inside = (x > nodes[0]) & (x < 0.0)
        return np.where(inside, np.interp(x, nodes, values), 0.0)

    def cumulative(x):
        x = np.clip(np.asarray(x, dtype=float), nodes[0], 0.0)
        i = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
        d = x - nodes[i]
        return cum_at_nodes[i] + values[i] * d + 0.5 * slopes[i] * d * d

    convex = bool(np.all(np.diff(slopes) >= -1e-12)) and values[0] <= 1e-15
    if nodes.size == 2:
        convex = values[0] <= 1e-15
    return KernelSpec(family, density, float(-nodes[0]), convex, float(values[-1]), cumulative,
                      {"nodes": nodes.tolist(), "values": values.tolist()})


def from_csv(path) -> KernelSpec:
    """Custom kernel from a sampled ``xi, eta`` table (linear interpolation)."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                continue  # header
    order = np.argsort(xs)
    spec = piecewise_linear(np.asarray(xs)[order], np.asarray(ys)[order], KernelFamily.CUSTOM)
    spec.params["source"] = str(path)
    return spec


def custom(density, support_radius=math.inf, is_convex=False, left_limit_at_zero=None) -> KernelSpec:
    if left_limit_at_zero is None:
        left_limit_at_zero = float(np.asarray(density(np.array([-1e-12])))[0])
    return KernelSpec(KernelFamily.CUSTOM, density, support_radius, is_convex, left_limit_at_zero)


def kernel_from_config(cfg: dict) -> KernelSpec:
    family = cfg.get("family")
    if family == "Exponential":
        return exponential()
    if family == "Uniform":
        return uniform()
    if family == "PiecewiseLinear":
        spec = piecewise_linear(cfg["nodes"], cfg["values"])
    elif family == "Custom":
        spec = from_csv(cfg["table"])
    else:
        raise InvalidKernel(f"unknown kernel family {family!r}")
    if "is_convex" in cfg and bool(cfg["is_convex"]) != spec.is_convex:
        object.__setattr__(spec, "is_convex", bool(cfg["is_convex"]))
    return spec


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    worst_point: Optional[float] = None
    worst_violation: float = 0.0


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple

    def __getitem__(self, name) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def traffic_assumptions_hold(self) -> bool:
        return all(c.passed for c in self.conditions if c.name != "convex")

    @property
    def is_convex(self) -> bool:
        return self["convex"].passed

    def to_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "worst_point": c.worst_point,
                         "worst_violation": c.worst_violation} for c in self.conditions}


def _sample_radius(spec: KernelSpec) -> float:
    if spec.compact:
        return spec.support_radius
    if spec.cumulative is not None:
        r = 1.0
        while r < 1e6 and float(spec.cumulative(np.array([-r]))[0]) > 1e-17:
            r *= 2
        return r
    return 64.0


def _worst(name, violation, points, tol) -> ConditionResult:
    if violation.size == 0:
        return ConditionResult(name, True)
    i = int(np.argmax(violation))
    v = float(violation[i])
    return ConditionResult(name, v <= tol, float(points[i]), max(v, 0.0))


def validate_kernel(spec: KernelSpec, n_samples: int = 4000, tol: float = 1e-12) -> ValidationReport:
    """Check integrability, anisotropy, sign, monotonicity, unit mass and convexity.

    Samples are cell midpoints of a lattice over ``[-1.5 R, 1.5 R]`` so that
    no sample sits on a kernel endpoint (point values are immaterial for L1
    densities).
    """
    R = _sample_radius(spec)
    h = 1.5 * R / n_samples
    neg = -1.5 * R + h * (np.arange(n_samples) + 0.5)
    pos = h * (np.arange(n_samples) + 0.5)
    try:
        fneg = np.asarray(spec.density(neg), dtype=float)
        fpos = np.asarray(spec.density(pos), dtype=float)
    except Exception as exc:  # noqa: BLE001 - any failure means "not evaluable"
        raise InvalidKernel(f"density cannot be evaluated: {exc}") from exc
    if fneg.shape != neg.shape or fpos.shape != pos.shape:
        raise InvalidKernel("density must be vectorised over numpy arrays")
    if not (np.all(np.isfinite(fneg)) and np.all(np.isfinite(fpos))):
        raise InvalidKernel("density returned non-finite values")
    scale = max(1.0, float(np.max(np.abs(fneg))))

    if spec.cumulative is not None:
        mass = float(spec.cumulative(np.array([0.0]))[0] - spec.cumulative(np.array([-R]))[0])
    else:
        lo = -spec.support_radius if spec.compact else -np.inf
        mass, _ = integrate.quad(lambda s: float(spec.density(np.array([s]))[0]), lo, 0.0, limit=400)

    results = [
        ConditionResult("integrable_bounded", bool(math.isfinite(mass) and np.all(np.isfinite(fneg)))),
        _worst("support_in_negative_axis", np.abs(fpos), pos, tol),
        _worst("nonnegative", -fneg, neg, tol),
        _worst("nondecreasing", fneg[:-1] - fneg[1:], neg[1:], tol * scale),
        ConditionResult("unit_mass", abs(mass - 1.0) <= 1e-12, None, abs(mass - 1.0)),
    ]

    worst_v, worst_p = -np.inf, None
    k = 1
    while k < n_samples // 2:
        mid = fneg[k:-k]
        viol = mid - 0.5 * (fneg[:-2 * k] + fneg[2 * k:])
        i = int(np.argmax(viol))
        if viol[i] > worst_v:
            worst_v, worst_p = float(viol[i]), float(neg[k + i])
        k *= 2
    results.append(ConditionResult("convex", worst_v <= tol * scale, worst_p, max(worst_v, 0.0)))
    return ValidationReport(tuple(results))


# ------------------------------------------------------------ discretisation


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    epsilon: float
    cell_width: float
    weights: np.ndarray = field(repr=False)
    truncation_mass: float = 0.0
    family: str = ""
    left_limit_at_zero: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_weights(self) -> int:
        return self.weights.size

    @property
    def reach(self) -> float:
        """Length of the look-ahead window actually used."""
        return self.n_weights * self.cell_width


def _cell_masses(spec: KernelSpec, z: np.ndarray, n_sub: int = 64) -> np.ndarray:
    """Kernel mass over ``[-z[k+1], -z[k]]`` for consecutive scaled distances."""
    if spec.family is KernelFamily.EXPONENTIAL:
        dz = np.diff(z)
        return np.exp(-z[:-1]) * -np.expm1(-dz)
    if spec.cumulative is not None:
        H = spec.cumulative(-z)
        return H[:-1] - H[1:]
    dz = np.diff(z)
    frac = (np.arange(n_sub) + 0.5) / n_sub
    pts = -(z[:-1, None] + dz[:, None] * frac[None, :])
    return dz * np.mean(spec.density(pts), axis=1)


def discretize(spec: KernelSpec, epsilon: float, cell_width: float, tail_tol: float = DEFAULT_TAIL_TOL,
               min_cells_per_eps: float = MIN_CELLS_PER_EPS) -> DiscreteKernel:
    if not 0.0 < tail_tol < 1.0:
        raise ValueError("tail_tol must lie in (0, 1)")
    if not (epsilon > 0 and cell_width > 0):
        raise ValueError("epsilon and cell_width must be positive")
    if epsilon < min_cells_per_eps * cell_width * (1 - 1e-9):
        raise ResolutionError(
            f"epsilon={epsilon} spans {epsilon / cell_width:.3g} cells; need >= {min_cells_per_eps}")
    dz = cell_width / epsilon

    if spec.compact:
        m = math.ceil(spec.support_radius / dz - 1e-9)
        if m > MAX_KERNEL_CELLS:
            raise TruncationError(f"kernel needs {m} cells (cap {MAX_KERNEL_CELLS})")
        gam = _cell_masses(spec, dz * np.arange(m + 1))
        tail = 0.0
    elif spec.cumulative is not None or spec.family is KernelFamily.EXPONENTIAL:
        def tail_at(m):
            return float(spec.cumulative(np.array([-m * dz]))[0])

        m = 1
        while tail_at(m) > tail_tol:
            m *= 2
            if m > 2 * MAX_KERNEL_CELLS:
                raise TruncationError(f"tail above {tail_tol} beyond {MAX_KERNEL_CELLS} cells")
        lo, hi = m // 2, m
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tail_at(mid) > tail_tol:
                lo = mid
            else:
                hi = mid
        m = max(hi, 1)
        if m > MAX_KERNEL_CELLS:
            raise TruncationError(f"tail above {tail_tol} beyond {MAX_KERNEL_CELLS} cells")
        gam = _cell_masses(spec, dz * np.arange(m + 1))
        tail = tail_at(m)
    else:
        chunks, total, m = [], 0.0, 0
        step = max(64, math.ceil(1.0 / dz))
        while True:
            g = _cell_masses(spec, dz * np.arange(m, m + step + 1))
            chunks.append(g)
            total += float(g.sum())
            m += step
            if 1.0 - total <= tail_tol:
                break
            if m >= MAX_KERNEL_CELLS:
                raise TruncationError(f"tail above {tail_tol} beyond {MAX_KERNEL_CELLS} cells")
        gam = np.concatenate(chunks)
        nz = np.nonzero(gam)[0]
        gam = gam[: nz[-1] + 1] if nz.size else gam
        tail = max(0.0, 1.0 - total)

    if np.any(gam < 0):
        raise InvalidKernel("negative cell mass; density must be nonnegative")
    s = float(gam.sum())
    if s <= 0:
        raise InvalidKernel("kernel has no mass")
    return DiscreteKernel(epsilon, cell_width, gam / s, tail, spec.family.value, spec.left_limit_at_zero)


# ---------------------------------------------------------------- convolution


def lookahead_edges(u: Profile, dk: DiscreteKernel) -> np.ndarray:
    """``w`` at all ``n + 1`` cell edges (the last one sees only the right state)."""
    if not math.isclose(dk.cell_width, u.grid.cell_width, rel_tol=1e-12):
        raise GridError(f"kernel built for dx={dk.cell_width}, profile has dx={u.grid.cell_width}")
    return _backend.lookahead(u.values, dk.weights, u.grid.boundary_right)


def convolve(u: Profile, dk: DiscreteKernel) -> Profile:
    return Profile(u.grid, lookahead_edges(u, dk)[:-1])


def uniform_dx_w(u: Profile, epsilon: float) -> Profile:
    """``(u(x + eps) - u(x)) / eps`` cell by cell: the x-derivative of ``w`` for the uniform kernel."""
    ratio = epsilon / u.grid.cell_width
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        raise GridError(f"epsilon={epsilon} is not a multiple of dx={u.grid.cell_width}")
    n = u.grid.n_cells
    ahead = np.full(n, u.grid.boundary_right)
    if m < n:
        ahead[: n - m] = u.values[m:]
    return Profile(u.grid, (ahead - u.values) / epsilon)
