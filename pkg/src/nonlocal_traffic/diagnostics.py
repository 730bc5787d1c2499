"""Verdicts over trajectories: TV series, entropy residuals and rate fits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import FitError, SupportError
from .grid import Profile, total_variation, tv_decomposition
from .trajectory import Trajectory
from .velocity import VelocityModel, greenshields

# integral of (1 - s^2)^3 over [-1, 1] and the maximum of its derivative
BUMP_MASS = 32.0 / 35.0
BUMP_SLOPE_MAX = 6.0 / math.sqrt(5.0) * (4.0 / 5.0) ** 2
DEFAULT_C_VALUES = tuple((k + 0.5) / 8 for k in range(8))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(list(header))
        for row in rows:
            wr.writerow([repr(float(v)) for v in row])


# ------------------------------------------------------------------ total variation


@dataclass(frozen=True, eq=False)
class TVSeries:
    times: np.ndarray
    tv_w: np.ndarray
    tv_u: np.ndarray
    negative_part: np.ndarray

    def __post_init__(self):
        for name in ("times", "tv_w", "tv_u", "negative_part"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.times) < 0):
            raise ValueError("times must be sorted")

    def __len__(self):
        return self.times.size

    def to_csv(self, path) -> None:
        write_csv(path, ["t", "tv_w", "tv_u", "neg_part"],
                  zip(self.times, self.tv_w, self.tv_u, self.negative_part))

    def to_dict(self) -> dict:
        return {"t": self.times.tolist(), "tv_w": self.tv_w.tolist(), "tv_u": self.tv_u.tolist(),
                "neg_part": self.negative_part.tolist()}


def tv_series(traj: Trajectory) -> TVSeries:
    tv_w, tv_u, neg = [], [], []
    for i in range(len(traj)):
        w = traj.w_profile(i)
        tv_w.append(total_variation(w))
        neg.append(tv_decomposition(w)[1])
        tv_u.append(total_variation(traj.u_profile(i)))
    return TVSeries(traj.times, np.array(tv_w), np.array(tv_u), np.array(neg))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    worst_violation: float
    worst_time: float
    tol: float

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {"verdict": self.label, "worst_violation": self.worst_violation, "worst_time": self.worst_time,
                "tol": self.tol}


def monotonicity_verdict(s: TVSeries, tol: float) -> Verdict:
    """PASS when ``tv_w(t)`` never rises more than ``tol`` above its running minimum."""
    if len(s) == 0:
        return Verdict(True, 0.0, float("nan"), tol)
    excess = s.tv_w - np.minimum.accumulate(s.tv_w)
    i = int(np.argmax(excess))
    worst = float(excess[i])
    return Verdict(worst <= tol, worst, float(s.times[i]), tol)


def initial_growth_rate(s: TVSeries, t_fit: Optional[float] = None) -> float:
    """Least-squares slope of ``tv_w`` against ``t`` on ``[0, t_fit]``."""
    t_fit = float(s.times[-1]) if t_fit is None else t_fit
    mask = s.times <= t_fit * (1 + 1e-12)
    if mask.sum() < 2:
        raise FitError("need at least two snapshots to fit a growth rate")
    slope, _ = np.polyfit(s.times[mask], s.tv_w[mask], 1)
    return float(slope)


def predicted_growth_rate(h: float, eps: float = 1.0) -> float:
    """Lower bound for the initial growth rate of ``TV(w)`` from one building block at ``eps = 4 ell``.

    The rate is ``2 ((2 - h)/4) h / eps``.  Rescaling ``x`` and ``t`` by ``eps``
    maps the problem onto ``eps = 1``, so the rate picks up the factor ``1/eps``.
    """
    return 2.0 * (2.0 - h) / 4.0 * h / eps


def increase_interval(s: TVSeries) -> dict:
    """Measured interval ``]0, t*[`` on which ``tv_w(t) > tv_w(0)``.

    ``t_star`` is the first snapshot after ``t = 0`` where the excess is no longer
    positive.  If that never happens ``t_star`` is the last snapshot time and
    ``censored`` is set.
    """
    excess = s.tv_w - s.tv_w[0]
    later = np.nonzero(excess[1:] <= 0)[0]
    if excess.size < 2 or excess[1] <= 0:
        return {"t_star": 0.0, "censored": False, "max_excess": float(excess.max(initial=0.0))}
    if later.size:
        return {"t_star": float(s.times[later[0] + 1]), "censored": False, "max_excess": float(excess.max())}
    return {"t_star": float(s.times[-1]), "censored": True, "max_excess": float(excess.max())}


def window_variation(traj: Trajectory, i: int, a: float, b: float) -> float:
    """``int_a^b |d w / dx|`` at snapshot ``i`` for the piecewise-linear ``w``."""
    nodes, vals = traj.field_nodes()
    v = vals[i]
    if b <= a:
        return 0.0
    inside = (nodes > a) & (nodes < b)
    xs = np.concatenate(([a], nodes[inside], [b]))
    ws = np.interp(xs, nodes, v)
    return float(np.sum(np.abs(np.diff(ws))))


def w_cell_averages(traj: Trajectory, i: int) -> Profile:
    """Cell averages of the piecewise-linear ``w`` of snapshot ``i``."""
    _, vals = traj.field_nodes()
    v = vals[i]
    if traj.kind == "nonlocal":
        return Profile(traj.grid, 0.5 * (v[:-1] + v[1:]))
    return Profile(traj.grid, v[1:-1])


# ------------------------------------------------------------------ entropy residuals


def _bump(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1, -6 * s * (1 - s * s) ** 2, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """``phi(t, x) = b((t - t_center)/t_radius) b((x - x_center)/x_radius)`` with ``b(s) = (1 - s^2)^3``."""

    __test__ = False  # not a pytest class

    t_center: float
    t_radius: float
    x_center: float
    x_radius: float

    def __post_init__(self):
        if self.t_radius <= 0 or self.x_radius <= 0:
            raise ValueError("radii must be positive")

    def psi(self, t):
        return _bump((np.asarray(t) - self.t_center) / self.t_radius)

    def psi_prime(self, t):
        return _bump_prime((np.asarray(t) - self.t_center) / self.t_radius) / self.t_radius

    def chi(self, x):
        return _bump((np.asarray(x) - self.x_center) / self.x_radius)

    def chi_prime(self, x):
        return _bump_prime((np.asarray(x) - self.x_center) / self.x_radius) / self.x_radius

    def __call__(self, t, x):
        return self.psi(t) * self.chi(x)

    @property
    def support(self) -> tuple:
        return (self.t_center - self.t_radius, self.t_center + self.t_radius,
                self.x_center - self.x_radius, self.x_center + self.x_radius)

    @property
    def dx_norm(self) -> float:
        """``||d phi / dx||`` in ``L1`` over time of the ``Linf`` norm in space."""
        return self.t_radius * BUMP_MASS * BUMP_SLOPE_MAX / self.x_radius

    def to_dict(self) -> dict:
        return {"t_center": self.t_center, "t_radius": self.t_radius, "x_center": self.x_center,
                "x_radius": self.x_radius}


def bump_family(x_min: float, x_max: float, t_end: float, n_centers: int = 5,
                width_fractions: Sequence[float] = (1 / 8, 1 / 4, 1 / 2)) -> list:
    """Bumps centred evenly on ``[x_min, x_max]`` with radii proportional to its length.

    Every bump spans the whole time window ``[0, t_end]``.
    """
    L = x_max - x_min
    centers = np.linspace(x_min, x_max, n_centers)
    return [TestFunction(t_end / 2, t_end / 2, float(xc), float(f * L))
            for f in width_fractions for xc in centers]


def _check_support(traj: Trajectory, phi: TestFunction) -> None:
    t0, t1, x0, x1 = phi.support
    g = traj.grid
    tol = 1e-12
    if t0 < traj.times[0] - tol or t1 > traj.times[-1] + tol or x0 < g.x_left - tol or x1 > g.x_right + tol:
        raise SupportError(f"test function support {phi.support} leaves the run box "
                           f"[{traj.times[0]}, {traj.times[-1]}] x [{g.x_left}, {g.x_right}]")


def _residual_matrix(traj: Trajectory, c_values, phis, vm: VelocityModel) -> np.ndarray:
    """Residuals ``D_c(phi)`` for every pair, as a ``(len(c_values), len(phis))`` array.

    Space uses the node lattice of ``w`` (trapezoid rule, the test functions
    vanish at both ends), time the composite trapezoid rule over snapshots.
    """
    for phi in phis:
        _check_support(traj, phi)
    nodes, W = traj.field_nodes()
    t = np.asarray(traj.times, dtype=float)
    hx = np.diff(nodes)
    qx = np.zeros(nodes.size)
    qx[:-1] += 0.5 * hx
    qx[1:] += 0.5 * hx
    if t.size > 1:
        ht = np.diff(t)
        qt = np.zeros(t.size)
        qt[:-1] += 0.5 * ht
        qt[1:] += 0.5 * ht
    else:
        qt = np.zeros(1)
    chi = np.column_stack([phi.chi(nodes) for phi in phis]) * qx[:, None]
    chip = np.column_stack([phi.chi_prime(nodes) for phi in phis]) * qx[:, None]
    psi = np.column_stack([phi.psi(t) for phi in phis]) * qt[:, None]
    psip = np.column_stack([phi.psi_prime(t) for phi in phis]) * qt[:, None]
    fW = vm.f(W)
    out = np.empty((len(c_values), len(phis)))
    for k, c in enumerate(c_values):
        sgn = np.sign(W - c)
        alpha = np.abs(W - c)
        beta = sgn * (fW - float(vm.f(c)))
        out[k] = np.sum((alpha @ chi) * psip + (beta @ chip) * psi, axis=0)
    return out


def entropy_residual(traj: Trajectory, c: float, phi: TestFunction, vm: Optional[VelocityModel] = None) -> float:
    """``D_c(phi) = iint |w - c| phi_t + sign(w - c)(f(w) - f(c)) phi_x``."""
    vm = greenshields() if vm is None else vm
    return float(_residual_matrix(traj, [c], [phi], vm)[0, 0])


@dataclass(eq=False)
class EntropyReport:
    c_values: list
    test_functions: list
    residuals: np.ndarray
    normalized: np.ndarray
    epsilon: float
    sup_tv_w: float
    K_hat: float
    worst: dict
    dissipation_bound: np.ndarray = field(default_factory=lambda: np.zeros(0))
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def satisfies(self, K: float, slack: float = 0.0) -> bool:
        """Whether every residual obeys ``D >= -K eps TV ||phi_x||``."""
        norms = np.array([phi.dx_norm for phi in self.test_functions])
        bound = -K * self.epsilon * self.sup_tv_w * norms[None, :] - slack
        return bool(np.all(self.residuals >= bound))

    def to_dict(self) -> dict:
        return {
            "c_values": list(self.c_values),
            "test_functions": [phi.to_dict() for phi in self.test_functions],
            "residuals": self.residuals.tolist(),
            "epsilon": self.epsilon,
            "sup_tv_w": self.sup_tv_w,
            "K_hat": self.K_hat,
            "worst": self.worst,
            "dissipation_bound": {"t": self.times.tolist(), "value": self.dissipation_bound.tolist()},
        }


def dissipation_bound_fit(traj: Trajectory, c_grid=DEFAULT_C_VALUES, phi_family=None,
                          vm: Optional[VelocityModel] = None) -> EntropyReport:
    """Implied constant ``K_hat = max(0, -min D / ||phi_x||) / (eps sup_t TV(w))``.

    ``dissipation_bound`` echoes ``K_hat eps TV(w(t))`` per snapshot, the
    aggregate bound that the residuals imply for the dissipation integral.
    """
    vm = greenshields() if vm is None else vm
    if phi_family is None:
        g = traj.grid
        phi_family = bump_family(g.x_left + 0.1 * (g.x_right - g.x_left),
                                 g.x_right - 0.1 * (g.x_right - g.x_left), traj.t_end)
    phis = list(phi_family)
    cs = [float(c) for c in c_grid]
    D = _residual_matrix(traj, cs, phis, vm)
    norms = np.array([phi.dx_norm for phi in phis])
    normalized = D / norms[None, :]
    tvs = np.array([total_variation(traj.w_profile(i)) for i in range(len(traj))])
    sup_tv = float(tvs.max())
    eps = float(traj.epsilon) if traj.epsilon else 1.0
    k, j = np.unravel_index(int(np.argmin(normalized)), normalized.shape)
    worst_val = float(normalized[k, j])
    denom = eps * sup_tv
    K_hat = max(0.0, -worst_val) / denom if denom > 0 else 0.0
    worst = {"c": cs[k], "test_function": phis[j].to_dict(), "normalized_residual": worst_val}
    return EntropyReport(cs, phis, D, normalized, eps, sup_tv, K_hat, worst, K_hat * eps * tvs,
                         np.asarray(traj.times, dtype=float))


# ------------------------------------------------------------------ rate fits


@dataclass(frozen=True, eq=False)
class RateReport:
    epsilons: np.ndarray
    l1_errors: np.ndarray
    slope: float
    intercept: float
    residual: float

    def predict(self, eps):
        return np.exp(self.intercept) * np.asarray(eps, dtype=float) ** self.slope

    def to_csv(self, path) -> None:
        write_csv(path, ["epsilon", "l1_error"], zip(self.epsilons, self.l1_errors))

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilons.tolist(), "l1_error": self.l1_errors.tolist(), "slope": self.slope,
                "intercept": self.intercept, "residual": self.residual}


def rate_fit(errors) -> RateReport:
    """Least-squares fit of ``log error = slope log eps + intercept``.

    ``errors`` is a sequence of ``(eps, error)`` pairs covering at least four
    values of ``eps`` spread over two or more octaves.
    """
    pairs = sorted(((float(e), float(r)) for e, r in errors), key=lambda p: -p[0])
    if len(pairs) < 4:
        raise FitError(f"need at least 4 epsilons, got {len(pairs)}")
    eps = np.array([p[0] for p in pairs])
    err = np.array([p[1] for p in pairs])
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise FitError("epsilons must be positive and distinct")
    if np.any(~np.isfinite(err)) or np.any(err <= 0):
        raise FitError("errors must be positive and finite")
    if eps[0] / eps[-1] < 4.0 * (1 - 1e-12):
        raise FitError("epsilons must span at least two octaves")
    x, y = np.log(eps), np.log(err)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - y) ** 2)))
    return RateReport(eps, err, float(slope), float(intercept), resid)


def rate_constant(epsilons, l1_errors, tv0: float, t: float = 1.0) -> float:
    """Smallest ``C`` with ``error <= C (eps + sqrt(eps t)) TV(u0)`` for every sample."""
    eps = np.asarray(epsilons, dtype=float)
    err = np.asarray(l1_errors, dtype=float)
    if tv0 <= 0:
        raise FitError("TV(u0) must be positive")
    return float(np.max(err / ((eps + np.sqrt(eps * t)) * tv0)))
