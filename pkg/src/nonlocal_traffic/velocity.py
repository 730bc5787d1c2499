"""Speed laws ``V``, the flux ``f(u) = u V(u)`` and Kruzkov entropy pairs."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError


class VelocityFamily(str, enum.Enum):
    GREENSHIELDS = "Greenshields"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class VelocityModel:
    V: Callable[[np.ndarray], np.ndarray]
    V_prime: Callable[[np.ndarray], np.ndarray]
    lip_const: float
    max_abs_V: float
    family: VelocityFamily = VelocityFamily.CUSTOM
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", VelocityFamily(self.family))

    @property
    def is_greenshields(self) -> bool:
        return self.family is VelocityFamily.GREENSHIELDS

    @property
    def nonnegative(self) -> bool:
        """Whether ``V >= 0`` on [0, 1], which the upwind solver relies on."""
        s = np.linspace(0.0, 1.0, 1025)
        return bool(np.all(self.V(s) >= -1e-14))

    def f(self, u):
        u = np.asarray(u, dtype=float)
        return u * self.V(u)

    def f_prime(self, u):
        u = np.asarray(u, dtype=float)
        return self.V(u) + u * self.V_prime(u)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "lip_const": self.lip_const, "max_abs_V": self.max_abs_V}
        d.update(self.params)
        return d


def greenshields() -> VelocityModel:
    return VelocityModel(
        V=lambda w: 1.0 - np.asarray(w, dtype=float),
        V_prime=lambda w: -np.ones_like(np.asarray(w, dtype=float)),
        lip_const=1.0,
        max_abs_V=1.0,
        family=VelocityFamily.GREENSHIELDS,
    )


def from_table(u_samples, v_samples) -> VelocityModel:
    """Speed law given by samples on [0, 1], linearly interpolated.

    The table must be non-increasing (drivers slow down as density grows).
    """
    us = np.asarray(u_samples, dtype=float)
    vs = np.asarray(v_samples, dtype=float)
    if us.ndim != 1 or us.size < 2 or us.size != vs.size:
        raise ValueError("need matching sample tables with at least two entries")
    if np.any(np.diff(us) <= 0):
        raise ValueError("u samples must be strictly increasing")
    if us[0] > 0 or us[-1] < 1:
        raise ValueError("u samples must cover [0, 1]")
    slopes = np.diff(vs) / np.diff(us)
    if np.any(slopes > 1e-14):
        raise ValueError("speed law must be non-increasing on [0, 1]")

    def V(w):
        return np.interp(np.asarray(w, dtype=float), us, vs)

    def V_prime(w):
        i = np.clip(np.searchsorted(us, np.asarray(w, dtype=float), side="right") - 1, 0, slopes.size - 1)
        return slopes[i]

    return VelocityModel(V, V_prime, float(np.max(np.abs(slopes))), float(np.max(np.abs(vs))),
                         VelocityFamily.CUSTOM, {"u": us.tolist(), "V": vs.tolist()})


def velocity_from_config(cfg: dict) -> VelocityModel:
    family = cfg.get("family", "Greenshields")
    if family == "Greenshields":
        return greenshields()
    if family == "Custom":
        return from_table(cfg["u"], cfg["V"])
    raise ValueError(f"unknown velocity family {family!r}")


def flux(vm: VelocityModel, u):
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"density outside [0, 1]: {u}")
    out = arr * vm.V(arr)
    return float(out) if out.ndim == 0 else out


def kruzkov_flux(vm: VelocityModel, a, b):
    """``q(a, b) = sign(a - b) (f(a) - f(b))``, symmetric in its arguments."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sign(a - b) * (vm.f(a) - vm.f(b))


@dataclass(frozen=True, eq=False)
class KruzkovPair:
    c: float
    vm: VelocityModel

    def alpha(self, u):
        return np.abs(np.asarray(u, dtype=float) - self.c)

    def beta(self, u):
        return kruzkov_flux(self.vm, u, self.c)

    def alpha_prime(self, u):
        return np.sign(np.asarray(u, dtype=float) - self.c)

    def beta_prime(self, u):
        return self.alpha_prime(u) * self.vm.f_prime(u)


def kruzkov(vm: VelocityModel, c: float) -> KruzkovPair:
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"c={c} outside [0, 1]")
    return KruzkovPair(float(c), vm)
