"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``NONLOCAL_TRAFFIC_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np
from scipy import signal

from . import _pykernels

if os.environ.get("NONLOCAL_TRAFFIC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

NAME = "cython" if _impl is not _pykernels else "python"

# above this many weights an FFT correlation beats the direct sum
FFT_MIN_WEIGHTS = 160


def use(name):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the previous name."""
    global _impl, NAME
    previous = NAME
    if name == "python":
        _impl = _pykernels
    elif name == "cython":
        from . import _ckernels
        _impl = _ckernels
    else:
        raise ValueError(name)
    NAME = name
    return previous


def compiled_available():
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


def _lookahead_fft(d, g):
    ext = np.concatenate((d, np.zeros(g.size)))
    return signal.fftconvolve(ext, g[::-1], mode="valid")


def lookahead(values, weights, right_state, method="auto"):
    u = np.ascontiguousarray(values, dtype=float)
    g = np.ascontiguousarray(weights, dtype=float)
    # average the deviation from the right state: with weights summing to one
    # this is exact wherever u equals the right state (no rounding drift in a jam)
    d = u - right_state
    if method == "fft" or (method == "auto" and g.size > FFT_MIN_WEIGHTS):
        w = _lookahead_fft(d, g) + right_state
    else:
        w = _impl.lookahead_direct(d, g, 0.0) + right_state
    # w is a convex combination of u and the right state; clip away rounding
    # (and within [0, 1], so rounding in u never produces a negative speed)
    lo = max(min(float(u.min()), right_state), 0.0)
    hi = min(max(float(u.max()), right_state), 1.0)
    return np.clip(w, lo, hi)


def upwind_update(values, speeds, left_state, lam):
    return _impl.upwind_update(np.ascontiguousarray(values, dtype=float),
                               np.ascontiguousarray(speeds, dtype=float), float(left_state), float(lam))
