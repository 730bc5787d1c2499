"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


def lookahead_direct(values, weights, right_state):
    """``W[i] = sum_k weights[k] * u[i + k]`` for ``i = 0..n`` (u padded with the right state)."""
    u = np.asarray(values, dtype=float)
    g = np.asarray(weights, dtype=float)
    ext = np.concatenate((u, np.full(g.size, float(right_state))))
    return np.correlate(ext, g, mode="valid")


def upwind_update(values, speeds, left_state, lam):
    """One explicit upwind step for nonnegative speeds given at the ``n + 1`` edges."""
    u = np.asarray(values, dtype=float)
    upstream = np.concatenate(([float(left_state)], u))
    flux = speeds * upstream
    return u - lam * (flux[1:] - flux[:-1])
