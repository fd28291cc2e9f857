"""Central finite differences with coordinate-relative step sizes.

Steps follow h_i = 1e-4 * (1 + |x_i|), so checks stay well scaled for
points far from the origin.
"""

from __future__ import annotations

import numpy as np

__all__ = ["fd_gradient", "fd_jacobian", "relative_step"]

_BASE_STEP = 1e-4


def relative_step(x: np.ndarray) -> np.ndarray:
    return _BASE_STEP * (1.0 + np.abs(x))


def fd_gradient(f, x) -> np.ndarray:
    """Central-difference gradient of a scalar function at a single point."""
    x = np.asarray(x, dtype=float)
    h = relative_step(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        grad[i] = (f(xp) - f(xm)) / (2.0 * h[i])
    return grad


def fd_jacobian(f, x) -> np.ndarray:
    """Central-difference Jacobian of a vector function at a single point.

    Returns J[i, j] = d f_i / d x_j. For f = score this approximates
    hess log p, so the curvature convention is -fd_jacobian(score, x).
    """
    x = np.asarray(x, dtype=float)
    h = relative_step(x)
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)
