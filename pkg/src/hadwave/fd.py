"""Finite-difference stencils for analytic callables.

All derivative helpers use 4th-order central stencils; `h` may be a scalar or
a per-axis array. Callables must accept a point of shape (m,) and may return
scalars or arrays (derivatives are taken componentwise).
"""

from __future__ import annotations

import numpy as np

# 4th-order central first derivative: offsets and weights (divide by h).
_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

# 4th-order central second derivative: offsets and weights (divide by h^2).
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _as_h_vector(h, m):
    h_arr = np.broadcast_to(np.asarray(h, dtype=float), (m,)).copy()
    if np.any(h_arr <= 0):
        raise ValueError("finite-difference spacing must be positive")
    return h_arr


def stencil_radius(order: int = 4) -> int:
    """Number of spacings the widest stencil extends from the base point."""
    if order != 4:
        raise ValueError("only 4th-order stencils are implemented")
    return 2


def fd_weights(offsets, order: int) -> np.ndarray:
    """Stencil weights on the given integer offsets for the derivative of
    the given order (Vandermonde solve; divide the result by h**order)."""
    off = np.asarray(offsets, dtype=float)
    n = off.size
    if order >= n:
        raise ValueError("need more stencil points than the derivative order")
    V = np.vander(off, n, increasing=True).T  # V[p, j] = off_j**p
    rhs = np.zeros(n)
    rhs[order] = float(_factorial(order))
    return np.linalg.solve(V, rhs)


def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def partial(f, x, axis, h):
    """4th-order d f / d x^axis at x."""
    x = np.asarray(x, dtype=float)
    h_arr = _as_h_vector(h, x.size)[axis]
    acc = None
    for off, wgt in zip(_D1_OFFSETS, _D1_WEIGHTS):
        xp = x.copy()
        xp[axis] += off * h_arr
        val = wgt * np.asarray(f(xp))
        acc = val if acc is None else acc + val
    return acc / h_arr


def gradient(f, x, h):
    """All first partials; result shape (m,) + shape(f(x))."""
    x = np.asarray(x, dtype=float)
    return np.stack([partial(f, x, axis, h) for axis in range(x.size)])


def second_partial(f, x, i, j, h):
    """4th-order d^2 f / d x^i d x^j at x."""
    x = np.asarray(x, dtype=float)
    h_arr = _as_h_vector(h, x.size)
    if i == j:
        acc = None
        for off, wgt in zip(_D2_OFFSETS, _D2_WEIGHTS):
            xp = x.copy()
            xp[i] += off * h_arr[i]
            val = wgt * np.asarray(f(xp))
            acc = val if acc is None else acc + val
        return acc / h_arr[i] ** 2
    acc = None
    for oi, wi in zip(_D1_OFFSETS, _D1_WEIGHTS):
        for oj, wj in zip(_D1_OFFSETS, _D1_WEIGHTS):
            xp = x.copy()
            xp[i] += oi * h_arr[i]
            xp[j] += oj * h_arr[j]
            val = (wi * wj) * np.asarray(f(xp))
            acc = val if acc is None else acc + val
    return acc / (h_arr[i] * h_arr[j])


def hessian(f, x, h):
    """All second partials; result shape (m, m) + shape(f(x))."""
    x = np.asarray(x, dtype=float)
    m = x.size
    first = second_partial(f, x, 0, 0, h)
    out = np.empty((m, m) + np.shape(first), dtype=np.asarray(first).dtype)
    out[0, 0] = first
    for i in range(m):
        for j in range(i, m):
            if i == 0 and j == 0:
                continue
            val = second_partial(f, x, i, j, h)
            out[i, j] = val
            out[j, i] = val
    return out


def jet2(f, x, h):
    """(value, gradient, hessian) of f at x."""
    x = np.asarray(x, dtype=float)
    return np.asarray(f(x)), gradient(f, x, h), hessian(f, x, h)
