"""Uniform sample grids for distributions and kernels.

A SampledDistribution stores complex values on a uniform axis-aligned grid of
dimension d <= 4; trailing array axes beyond the grid axes are fibre channels
(up to r x r of them for two-point objects).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse

# 4th-order first-derivative stencils
_CENTRAL_OFF = np.array([-2, -1, 1, 2])
_CENTRAL_W = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_FORWARD_OFF = np.array([0, 1, 2, 3, 4])
_FORWARD_W = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


@dataclass
class SampledDistribution:
    """Gridded complex values: origin/spacing per axis, dim = len(origin)."""

    origin: np.ndarray      # (d,)
    spacing: np.ndarray     # (d,)
    values: np.ndarray      # (n_1, ..., n_d, *channels)

    def __post_init__(self):
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.spacing = np.atleast_1d(np.asarray(self.spacing, dtype=float))
        self.values = np.asarray(self.values)
        d = self.origin.size
        if d > 4:
            raise ValueError("grid dimension capped at 4")
        if self.spacing.size != d or np.any(self.spacing <= 0):
            raise ValueError("spacing must be positive, one entry per axis")
        if self.values.ndim < d:
            raise ValueError("values must carry one array axis per grid axis")
        if not np.all(np.isfinite(np.asarray(self.values, dtype=complex))):
            raise ValueError("grid values must be finite")

    @property
    def dim(self) -> int:
        return self.origin.size

    @property
    def grid_shape(self):
        return self.values.shape[:self.dim]

    def axis_points(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + self.spacing[axis] * np.arange(n)

    def meshgrid(self) -> np.ndarray:
        """Grid points stacked as an (n_1, ..., n_d, d) array."""
        axes = [self.axis_points(a) for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @classmethod
    def from_callable(cls, f, origin, spacing, shape, dtype=complex):
        """Sample a callable f(points (..., d)) -> (..., *channels)."""
        origin = np.atleast_1d(np.asarray(origin, dtype=float))
        spacing = np.atleast_1d(np.asarray(spacing, dtype=float))
        axes = [origin[a] + spacing[a] * np.arange(shape[a])
                for a in range(origin.size)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack(mesh, axis=-1)
        return cls(origin=origin, spacing=spacing,
                   values=np.asarray(f(pts), dtype=dtype))

    def partial(self, axis: int) -> np.ndarray:
        """4th-order first derivative of the values along a grid axis
        (central in the interior, one-sided at the edges)."""
        n = self.values.shape[axis]
        if n < 7:
            raise GridTooCoarse("need at least 7 samples per axis for the "
                                "4th-order derivative stencil")
        v = np.moveaxis(np.asarray(self.values, dtype=complex), axis, 0)
        out = np.zeros_like(v)
        for off, wgt in zip(_CENTRAL_OFF, _CENTRAL_W):
            out[2:n - 2] += wgt * v[2 + off:n - 2 + off]
        for edge in range(2):
            acc_lo = sum(w * v[edge + o] for o, w in zip(_FORWARD_OFF, _FORWARD_W))
            acc_hi = sum(w * v[n - 1 - edge - o]
                         for o, w in zip(_FORWARD_OFF, _FORWARD_W))
            out[edge] = acc_lo
            out[n - 1 - edge] = -acc_hi
        out /= self.spacing[axis]
        return np.moveaxis(out, 0, axis)
