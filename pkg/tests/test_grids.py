import numpy as np
import pytest

from hadwave.errors import GridTooCoarse
from hadwave.grids import SampledDistribution


def test_axis_points_and_meshgrid_shapes():
    u = SampledDistribution.from_callable(
        lambda z: z[..., 0] + 2.0 * z[..., 1],
        origin=(0.0, -1.0), spacing=(0.1, 0.2), shape=(8, 9))
    assert u.dim == 2
    assert u.values.shape == (8, 9)
    ax0 = u.axis_points(0)
    assert ax0[0] == 0.0 and np.isclose(ax0[-1], 0.7)
    mesh = u.meshgrid()
    assert mesh.shape == (8, 9, 2)
    assert np.allclose(u.values, mesh[..., 0] + 2.0 * mesh[..., 1])


def test_partial_matches_analytic_derivative_everywhere():
    # includes the one-sided edge stencils
    u = SampledDistribution.from_callable(
        lambda z: np.sin(z[..., 0]) * np.cos(2.0 * z[..., 1]),
        origin=(0.3, -0.4), spacing=(0.02, 0.02), shape=(20, 18))
    mesh = u.meshgrid()
    d0 = u.partial(0)
    d1 = u.partial(1)
    ref0 = np.cos(mesh[..., 0]) * np.cos(2.0 * mesh[..., 1])
    ref1 = -2.0 * np.sin(mesh[..., 0]) * np.sin(2.0 * mesh[..., 1])
    assert np.max(np.abs(d0 - ref0)) < 1e-6
    assert np.max(np.abs(d1 - ref1)) < 1e-6


def test_partial_keeps_channel_axes():
    def f(z):
        return np.stack([z[..., 0] ** 2, np.exp(z[..., 1])], axis=-1)

    u = SampledDistribution.from_callable(
        f, origin=(0.0, 0.0), spacing=(0.05, 0.05), shape=(12, 12))
    d0 = u.partial(0)
    assert d0.shape == (12, 12, 2)
    mesh = u.meshgrid()
    assert np.max(np.abs(d0[..., 0] - 2.0 * mesh[..., 0])) < 1e-8
    assert np.max(np.abs(d0[..., 1])) < 1e-8


def test_complex_values_supported():
    u = SampledDistribution.from_callable(
        lambda z: np.exp(1j * 3.0 * z[..., 0]),
        origin=(0.0,), spacing=(0.01,), shape=(40,))
    d0 = u.partial(0)
    ref = 3j * np.exp(1j * 3.0 * u.meshgrid()[..., 0])
    assert np.max(np.abs(d0 - ref)) < 2e-6


def test_too_few_samples_for_stencil():
    u = SampledDistribution(origin=(0.0,), spacing=(0.1,),
                            values=np.zeros(5))
    with pytest.raises(GridTooCoarse):
        u.partial(0)


def test_nonfinite_values_rejected():
    vals = np.zeros((8, 8))
    vals[3, 3] = np.nan
    with pytest.raises(ValueError):
        SampledDistribution(origin=(0.0, 0.0), spacing=(0.1, 0.1),
                            values=vals)
