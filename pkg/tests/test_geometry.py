import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvsweep.geometry import (
    GeometryConfig,
    QuadratureError,
    ensemble_ax,
    ensemble_ax_numeric,
    pair_coupling,
    transverse_geometric_factor,
)

MAGIC = np.arccos(1 / np.sqrt(3))


def test_transverse_factor():
    assert transverse_geometric_factor(0.0) == 0
    assert np.isclose(transverse_geometric_factor(np.pi / 4), 1.5)
    assert transverse_geometric_factor(np.pi / 2) < 1e-15


def test_pair_coupling_on_axis_and_magic_angle():
    g = GeometryConfig()
    ax, ay, az = pair_coupling(1.0, 0.0, 0.3, g)
    assert np.allclose([ax, ay, az], [0, 0, 2 * g.prefactor])
    assert abs(pair_coupling(1.0, MAGIC, 0.0, g)[2]) < 1e-15
    with pytest.raises(ValueError):
        pair_coupling(0.0, 0.1, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_pair_coupling_transverse_magnitude(alpha, phi):
    g = GeometryConfig()
    ax, ay, _ = pair_coupling(1.0, alpha, phi, g)
    assert np.isclose(np.hypot(ax, ay) / g.prefactor, abs(3 * np.sin(alpha) * np.cos(alpha)))


@pytest.mark.parametrize("d, expected", [(2, 0.04746), (3, 0.02578), (5, 0.01198)])
def test_closed_form_published_values(d, expected):
    assert ensemble_ax(GeometryConfig(d_NV=d)) == pytest.approx(expected, rel=0.01)


def test_closed_form_scaling():
    assert np.isclose(ensemble_ax(GeometryConfig(d_NV=1.5)) / ensemble_ax(GeometryConfig(d_NV=3.0)), 2**1.5)
    ratio = ensemble_ax(GeometryConfig(rho_n=88)) / ensemble_ax(GeometryConfig(rho_n=44))
    assert np.isclose(ratio, np.sqrt(2))


def test_axis_tilt_ratio():
    # bracket evaluated by hand at beta = 54.7 deg and at beta = 0
    expected = np.sqrt((55 + 12 - 3) / (55 + 12 * np.cos(np.radians(109.4)) - 3 * np.cos(np.radians(218.8))))
    ratio = ensemble_ax(GeometryConfig(beta=0.0)) / ensemble_ax(GeometryConfig())
    assert ratio == pytest.approx(expected, rel=1e-12)
    assert ratio == pytest.approx(1.0952526380663343, rel=1e-12)


@pytest.mark.parametrize("d", [2.0, 3.0, 5.0])
def test_numeric_oracle_agrees(d):
    g = GeometryConfig(d_NV=d)
    assert ensemble_ax_numeric(g) == pytest.approx(ensemble_ax(g), rel=1e-4)


def test_numeric_oracle_tilt():
    g = GeometryConfig(beta=0.0)
    assert ensemble_ax_numeric(g) == pytest.approx(ensemble_ax(g), rel=1e-4)


def test_numeric_oracle_flags_coarse_grid():
    with pytest.raises(QuadratureError):
        ensemble_ax_numeric(GeometryConfig(), n_r=2, n_t=2, n_p=3, rtol=1e-12)


def test_bad_geometry():
    with pytest.raises(ValueError):
        GeometryConfig(d_NV=0)
    with pytest.raises(ValueError):
        GeometryConfig(rho_n=-1)
