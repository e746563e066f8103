import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlayer.catalog import catalog_surface, sphere
from qlayer.errors import BlockStructure, Degenerate, OutOfLayer
from qlayer.surface_geometry import ImmersionChart, area_element, curvatures, eval_metric
from qlayer.tube import (
    LayerGeometry,
    analytic_pullback,
    immersion_point,
    layer_metric,
    pullback_metric,
    transverse_profile,
    validity_check,
    volume_element,
)


def test_plane_immersion_point(plane):
    layer = LayerGeometry(plane, 0.5)
    np.testing.assert_allclose(immersion_point(layer, [1.0, 2.0], 0.3), [1.0, 2.0, 0.3], atol=1e-15)


def test_sphere_outward_point():
    layer = LayerGeometry(sphere(2.0, orientation="outward"), 0.8)
    np.testing.assert_allclose(immersion_point(layer, [math.pi / 2, 0.0], 0.5), [2.5, 0.0, 0.0], atol=1e-12)


def test_zero_section(bump, rng):
    layer = LayerGeometry(bump, 0.5)
    x = rng.normal(size=(10, 2))
    np.testing.assert_allclose(immersion_point(layer, x, np.zeros(10)), bump.evaluate(x), atol=0)


def test_out_of_layer(plane):
    layer = LayerGeometry(plane, 0.5)
    with pytest.raises(OutOfLayer):
        immersion_point(layer, [0.0, 0.0], 0.5)
    with pytest.raises(OutOfLayer):
        pullback_metric(layer, [0.0, 0.0], -0.7)


def test_plane_pullback_identity(plane, rng):
    layer = LayerGeometry(plane, 1.0)
    G = pullback_metric(layer, rng.normal(size=(5, 2)), rng.uniform(-0.9, 0.9, 5)).g
    np.testing.assert_allclose(G, np.broadcast_to(np.eye(3), G.shape), atol=1e-15)


def test_sphere_pullback_scaling():
    s = sphere(2.0)
    layer = LayerGeometry(s, 0.8)
    x = [math.pi / 2, 0.3]
    G = pullback_metric(layer, x, 0.5).g
    np.testing.assert_allclose(G[:2, :2], 0.75 ** 2 * eval_metric(s, x).g, atol=1e-8)
    assert G[2, 2] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(G[:2, 2], 0.0, atol=1e-12)
    np.testing.assert_allclose(G, analytic_pullback(layer, x, 0.5), atol=1e-8)


def test_bump_origin_principal_form(bump):
    layer = LayerGeometry(bump, 0.5)
    for u in (-0.4, 0.1, 0.3):
        G = pullback_metric(layer, [0.0, 0.0], u).g
        k = -1.0
        np.testing.assert_allclose(G, np.diag([(1 - u * k) ** 2, (1 - u * k) ** 2, 1.0]), atol=1e-12)


@pytest.mark.parametrize("name", ["gaussian_bump", "smoothed_cone", "saddle_bump", "bent_strip"])
def test_block_structure_and_determinant(name, rng):
    chart = catalog_surface(name)
    layer = LayerGeometry(chart, 0.3)
    n = chart.dim_base
    x = chart.origin + rng.uniform(-3, 3, size=(40, n))
    u = rng.uniform(-0.29, 0.29, 40)
    G = pullback_metric(layer, x, u).g
    np.testing.assert_allclose(G[..., :n, n], 0.0, atol=1e-10)
    np.testing.assert_allclose(G[..., n, n], 1.0, atol=1e-12)
    np.testing.assert_allclose(G, analytic_pullback(layer, x, u), atol=1e-10)
    # det G = det g * det(I - uA)^2
    A = curvatures(chart, x).shape_operator
    factor = np.linalg.det(np.eye(n) - u[:, None, None] * A)
    np.testing.assert_allclose(np.linalg.det(G), np.linalg.det(eval_metric(chart, x).g) * factor ** 2, rtol=1e-9)


def test_base_block_at_zero(bump, rng):
    layer = LayerGeometry(bump, 0.5)
    x = rng.normal(size=(8, 2))
    G = pullback_metric(layer, x, np.zeros(8)).g
    np.testing.assert_allclose(G[..., :2, :2], eval_metric(bump, x).g, atol=1e-10)


def test_layer_metric_grid_shape(bump):
    layer = LayerGeometry(bump, 0.5)
    G = layer_metric(layer, np.zeros((4, 2)), np.linspace(-0.4, 0.4, 3))
    assert G.shape == (4, 3, 3, 3)


def test_volume_element_sphere():
    s = sphere(2.0)
    layer = LayerGeometry(s, 0.8)
    x = np.array([1.2, 0.4])
    assert volume_element(layer, x, 0.5) == pytest.approx(0.75 ** 2 * area_element(s, x), rel=1e-10)


def test_volume_element_circle_strip():
    # counter-clockwise, so the left normal points to the centre and A = 1/rho
    circle = ImmersionChart("circle", 1, lambda t: 2.0 * np.concatenate([np.cos(t / 2), np.sin(t / 2)], -1))
    layer = LayerGeometry(circle, 0.5)
    for u in (-0.3, 0.0, 0.4):
        assert volume_element(layer, [[0.7]], u)[0] == pytest.approx(1 - u / 2.0, rel=1e-6)


def test_degenerate_detected():
    layer = LayerGeometry(sphere(1.0), 1.5, 0.9)
    with pytest.raises(Degenerate):
        pullback_metric(layer, [1.0, 0.2], 1.0)


def test_block_structure_violation_detected():
    from qlayer.tube import _metric_from_frame

    J = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    N = np.array([0.0, 0.6, 0.8])  # not orthogonal to the tangents
    with pytest.raises(BlockStructure):
        _metric_from_frame(J, N, np.zeros((3, 2)), np.array(0.1), 2, True)


def test_validity_plane(plane):
    rep = validity_check(LayerGeometry(plane, 3.0))
    assert rep["passes"] and rep["a_sup_norm_A"] == 0.0


def test_validity_bump(bump):
    rep = validity_check(LayerGeometry(bump, 0.5, 0.9))
    assert rep["passes"]
    assert rep["a_sup_norm_A"] == pytest.approx(0.5, abs=1e-12)
    assert rep["a_sup_frobenius"] == pytest.approx(0.5 * math.sqrt(2), abs=1e-12)
    assert rep["norm_mode"] == "spectral"


def test_validity_sphere_fails():
    rep = validity_check(LayerGeometry(sphere(1.0), 1.5, 0.9))
    assert not rep["passes"]
    assert rep["margin"] == pytest.approx(-0.6, abs=1e-9)


def test_layer_rejects_bad_parameters(plane):
    with pytest.raises(ValueError):
        LayerGeometry(plane, 0.0)
    with pytest.raises(ValueError):
        LayerGeometry(plane, 1.0, 1.2)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-0.45, 0.45))
def test_transverse_profile_bounds(a, t):
    u = t * 2 * a
    v = transverse_profile(u, a)
    assert 0 <= v <= 1
    assert transverse_profile(a, a) == pytest.approx(0.0, abs=1e-15)
