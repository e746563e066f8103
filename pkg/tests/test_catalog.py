import math

import numpy as np
import pytest

from qlayer.catalog import BUILTINS, bent_strip, cap_cone_profile, catalog_surface, rotational_graph, table_profile
from qlayer.errors import BadParameters, UnknownSurface
from qlayer.surface_geometry import asymptotic_flatness_report, curvatures, sup_norm_A


def test_all_builtins_construct():
    for name in BUILTINS:
        chart = catalog_surface(name)
        assert chart.dim_base in (1, 2)
        chart.evaluate(chart.origin)


def test_plane_control():
    p = catalog_surface("plane")
    assert p.euler_characteristic == 1
    assert len(p.ends) == 1
    assert sup_norm_A(p, 5.0) == 0.0


def test_bump_metadata():
    b = catalog_surface("gaussian_bump", {"h": 1, "w": 1})
    assert b.euler_characteristic == 1
    assert sup_norm_A(b, 5.0) > 0
    assert asymptotic_flatness_report(b, [1, 2, 4, 8])["flat"]


def test_bent_strip_compact_curvature():
    s = bent_strip(0.5)
    assert s.dim_base == 1
    k = curvatures(s, np.linspace(-20, 20, 401)[:, None]).principal[:, 0]
    half = math.pi / (2 * 0.5)
    inside = np.abs(np.linspace(-20, 20, 401)) < half - 1e-9
    np.testing.assert_allclose(k[inside], 0.5, atol=1e-12)
    np.testing.assert_allclose(k[np.abs(np.linspace(-20, 20, 401)) > half + 1e-9], 0.0, atol=1e-12)


def test_bent_strip_is_unit_speed():
    s = bent_strip(0.5, math.pi)
    x = np.linspace(-10, 10, 101)[:, None]
    np.testing.assert_allclose(np.linalg.norm(s.jac(x)[..., 0], axis=-1), 1.0, atol=1e-12)
    # a U-turn: the two straight ends run antiparallel
    np.testing.assert_allclose(s.jac([[-10.0]])[0, :, 0], -s.jac([[10.0]])[0, :, 0], atol=1e-12)


def test_unknown_and_bad():
    with pytest.raises(UnknownSurface):
        catalog_surface("torus")
    with pytest.raises(BadParameters):
        catalog_surface("gaussian_bump", {"w": 0})
    with pytest.raises(BadParameters):
        catalog_surface("plane", {"h": 1})


def test_cap_cone_is_c1():
    p = cap_cone_profile(1.0, 0.8)
    rb = math.sin(0.8)
    eps = 1e-9
    assert p.f(rb - eps) == pytest.approx(p.f(rb + eps), abs=1e-8)
    assert p.df(rb - eps) == pytest.approx(p.df(rb + eps), abs=1e-7)


def test_table_profile_reproduces_gaussian():
    r = np.linspace(0, 10, 401)
    tab = rotational_graph({"rho": r.tolist(), "z": np.exp(-r ** 2 / 2).tolist()})
    ref = catalog_surface("gaussian_bump")
    x = np.array([[0.3, 0.4], [1.0, -1.5]])
    np.testing.assert_allclose(tab.evaluate(x), ref.evaluate(x), atol=1e-6)
    np.testing.assert_allclose(curvatures(tab, x).gauss_curvature, curvatures(ref, x).gauss_curvature, atol=1e-3)


def test_table_profile_rejects_unsorted():
    with pytest.raises((BadParameters, ValueError)):
        table_profile([0, 2, 1], [0, 1, 2])
