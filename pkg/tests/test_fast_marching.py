import math

import numpy as np
import pytest

from qlayer.fast_marching import march_grid, segment_update


def test_segment_update_endpoints():
    a, b, c = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    # no help from the far vertex: the value through a is 0 + 1
    assert segment_update(0.0, 10.0, a, b, c) == pytest.approx(1.0)


def test_segment_update_plane_wave():
    # front travelling in +y: ta = tb = 0 on the x-axis, c one unit above the midpoint
    a, b, c = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.5, 1.0, 0.0)
    assert segment_update(0.0, 0.0, a, b, c) == pytest.approx(1.0, abs=1e-14)


def test_segment_update_oblique_wave():
    # exact for a linear field t = x cos(th) + y sin(th) when the ray into c crosses AB
    th = 1.2
    a, b, c = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.7, 1.0, 0.0)
    t = lambda p: p[0] * math.cos(th) + p[1] * math.sin(th)  # noqa: E731
    assert segment_update(t(a), t(b), a, b, c) == pytest.approx(t(c), abs=1e-13)


def _flat_grid(m, h):
    ax = np.arange(-m, m + 1) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([X, Y, 0 * X], axis=-1), X, Y


def test_flat_distance_error_decreases():
    errs = []
    for m, h in ((20, 0.2), (40, 0.1)):
        pts, X, Y = _flat_grid(m, h)
        d = march_grid(pts, (m, m))
        errs.append(np.max(np.abs(d - np.hypot(X, Y))))
    assert errs[1] < errs[0]
    assert errs[1] < 0.05


def test_distance_is_symmetric_and_nonnegative():
    pts, X, Y = _flat_grid(15, 0.2)
    d = march_grid(pts, (15, 15))
    assert d[15, 15] == 0.0
    assert np.all(d >= 0)
    np.testing.assert_allclose(d, d[::-1, :], atol=1e-12)
    np.testing.assert_allclose(d, d.T, atol=1e-12)


def test_distance_dominates_chord():
    # geodesic distance can never be shorter than the straight chord
    m, h = 20, 0.2
    ax = np.arange(-m, m + 1) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    Z = np.exp(-(X ** 2 + Y ** 2) / 2)
    pts = np.stack([X, Y, Z], axis=-1)
    d = march_grid(pts, (m, m))
    chord = np.linalg.norm(pts - pts[m, m], axis=-1)
    assert np.all(d >= chord - 1e-12)
