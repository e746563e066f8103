import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlayer.catalog import bent_strip, catalog_surface
from qlayer.discretize import assemble, build_mesh
from qlayer.errors import MonotonicityViolation, ZeroVector
from qlayer.spectral import (
    Ladder,
    dense_eigenpairs,
    interval_dirichlet_eigenvalue,
    lowest_eigenpairs,
    rayleigh_quotient,
    refinement_study,
    richardson,
    transverse_threshold,
    transverse_threshold_numeric,
)
from qlayer.tube import LayerGeometry, transverse_profile

KAPPA = math.pi ** 2


@pytest.fixture(scope="module")
def strip():
    return LayerGeometry(catalog_surface("straight_strip"), 0.5)


@pytest.fixture(scope="module")
def rectangle_pair(strip):
    return assemble(build_mesh(strip, 1.0, 1 / 16, u_intervals=16), strip)


# ---------------------------------------------------------------- threshold


def test_threshold_values():
    assert transverse_threshold(0.5) == pytest.approx(9.8696044, abs=1e-7)
    assert transverse_threshold(1.0) == pytest.approx(2.4674011, abs=1e-7)
    with pytest.raises(ValueError):
        transverse_threshold(0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0))
def test_threshold_scaling(a):
    assert transverse_threshold(2 * a) == pytest.approx(transverse_threshold(a) / 4, rel=1e-14)


def test_interval_fe_is_upper_bound_and_second_order():
    e = [interval_dirichlet_eigenvalue(0.5, n) - KAPPA for n in (16, 32, 64)]
    assert all(v > 0 for v in e)
    assert e[0] / e[1] == pytest.approx(4.0, rel=0.01)
    assert e[1] / e[2] == pytest.approx(4.0, rel=0.01)


@pytest.mark.parametrize("a", [0.25, 0.5, 1.0])
def test_threshold_numeric(a):
    res = transverse_threshold_numeric(a)
    assert abs(res["extrapolated"] / transverse_threshold(a) - 1) < 1e-6


def test_richardson():
    # exact for c + d h^2
    f = lambda h: 3.0 + 7.0 * h * h  # noqa: E731
    val, err = richardson(f(0.2), f(0.1))
    assert val == pytest.approx(3.0, abs=1e-14)
    assert err == pytest.approx(7.0 * 0.03 / 3)


# ---------------------------------------------------------------- solvers


def test_rectangle_modes(strip):
    exact = KAPPA * np.array([1.25, 2.0, 3.25])
    pair = assemble(build_mesh(strip, 1.0, 1 / 32, u_intervals=32), strip)
    vals = lowest_eigenpairs(pair, 3).eigenvalues
    np.testing.assert_allclose(vals, exact, rtol=5e-3)
    assert np.all(vals > exact)


def test_dense_sparse_agree(rectangle_pair):
    d = dense_eigenpairs(rectangle_pair, 4)
    s = lowest_eigenpairs(rectangle_pair, 4)
    np.testing.assert_allclose(s.eigenvalues, d.eigenvalues, rtol=1e-8)
    assert np.all(np.diff(s.eigenvalues) > 0)
    assert np.all(s.relative_residuals < 1e-8)


def test_rayleigh_of_eigenvectors(rectangle_pair):
    res = lowest_eigenpairs(rectangle_pair, 3)
    for k in range(3):
        assert rayleigh_quotient(rectangle_pair, res.vectors[:, k]) == pytest.approx(res.eigenvalues[k], rel=1e-10)


def test_rayleigh_variational(rectangle_pair, rng):
    lam1 = lowest_eigenpairs(rectangle_pair, 1).eigenvalues[0]
    for _ in range(10):
        v = rng.normal(size=rectangle_pair.size)
        assert rayleigh_quotient(rectangle_pair, v) >= lam1 * (1 - 1e-12)


def test_rayleigh_full_vector_and_zero(rectangle_pair):
    with pytest.raises(ZeroVector):
        rayleigh_quotient(rectangle_pair, np.zeros(rectangle_pair.size))
    full = np.zeros(rectangle_pair.n_total)
    full[rectangle_pair.dof_map] = 1.0
    assert rayleigh_quotient(rectangle_pair, full) == pytest.approx(
        rayleigh_quotient(rectangle_pair, np.ones(rectangle_pair.size)))


def test_transverse_mode_on_strip_exceeds_threshold(strip):
    pair = assemble(build_mesh(strip, 5.0, 1 / 8, u_intervals=16), strip)
    psi = pair.restrict(pair.mesh.interpolate(lambda x, u: np.cos(math.pi * x[:, 0] / 10) * transverse_profile(u, 0.5)))
    assert rayleigh_quotient(pair, psi) >= KAPPA


def test_shift_above_eigenvalue_is_recovered(rectangle_pair):
    ref = dense_eigenpairs(rectangle_pair, 2).eigenvalues
    res = lowest_eigenpairs(rectangle_pair, 2, shift=ref[0] + 1.0)
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-9)
    assert res.shift < ref[0]


def test_flat_strip_decreases_to_threshold(strip):
    vals = []
    for R in (5.0, 10.0, 20.0):
        pair = assemble(build_mesh(strip, R, 1 / 8, u_intervals=16), strip)
        vals.append(lowest_eigenpairs(pair, 1, shift=0.9 * KAPPA).eigenvalues[0])
    assert all(KAPPA < v < 1.02 * KAPPA for v in vals)
    assert vals[0] > vals[1] > vals[2]


# ---------------------------------------------------------------- refinement study


def test_ladder_defaults():
    lad = Ladder.make([10, 5], [0.5, 0.25, 0.125], 0.5)
    assert lad.R_list == [5.0, 10.0]
    assert lad.u_intervals == [4, 4, 8]
    with pytest.raises(ValueError):
        Ladder.make([5], [0.5, 0.25], 0.5, u_intervals=[4])


def test_flat_strip_study(strip):
    st_ = refinement_study(strip, Ladder.make([5, 10, 20], [1 / 8, 1 / 16], 0.5, [8, 16]))
    assert not st_.below_threshold
    assert all(row["lambda1"] > KAPPA for row in st_.table)
    assert st_.monotone_in_R


def test_bent_strip_study():
    layer = LayerGeometry(bent_strip(0.5), 0.5)
    st_ = refinement_study(layer, Ladder.make([10, 20], [1 / 8, 1 / 16, 1 / 32], 0.5, [8, 16, 32]))
    assert st_.below_threshold
    assert st_.gap > st_.error_bar + st_.margin
    assert st_.gap == pytest.approx(0.0214, abs=5e-4)


def test_bent_strip_full_loops_gap():
    layer = LayerGeometry(bent_strip(0.5, 4 * math.pi), 0.5)
    st_ = refinement_study(layer, Ladder.make([16, 24], [1 / 8, 1 / 16, 1 / 32], 0.5, [8, 16, 32]))
    assert st_.extrapolated_lambda1 < KAPPA - 0.05
    lam = [r["lambda1"] for r in st_.table if r["R"] == 24.0]
    # second-order convergence of the ladder
    assert (lam[0] - lam[1]) / (lam[1] - lam[2]) == pytest.approx(4.0, rel=0.05)


def test_monotonicity_violation_flagged(strip, monkeypatch):
    import qlayer.spectral as spectral

    def fake(layer, R, h, nu, count=1, grading=0.0, seed=0):
        return spectral.SpectralResult(np.array([KAPPA + R + h]), np.zeros(1), np.zeros(1), h_base=h)

    monkeypatch.setattr(spectral, "solve_level", fake)
    lad = Ladder.make([5, 10], [0.5, 0.25], 0.5)
    with pytest.raises(MonotonicityViolation):
        refinement_study(strip, lad)
    assert not refinement_study(strip, lad, strict=False).monotone_in_R


def test_study_needs_two_levels(strip):
    with pytest.raises(ValueError):
        refinement_study(strip, Ladder.make([5], [0.5], 0.5))
