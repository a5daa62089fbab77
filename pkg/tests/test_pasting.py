import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conspaste import fd, recipes
from conspaste.errors import NotConservativeInput, SpecMismatch, TargetUnreachable
from conspaste.grid import GridSpec, ScalarField, VectorField
from conspaste.pasting import compatibility_defect, paste_vector_fields, smooth_conservative, support_radius
from conspaste.regions import ball_regions
from conspaste.divsolve import zero_boundary_solver


@pytest.fixture
def setup(spec64):
    X = recipes.cellular_flow(spec64)
    Y = X + recipes.localized_perturbation(spec64, (0.5, 0.5), 0.3, seed=0) * 0.05
    rs = ball_regions(spec64, (0.5, 0.5), 0.1, 0.4, 0.15)
    return X, Y, rs


def test_paste_plateaus_and_conservation(setup):
    X, Y, rs = setup
    Z, rep = paste_vector_fields(X, Y, rs)
    assert np.all(Z.values[:, rs.v] == Y.values[:, rs.v])
    assert np.all(Z.values[:, rs.w] == X.values[:, rs.w])
    assert rep.divergence_residual_sup <= 1e-8
    assert abs(rep.defect_integral) <= 1e-11
    assert rep.support_radius <= rs.margin


def test_trivial_paste(setup):
    X, _, rs = setup
    Z, rep = paste_vector_fields(X, X, rs)
    assert np.array_equal(Z.values, X.values)
    assert rep.extras["correction_c1"] == 0.0


def test_swapped_roles_symmetry(setup):
    # pasting Y into X on the swapped regions gives the same field as pasting X into Y
    X, Y, rs = setup
    Z1, _ = paste_vector_fields(X, Y, rs)
    Z2, _ = paste_vector_fields(Y, X, rs.swapped())
    assert np.max(np.abs(Z1.values - Z2.values)) < 1e-11


def test_non_conservative_input_rejected(setup, spec64):
    X, _, rs = setup
    grad = fd.gradient_fwd(ScalarField.from_function(spec64, lambda x, y: 0.05 * np.sin(2 * np.pi * x)))
    with pytest.raises(NotConservativeInput):
        paste_vector_fields(grad, X, rs)
    with pytest.raises(SpecMismatch):
        paste_vector_fields(X, recipes.cellular_flow(GridSpec.square(32)), rs)


def test_compatibility_defect_matches_boundary_flux(spec64):
    # independent flux quadrature: sum_R D+ . T telescopes to node values on the faces of R
    rs = ball_regions(spec64, (0.4, 0.6), 0.1, 0.4, 0.15)
    rng = np.random.default_rng(3)
    T = VectorField(spec64, rng.standard_normal((2,) + spec64.sizes))
    R = zero_boundary_solver(rs).row_mask
    flux = 0.0
    for i in range(2):
        entering = np.roll(R, 1, axis=i) & ~R  # m - e_i in R, m not in R
        leaving = R & ~np.roll(R, 1, axis=i)  # m in R, m - e_i not in R
        flux += (np.sum(T.values[i][entering]) - np.sum(T.values[i][leaving])) * spec64.sizes[i]
    flux *= spec64.cell_volume
    assert compatibility_defect(T, rs) == pytest.approx(flux, abs=1e-10)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 1000), st.floats(1e-3, 1e-1))
def test_support_and_conservation_hold_for_random_perturbations(seed, scale):
    spec = GridSpec.square(32)
    X = recipes.random_divfree_discrete(spec, seed)
    Y = X + recipes.random_divfree_discrete(spec, seed + 1) * scale
    rs = ball_regions(spec, (0.5, 0.5), 0.1, 0.45, 0.2)
    Z, rep = paste_vector_fields(X, Y, rs)
    assert rep.divergence_residual_sup <= 1e-8
    assert support_radius(Z, X, rs) <= rs.margin
    assert np.array_equal(Z.values[:, rs.v], Y.values[:, rs.v])


def test_smooth_conservative(spec64):
    X = recipes.random_divfree_spectral(spec64, 3, max_freq=1)
    Z, achieved = smooth_conservative(X, 0.3)
    assert achieved.c1 <= 0.3
    assert achieved.extras["divergence_sup"] <= 1e-10
    with pytest.raises(TargetUnreachable):
        smooth_conservative(X, 1e-16)
