import numpy as np
import pytest

from conspaste.errors import InvalidParameter, NoTwist, TwistLost
from conspaste.symplectic import (
    ChebyshevGenerating,
    blend_generating,
    blend_weight,
    fd_jacobian_det,
    generating_from_map,
    generating_map,
    linear_map,
    map_from_generating,
    paste_along_orbit,
    patch_from_generating,
    patch_nodes,
    standard_map,
    standard_map_linearisation,
)

DELTA = 0.1
K = 0.3


@pytest.fixture(scope="module")
def pair():
    S0 = generating_from_map(standard_map(K, DELTA))
    S1 = generating_from_map(standard_map_linearisation(K, DELTA))
    return S0, S1, blend_generating(S0, S1, DELTA)


def test_generating_function_reproduces_the_map(pair):
    S0, _, _ = pair
    f = standard_map(K, DELTA)
    x, y = patch_nodes(DELTA, 21)
    X, Y, valid = map_from_generating(S0, x, y)
    Xf, Yf = f(x, y)
    assert valid.sum() > 0.3 * valid.size
    assert np.max(np.abs(X[valid] - Xf[valid])) < 1e-12
    assert np.max(np.abs(Y[valid] - Yf[valid])) < 1e-12


def test_linear_map_generating_function_is_quadratic():
    # X = 2x + y, Y = x + y  =>  y = X - 2x,  S = x^2 - x X + X^2 / 2
    S = generating_from_map(linear_map([[2.0, 1.0], [1.0, 1.0]], DELTA))
    x, X = patch_nodes(DELTA, 9)
    assert np.max(np.abs(S.value(x, X) - (x**2 - x * X + X**2 / 2))) < 1e-14
    assert np.max(np.abs(S.d12(x, X) + 1.0)) < 1e-12


def test_blend_weight_plateaus():
    z = np.linspace(0, 2, 401)
    w = blend_weight(z)
    assert np.all(w[z <= 0.5] == 1.0)
    assert np.all(w[z >= 1.0] == 0.0)
    assert np.all(np.diff(w) <= 0)


def test_blend_is_area_preserving(pair):
    _, _, B = pair
    x, y = patch_nodes(DELTA, 41)
    det = fd_jacobian_det(generating_map(B), x, y, 2e-4 * DELTA)
    ok = np.isfinite(det)
    assert ok.mean() > 0.3
    assert np.max(np.abs(det[ok] - 1.0)) <= 1e-8


def test_blend_plateaus_are_exact(pair):
    S0, S1, B = pair
    x, y = patch_nodes(DELTA, 41)
    X1, Y1, v1 = map_from_generating(S1, x, y)
    Xb, Yb, vb = map_from_generating(B, x, y, seed=np.where(v1, X1, x + y))
    near = v1 & vb & (np.hypot(x, X1) <= DELTA / 4)
    assert near.sum() > 10
    assert np.array_equal(Xb[near], X1[near]) and np.array_equal(Yb[near], Y1[near])
    X0, Y0, v0 = map_from_generating(S0, x, y)
    Xb, Yb, vb = map_from_generating(B, x, y, seed=np.where(v0, X0, x + y))
    far = v0 & vb & (np.hypot(x, X0) >= DELTA / 2)
    assert far.sum() > 10
    assert np.array_equal(Xb[far], X0[far]) and np.array_equal(Yb[far], Y0[far])


def test_twist_survives_small_perturbations(pair):
    S0, _, B = pair
    assert B.twist_bound() >= 0.9 * S0.twist_bound()


def test_twist_failures():
    with pytest.raises(NoTwist):
        generating_from_map(linear_map(np.eye(2), DELTA))
    S0 = generating_from_map(linear_map([[1.0, 1.0], [0.0, 1.0]], DELTA))
    S1 = generating_from_map(linear_map([[1.0, -1.0], [0.0, 1.0]], DELTA))
    with pytest.raises(TwistLost):
        blend_generating(S0, S1, DELTA)
    with pytest.raises(InvalidParameter):
        generating_from_map(linear_map([[2.0, 1.0], [0.0, 1.0]], DELTA))


def test_patch_and_orbit(pair):
    _, _, B = pair
    patch = patch_from_generating(B, 21, center=(0.5, 0.25))
    assert patch.values.shape == (2, 21, 21)
    assert patch.header() == {"center": [0.5, 0.25], "delta": DELTA}
    outer = [standard_map(K, DELTA)] * 2
    inner = [standard_map_linearisation(K, DELTA)] * 2
    blends = paste_along_orbit(outer, inner, [DELTA, DELTA / 2])
    assert [b.blend_radius for b in blends] == [DELTA, DELTA / 2]
    with pytest.raises(InvalidParameter):
        paste_along_orbit(outer, inner, [DELTA])


def test_chebyshev_derivatives_match_finite_differences(pair):
    S0, _, _ = pair
    assert isinstance(S0, ChebyshevGenerating)
    x, X = np.array([0.03, -0.05]), np.array([0.02, 0.04])
    h = 1e-6
    d1 = (S0.value(x + h, X) - S0.value(x - h, X)) / (2 * h)
    d2 = (S0.value(x, X + h) - S0.value(x, X - h)) / (2 * h)
    assert np.max(np.abs(d1 - S0.d1(x, X))) < 1e-8
    assert np.max(np.abs(d2 - S0.d2(x, X))) < 1e-8
