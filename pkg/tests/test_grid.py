import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conspaste import fd
from conspaste.errors import InvalidField, InvalidParameter, NotDiffeo, SpecMismatch
from conspaste.grid import (
    GridMap,
    GridSpec,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    holder_seminorm,
    integrate,
    jacobian,
    laplacian,
    norms,
    trig_eval,
)

TWO_PI = 2 * np.pi


def test_spectral_derivatives_of_trig_polynomials(spec64):
    s = ScalarField.from_function(spec64, lambda x, y: np.sin(TWO_PI * x) * np.cos(2 * TWO_PI * y))
    g = gradient(s).values
    x, y = spec64.coords()
    assert np.max(np.abs(g[0] - TWO_PI * np.cos(TWO_PI * x) * np.cos(2 * TWO_PI * y))) < 1e-11
    assert np.max(np.abs(g[1] + 2 * TWO_PI * np.sin(TWO_PI * x) * np.sin(2 * TWO_PI * y))) < 1e-11
    lap = laplacian(s).values
    assert np.max(np.abs(lap + 5 * TWO_PI**2 * s.values)) < 1e-9


def test_divergence_of_curl_vanishes(spec64):
    v = VectorField.from_function(spec64, lambda x, y: (np.cos(TWO_PI * y), np.sin(TWO_PI * x)))
    assert np.max(np.abs(divergence(v).values)) < 1e-12


def test_nonfinite_values_rejected(spec32):
    bad = np.zeros(spec32.sizes)
    bad[3, 4] = np.nan
    with pytest.raises(InvalidField):
        ScalarField(spec32, bad)


def test_spec_mismatch(spec32, spec64):
    with pytest.raises(SpecMismatch):
        ScalarField.constant(spec32, 1.0) + ScalarField.constant(spec64, 1.0)


def test_norms_of_sine():
    spec = GridSpec.square(128)
    s = ScalarField.from_function(spec, lambda x, y: np.sin(TWO_PI * x))
    n = norms(s)
    assert n.c0 == pytest.approx(1.0)
    assert n.c1 == pytest.approx(TWO_PI, rel=1e-12)
    # |sin a - sin b| / |a - b|^1/2 peaks well below the Lipschitz constant times the spacing
    assert 1.0 < n.holder < TWO_PI
    with pytest.raises(InvalidParameter):
        norms(s, alpha=1.0)


def test_holder_of_constant_is_zero(spec32):
    assert holder_seminorm(ScalarField.constant(spec32, 3.0), 0.5) == 0.0


def test_integrate_and_mask(spec32):
    s = ScalarField.constant(spec32, 2.0)
    assert integrate(s) == pytest.approx(2.0)
    mask = np.zeros(spec32.sizes, dtype=bool)
    mask[:16] = True
    assert integrate(s, mask) == pytest.approx(1.0)


def test_identity_map_has_unit_jacobian(spec32):
    _, det = jacobian(GridMap.identity(spec32))
    assert np.all(det.values == 1.0)


def test_folding_map_rejected(spec32):
    with pytest.raises(NotDiffeo):
        GridMap.from_function(spec32, lambda x, y: (0.3 * np.sin(TWO_PI * x), 0 * y), diffeo=True)


def test_trig_eval_matches_nodes_and_analytic(spec32):
    s = ScalarField.from_function(spec32, lambda x, y: np.sin(TWO_PI * x) + np.cos(3 * TWO_PI * y))
    pts = spec32.points().reshape(2, -1)
    assert np.max(np.abs(trig_eval(s.values, spec32, pts) - s.values.ravel())) < 1e-12
    q = np.array([[0.123, 0.77], [0.456, 0.01]])
    exact = np.sin(TWO_PI * q[0]) + np.cos(3 * TWO_PI * q[1])
    assert np.max(np.abs(trig_eval(s.values, spec32, q) - exact)) < 1e-12
    dx = trig_eval(s.values, spec32, q, deriv_axis=0)
    assert np.max(np.abs(dx - TWO_PI * np.cos(TWO_PI * q[0]))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_summation_by_parts(seed):
    spec = GridSpec((12, 10))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(spec.sizes)
    b = rng.standard_normal(spec.sizes)
    for ax in range(2):
        lhs = np.sum(a * fd.forward(b, spec, ax))
        rhs = -np.sum(fd.backward(a, spec, ax) * b)
        assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_conservative_jacobian_sums_to_node_count(seed, dim):
    spec = GridSpec.square(8 if dim == 3 else 16, dim)
    rng = np.random.default_rng(seed)
    v = VectorField(spec, 0.01 * rng.standard_normal((dim,) + spec.sizes))
    det = fd.jacobian_det_conservative(v).values
    assert np.sum(det) == pytest.approx(spec.n_nodes, abs=1e-9)


def test_conservative_jacobian_is_exact_for_affine_fields():
    spec = GridSpec.square(16)
    x, y = spec.coords()
    # a linear displacement restricted to a patch: the forward det equals det(I + A) inside
    A = np.array([[0.1, 0.02], [-0.03, 0.05]])
    mask = (np.abs(x - 0.5) < 0.2) & (np.abs(y - 0.5) < 0.2)
    vals = np.stack([A[0, 0] * x + A[0, 1] * y, A[1, 0] * x + A[1, 1] * y]) * mask
    det = fd.jacobian_det_conservative(VectorField(spec, vals)).values
    inner = (np.abs(x - 0.5) < 0.15) & (np.abs(y - 0.5) < 0.15)
    assert np.max(np.abs(det[inner] - np.linalg.det(np.eye(2) + A))) < 1e-12


def test_curl_fwd_is_divergence_free(spec32):
    rng = np.random.default_rng(1)
    psi = ScalarField(spec32, rng.standard_normal(spec32.sizes))
    assert np.max(np.abs(fd.divergence_fwd(fd.curl_fwd(psi)).values)) < 1e-10
    spec3 = GridSpec.square(8, 3)
    A = VectorField(spec3, rng.standard_normal((3,) + spec3.sizes))
    assert np.max(np.abs(fd.divergence_fwd(fd.curl_fwd(A)).values)) < 1e-10
