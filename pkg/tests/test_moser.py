import numpy as np
import pytest

from conspaste.errors import InvalidField, InvalidParameter, NoContraction, SpecMismatch
from conspaste.grid import GridSpec, ScalarField, jacobian
from conspaste.moser import (
    MoserProblem,
    PeriodicInterpolator,
    det_residual,
    jacobian_determinant,
    moser_problem_torus,
    solve_jacobian_eq,
)
from conspaste.regions import annulus_regions

TWO_PI = 2 * np.pi


def _density(spec, amp, kx=1, ky=1):
    return ScalarField.from_function(spec, lambda x, y: 1 + amp * np.sin(TWO_PI * kx * x) * np.sin(TWO_PI * ky * y))


def test_constant_density_returns_identity(spec32):
    u, trace = solve_jacobian_eq(moser_problem_torus(ScalarField.constant(spec32, 1.0)))
    assert np.all(u.values == 0.0)
    assert trace.iterations == 0


def test_torus_contraction(spec64):
    p = moser_problem_torus(_density(spec64, 0.05))
    u, trace = solve_jacobian_eq(p, tol=1e-10)
    assert trace.status == "converged"
    assert trace.final_residual <= 1e-10
    assert trace.geometric_ratio() <= 0.7
    # independent check with the spectral Jacobian
    _, det = jacobian(u)
    assert np.max(np.abs(det.values - p.f.values)) <= 1e-9


def test_torus_with_target_density(spec64):
    f = _density(spec64, 0.05)
    g = ScalarField.from_function(spec64, lambda x, y: 1 + 0.05 * np.cos(TWO_PI * (x + y)))
    p = MoserProblem(f, g)
    u, trace = solve_jacobian_eq(p, tol=1e-9)
    assert np.max(np.abs(det_residual(u, p, trace.lambdas[-1]).values)) <= 1e-9
    assert trace.lambdas[-1] == pytest.approx(p.lam, abs=1e-3)


def test_annulus_contraction_and_identity_outside(spec64):
    rs = annulus_regions(spec64, (0.5, 0.5), 0.1, 0.35)
    f = _density(spec64, 0.05, 2, 1)
    p = MoserProblem(f, None, rs)
    u, trace = solve_jacobian_eq(p)
    assert trace.status == "converged"
    assert np.all(u.values[:, ~rs.omega] == 0.0)
    det = jacobian_determinant(u, p).values
    # sum of the discrete Jacobian over the solve rows equals their count
    assert np.sum(det[p.domain]) == pytest.approx(p.domain.sum(), abs=1e-9)
    assert np.max(np.abs(det - trace.lambdas[-1] * f.values)[p.domain]) <= 1e-10


def test_large_deviation_rejected(spec64):
    f = ScalarField.from_function(spec64, lambda x, y: 1 + 0.9 * np.sin(TWO_PI * x))
    with pytest.raises(NoContraction):
        solve_jacobian_eq(moser_problem_torus(f))


def test_problem_validation(spec32):
    with pytest.raises(InvalidField):
        moser_problem_torus(ScalarField.constant(spec32, -1.0))
    with pytest.raises(SpecMismatch):
        MoserProblem(ScalarField.constant(spec32, 1.0), ScalarField.constant(GridSpec.square(16), 1.0))
    with pytest.raises(InvalidParameter):
        solve_jacobian_eq(moser_problem_torus(ScalarField.constant(spec32, 1.0)), tol=1e-14)


def test_periodic_interpolator_is_exact_at_nodes_and_periodic(spec32):
    s = _density(spec32, 0.3)
    ip = PeriodicInterpolator(s)
    pts = spec32.points()
    assert np.max(np.abs(ip(pts) - s.values)) < 1e-12
    assert np.max(np.abs(ip(pts + 1.0) - s.values)) < 1e-12
    q = np.array([[0.31], [0.77]])
    exact = 1 + 0.3 * np.sin(TWO_PI * 0.31) * np.sin(TWO_PI * 0.77)
    assert ip(q)[0] == pytest.approx(exact, abs=1e-4)


def test_trace_csv(spec32):
    _, trace = solve_jacobian_eq(moser_problem_torus(_density(spec32, 0.05)))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "iter,residual_c0,ratio"
    assert len(lines) == trace.iterations + 2
