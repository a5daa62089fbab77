import numpy as np
import pytest

from conspaste.diffeo import inverse_consistency, linear_blend, weak_paste
from conspaste.errors import GridTooCoarse, InvalidParameter, NotDiffeo
from conspaste.grid import GridMap, GridSpec, norms
from conspaste.recipes import shear_map, two_shear_map

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def pasted():
    spec = GridSpec.square(128)
    f = two_shear_map(spec)
    return f, weak_paste(f, (0.3, 0.2), 0.08)


def test_weak_paste_is_volume_preserving(pasted):
    _, wp = pasted
    assert wp.report.det_error_sup <= 1e-7
    assert wp.report.extras["status"] == "converged"
    assert wp.report.extras["lambda"] == pytest.approx(1.0, abs=1e-12)


def test_weak_paste_plateaus(pasted):
    f, wp = pasted
    spec = f.spec
    d = spec.distance_from(wp.blend.x0)
    affine = wp.blend.affine_displacement(spec.offsets_from(wp.blend.x0))
    inner = d <= 0.04
    assert np.array_equal(wp.g.values[:, inner], affine[:, inner])
    assert np.array_equal(wp.g.values[:, d >= 0.08], f.values[:, d >= 0.08])


def test_weak_paste_inverse_consistency(pasted):
    _, wp = pasted
    assert inverse_consistency(wp, n_points=32) <= 1e-6


def test_affine_part_is_the_linearisation(pasted):
    f, wp = pasted
    # Df(x0) of the two-shear map by the chain rule
    a = b = 0.02
    x0, y0 = wp.blend.x0
    xp = x0 + a * np.sin(TWO_PI * y0)
    J1 = np.array([[1, a * TWO_PI * np.cos(TWO_PI * y0)], [0, 1]])
    J2 = np.array([[1, 0], [b * TWO_PI * np.cos(TWO_PI * xp), 1]])
    assert np.max(np.abs(wp.blend.jac0 - J2 @ J1)) < 1e-10


def test_blend_plateaus_are_node_exact(spec64):
    f = shear_map(spec64, 0.02)
    f = GridMap(f.displacement, diffeo=True)
    b = linear_blend(f, (0.4, 0.6), 0.16)
    d = spec64.distance_from((0.4, 0.6))
    assert np.array_equal(b.h.values[:, d >= 0.16], f.values[:, d >= 0.16])


def test_blend_distance_scales_with_radius():
    spec = GridSpec.square(128)
    f = two_shear_map(spec)
    ratios = []
    for r in (0.12, 0.08, 0.04):
        h = linear_blend(f, (0.3, 0.2), r).h
        ratios.append(norms(h.displacement - f.displacement).c1 / r)
    assert max(ratios) / min(ratios) < 2.0


def test_invalid_inputs(spec64):
    fold = GridMap.from_function(spec64, lambda x, y: (0.3 * np.sin(TWO_PI * x), 0 * y))
    with pytest.raises(InvalidParameter):
        weak_paste(fold, (0.5, 0.5), 0.1)
    with pytest.raises(NotDiffeo):
        linear_blend(fold, (0.5, 0.5), 0.1)
    with pytest.raises(GridTooCoarse):
        weak_paste(two_shear_map(GridSpec.square(32)), (0.5, 0.5), 0.08)
    with pytest.raises(InvalidParameter):
        weak_paste(two_shear_map(spec64), (0.5, 0.5), 0.3)
