import numpy as np
import pytest

from conspaste import recipes
from conspaste.errors import GridTooCoarse, KernelTooWide, SpecMismatch
from conspaste.grid import GridSpec, ScalarField, divergence, norms
from conspaste.mollify import bump_profile, kernel, mollify, mollify_field


def test_kernel_unit_mass_and_support(spec64):
    k = kernel(0.1, spec64)
    assert np.sum(k.kernel.values) * spec64.cell_volume == pytest.approx(1.0, abs=1e-14)
    d = spec64.distance_from((0.0, 0.0))
    assert np.all(k.kernel.values[d >= 0.1] == 0.0)
    assert k.support_size > 0


def test_kernel_width_limits(spec64):
    with pytest.raises(GridTooCoarse):
        kernel(3 * spec64.min_spacing, spec64)
    with pytest.raises(KernelTooWide):
        kernel(0.25, spec64)
    with pytest.raises(SpecMismatch):
        mollify_field(ScalarField.constant(GridSpec.square(32), 1.0), kernel(0.1, spec64))


def test_bump_profile_vanishes_outside():
    assert np.all(bump_profile(np.array([1.0, 1.5])) == 0.0)
    assert bump_profile(np.array([0.0]))[0] == pytest.approx(np.exp(-1.0))


def test_constants_are_preserved(spec64):
    s = ScalarField.constant(spec64, 3.5)
    assert np.max(np.abs(mollify(s, 0.1).values - 3.5)) < 1e-13


def test_direct_convolution_oracle():
    spec = GridSpec.square(32)
    rng = np.random.default_rng(0)
    s = ScalarField(spec, rng.standard_normal(spec.sizes))
    k = kernel(0.15, spec)
    # brute-force periodic sum of s(x - y) k(y) h^2
    out = np.zeros(spec.sizes)
    kv = k.kernel.values
    for i, j in zip(*np.nonzero(kv)):
        out += kv[i, j] * np.roll(s.values, (i, j), axis=(0, 1))
    out *= spec.cell_volume
    assert np.max(np.abs(mollify_field(s, k).values - out)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_commutes_with_divergence(spec64, seed):
    F = recipes.random_divfree_spectral(spec64, seed) + recipes.cellular_flow(spec64, 0.3)
    k = kernel(0.08, spec64)
    comm = divergence(mollify_field(F, k)).values - mollify_field(divergence(F), k).values
    assert np.max(np.abs(comm)) <= 1e-12 * norms(F).c1
