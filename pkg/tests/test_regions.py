import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conspaste.errors import GridTooCoarse, InvalidParameter, InvalidRegion, RegionTooTight
from conspaste.grid import GridSpec
from conspaste.regions import (
    annulus_regions,
    ball_mask,
    ball_regions,
    box_mask,
    distance_to_set,
    nested_regions,
    partition_of_unity,
    radial_bump,
    smoothstep,
    smoothstep_slope_bound,
)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_smoothstep_endpoints_and_flatness(k):
    t = np.array([0.0, 1.0])
    assert np.all(smoothstep(t, k) == [0.0, 1.0])
    for d in range(1, k):
        assert np.max(np.abs(smoothstep(t, k, deriv=d))) < 1e-12
    grid = np.linspace(0, 1, 2001)
    assert np.max(np.abs(smoothstep(grid, k, deriv=1))) <= smoothstep_slope_bound(k) + 1e-12


def test_ball_regions_partition(spec64):
    rs = ball_regions(spec64, (0.5, 0.5), 0.1, 0.4, 0.15)
    total = rs.v.astype(int) + rs.omega.astype(int) + rs.w.astype(int)
    assert np.all(total == 1)
    assert np.all(rs.dist[rs.v] <= rs.inner_radius)
    assert np.all(rs.dist[rs.w] >= rs.outer_radius)
    assert rs.metadata()["K"]["kind"] == "ball"


def test_distance_to_set_matches_ball_distance(spec64):
    K = ball_mask(spec64, (0.5, 0.5), 0.1)
    dist, direction = distance_to_set(spec64, K)
    exact = np.maximum(spec64.distance_from((0.5, 0.5)) - 0.1, 0)
    far = exact > 0.05
    assert np.max(np.abs(dist[far] - exact[far])) < 2 * spec64.min_spacing
    norms = np.sqrt(np.sum(direction[:, far] ** 2, axis=0))
    assert np.allclose(norms, 1.0)


def test_too_tight_and_invalid(spec64):
    with pytest.raises(RegionTooTight):
        ball_regions(spec64, (0.5, 0.5), 0.1, 0.11, 0.005)
    K = box_mask(spec64, (0.5, 0.5), (0.1, 0.1))
    with pytest.raises(InvalidRegion):
        nested_regions(K, np.zeros_like(K), 0.1, spec64)
    with pytest.raises(InvalidRegion):
        nested_regions(np.zeros_like(K), np.ones_like(K), 0.1, spec64)
    with pytest.raises(InvalidParameter):
        nested_regions(K, np.ones_like(K), -1.0, spec64)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.05, 0.15))
def test_partition_of_unity_plateaus(cx, cy, r_in):
    spec = GridSpec.square(32)
    rs = annulus_regions(spec, (cx, cy), r_in, r_in + 0.15)
    cut = partition_of_unity(rs)
    assert np.all(cut.xi1.values[rs.v] == 1.0)
    assert np.all(cut.xi1.values[rs.w] == 0.0)
    assert np.all((cut.xi1.values >= 0) & (cut.xi1.values <= 1))
    assert np.all(cut.xi1.values + cut.xi2.values == 1.0)
    assert np.max(np.abs(cut.gradient_xi1)) <= cut.slope_bound + 1e-12


def test_swapped_regions_swap_plateaus(spec64):
    rs = annulus_regions(spec64, (0.5, 0.5), 0.1, 0.25)
    sw = rs.swapped()
    cut = partition_of_unity(sw)
    assert np.all(cut.xi1.values[sw.v] == 1.0) and np.all(cut.xi1.values[sw.w] == 0.0)
    assert np.array_equal(sw.v, rs.w)


def test_radial_bump_plateaus_and_limits(spec64):
    b = radial_bump(spec64, (0.3, 0.2), 0.1)
    d = spec64.distance_from((0.3, 0.2))
    assert np.all(b.field.values[d <= 0.05] == 1.0)
    assert np.all(b.field.values[d >= 0.1] == 0.0)
    with pytest.raises(GridTooCoarse):
        radial_bump(spec64, (0.3, 0.2), 0.05)
    with pytest.raises(InvalidParameter):
        radial_bump(spec64, (0.3, 0.2), 0.3)
