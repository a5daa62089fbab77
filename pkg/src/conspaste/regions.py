"""Nested region systems and smooth cutoffs.

A :class:`RegionSet` splits the torus into three disjoint node sets: the inner
plateau ``V`` (where the new system is kept), the correction annulus
``omega``, and the outer plateau ``W`` (where the old system is kept).  All
three are level sets of the torus distance to a compact node set ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy.spatial import cKDTree

from .errors import GridTooCoarse, InvalidParameter, InvalidRegion, RegionTooTight
from .grid import GridSpec, ScalarField


# --- smoothstep profile ----------------------------------------------------------


@lru_cache(maxsize=None)
def smoothstep_poly(k: int) -> np.polynomial.Polynomial:
    """Degree ``2k+1`` polynomial with S(0)=0, S(1)=1 and k vanishing derivatives at both ends."""
    if k < 1:
        raise InvalidParameter(f"smoothness must be >= 1, got {k}")
    coef = np.zeros(2 * k + 2)
    for j in range(k + 1):
        coef[k + 1 + j] = comb(k + j, j) * comb(2 * k + 1, k - j) * (-1) ** j
    return np.polynomial.Polynomial(coef)


def smoothstep(t: np.ndarray, k: int = 2, deriv: int = 0) -> np.ndarray:
    """Smoothstep clamped to [0, 1]; plateaus are exact (no rounding at t<=0 or t>=1)."""
    t = np.asarray(t, dtype=float)
    p = smoothstep_poly(k)
    if deriv:
        p = p.deriv(deriv)
    out = p(np.clip(t, 0.0, 1.0))
    lo, hi = t <= 0.0, t >= 1.0
    out = np.where(lo, 0.0, out)
    out = np.where(hi, 1.0 if deriv == 0 else 0.0, out)
    return out


@lru_cache(maxsize=None)
def smoothstep_slope_bound(k: int) -> float:
    """``max |S'|`` on [0, 1], attained at t = 1/2 by symmetry."""
    return float(smoothstep_poly(k).deriv()(0.5))


@lru_cache(maxsize=None)
def smoothstep_curvature_bound(k: int) -> float:
    p2 = smoothstep_poly(k).deriv(2)
    crit = [r.real for r in p2.deriv().roots() if abs(r.imag) < 1e-12 and 0 <= r.real <= 1]
    return float(max(abs(p2(t)) for t in crit + [0.0, 1.0]))


# --- masks -------------------------------------------------------------------------


def ball_mask(spec: GridSpec, center, radius: float) -> np.ndarray:
    return spec.distance_from(center) <= radius


def box_mask(spec: GridSpec, center, half_widths) -> np.ndarray:
    off = np.abs(spec.offsets_from(center))
    hw = np.asarray(half_widths, dtype=float).reshape((-1,) + (1,) * spec.dim)
    return np.all(off <= hw, axis=0)


def distance_to_set(spec: GridSpec, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Torus distance from every node to the node set ``mask``, and the unit
    direction pointing away from the nearest member (zero on the set)."""
    pts = spec.points().reshape(spec.dim, -1).T
    members = pts[np.asarray(mask, dtype=bool).ravel()]
    tree = cKDTree(members, boxsize=1.0 + 1e-12)
    dist, idx = tree.query(pts)
    diff = pts - members[idx]
    diff -= np.round(diff)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[:, None] > 0, diff / dist[:, None], 0.0)
    return dist.reshape(spec.sizes), unit.T.reshape((spec.dim,) + spec.sizes)


# --- region sets -----------------------------------------------------------------


LABEL_V, LABEL_OMEGA, LABEL_W = 0, 1, 2


@dataclass(frozen=True, eq=False)
class RegionSet:
    spec: GridSpec
    v: np.ndarray
    omega: np.ndarray
    w: np.ndarray
    margin: float
    inner_radius: float
    outer_radius: float
    dist: np.ndarray  # distance to K, the level-set coordinate of the cutoff
    direction: np.ndarray
    k_mask: np.ndarray
    descriptor: dict = field(default_factory=dict)
    swapped_roles: bool = False

    def __post_init__(self):
        for name in ("v", "omega", "w", "k_mask"):
            a = np.array(getattr(self, name), dtype=bool)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        total = self.v.astype(int) + self.omega.astype(int) + self.w.astype(int)
        if not np.all(total == 1):
            raise InvalidRegion("V, omega, W must partition the nodes")

    def labels(self) -> np.ndarray:
        lab = np.full(self.spec.sizes, LABEL_W, dtype=float)
        lab[self.v] = LABEL_V
        lab[self.omega] = LABEL_OMEGA
        return lab

    def swapped(self) -> "RegionSet":
        """Same annulus with the roles of the two plateaus exchanged."""
        return RegionSet(
            self.spec, self.w, self.omega, self.v, self.margin, self.inner_radius,
            self.outer_radius, self.dist, self.direction, self.k_mask,
            dict(self.descriptor), not self.swapped_roles,
        )

    def metadata(self) -> dict:
        return {
            "margin": self.margin,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "swapped": self.swapped_roles,
            "K": self.descriptor,
        }


def regions_from_distance(spec, dist, direction, k_mask, r_in, r_out, margin, descriptor=None) -> RegionSet:
    v = dist <= r_in
    w = dist >= r_out
    omega = ~(v | w)
    if not omega.any():
        raise RegionTooTight("correction annulus has no nodes")
    return RegionSet(spec, v, omega, w, margin, r_in, r_out, dist, direction, k_mask, descriptor or {})


def nested_regions(K: np.ndarray, U: np.ndarray, delta: float, spec: GridSpec, descriptor=None) -> RegionSet:
    """V = delta/3 dilation of K, omega = annulus out to delta (kept inside U), W = rest."""
    K = np.asarray(K, dtype=bool)
    U = np.asarray(U, dtype=bool)
    if K.shape != spec.sizes or U.shape != spec.sizes:
        raise InvalidRegion("masks must match the grid")
    if not K.any():
        raise InvalidRegion("K is empty")
    if np.any(K & ~U):
        raise InvalidRegion("U must contain K")
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    h = spec.min_spacing
    dist, direction = distance_to_set(spec, K)
    d_to_outside = float(np.min(dist[~U])) if (~U).any() else np.inf
    if d_to_outside <= 3 * h:
        raise RegionTooTight(f"U leaves only {d_to_outside:.4g} around K (need > {3 * h:.4g})")
    r_in = delta / 3.0
    r_out = min(delta, d_to_outside - h)
    if r_out - r_in < 3 * h:
        raise RegionTooTight(
            f"annulus width {r_out - r_in:.4g} below three grid cells ({3 * h:.4g})"
        )
    return regions_from_distance(spec, dist, direction, K, r_in, r_out, delta, descriptor)


def ball_regions(spec: GridSpec, center, k_radius: float, u_radius: float, delta: float) -> RegionSet:
    K = ball_mask(spec, center, k_radius)
    if not K.any():
        K = np.zeros(spec.sizes, dtype=bool)
        K[spec.nearest_node(center)] = True
    desc = {"kind": "ball", "center": [float(c) for c in center], "radius": k_radius, "u_radius": u_radius}
    return nested_regions(K, ball_mask(spec, center, u_radius), delta, spec, desc)


def annulus_regions(spec: GridSpec, center, r_in: float, r_out: float) -> RegionSet:
    """V = closed ball r_in, omega = open shell, W = outside the open ball r_out."""
    dist = spec.distance_from(center)
    off = spec.offsets_from(center)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(dist > 0, off / np.where(dist > 0, dist, 1.0), 0.0)
    k_mask = dist <= r_in
    desc = {"kind": "annulus", "center": [float(c) for c in center], "r_in": r_in, "r_out": r_out}
    return regions_from_distance(spec, dist, direction, k_mask, r_in, r_out, r_out, desc)


# --- cutoffs ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Cutoff:
    xi1: ScalarField
    xi2: ScalarField
    slope_bound: float  # analytic sup |grad xi1|
    gradient_xi1: np.ndarray

    def swapped(self) -> "Cutoff":
        return Cutoff(self.xi2, self.xi1, self.slope_bound, -self.gradient_xi1)


def partition_of_unity(rs: RegionSet, smoothness: int = 2) -> Cutoff:
    """xi1 = 1 on V, 0 on W, smoothstep of the distance to K across omega."""
    if smoothness < 2:
        raise InvalidParameter("smoothness must be >= 2")
    width = rs.outer_radius - rs.inner_radius
    t = (rs.dist - rs.inner_radius) / width
    rising = smoothstep(t, smoothness)
    slope = smoothstep(t, smoothness, deriv=1) / width
    if rs.swapped_roles:
        # V is the far side: xi1 rises towards W's old position
        xi1 = rising
        grad = slope * rs.direction
    else:
        xi1 = 1.0 - rising
        grad = -slope * rs.direction
    xi1 = np.where(rs.v, 1.0, np.where(rs.w, 0.0, xi1))
    xi2 = 1.0 - xi1
    grad = np.where(rs.omega[None], grad, 0.0)
    return Cutoff(
        ScalarField(rs.spec, xi1),
        ScalarField(rs.spec, xi2),
        smoothstep_slope_bound(smoothness) / width,
        grad,
    )


@dataclass(frozen=True, eq=False)
class Bump:
    """Radial bump rho with rho = 1 on B(x0, r/2) and 0 off B(x0, r)."""

    spec: GridSpec
    center: tuple[float, ...]
    radius: float
    smoothness: int
    field: ScalarField

    def profile(self, d: np.ndarray, deriv: int = 0) -> np.ndarray:
        half = self.radius / 2.0
        s = smoothstep((np.asarray(d) - half) / half, self.smoothness, deriv)
        if deriv == 0:
            return 1.0 - s
        return -s / half**deriv

    def gradient_at(self, offsets: np.ndarray) -> np.ndarray:
        """Analytic gradient at chart offsets ``y - x0`` (component axis first)."""
        d = np.sqrt(np.sum(offsets**2, axis=0))
        dprof = self.profile(d, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(d > 0, dprof * offsets / np.where(d > 0, d, 1.0), 0.0)

    def value_at(self, offsets: np.ndarray) -> np.ndarray:
        return self.profile(np.sqrt(np.sum(offsets**2, axis=0)))

    @property
    def slope_constant(self) -> float:
        """C_b with sup |grad rho| <= C_b / r."""
        return 2.0 * smoothstep_slope_bound(self.smoothness)

    @property
    def curvature_constant(self) -> float:
        """C_b with sup |D^2 rho| <= C_b / r^2 (radial part dominates for d >= r/2)."""
        k = self.smoothness
        return 4.0 * smoothstep_curvature_bound(k) + 4.0 * smoothstep_slope_bound(k)


def radial_bump(spec: GridSpec, x0, r: float, smoothness: int = 2) -> Bump:
    if r >= 0.25:
        raise InvalidParameter(f"bump radius {r} does not fit in a torus chart (< 0.25)")
    if r < 4 * spec.min_spacing:
        raise GridTooCoarse(f"bump radius {r} below 4h = {4 * spec.min_spacing}")
    x0 = tuple(float(c) % 1.0 for c in x0)
    d = spec.distance_from(x0)
    half = r / 2.0
    rho = 1.0 - smoothstep((d - half) / half, smoothness)
    rho = np.where(d <= half, 1.0, np.where(d >= r, 0.0, rho))
    return Bump(spec, x0, r, smoothness, ScalarField(spec, rho))
