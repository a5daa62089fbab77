"""Named, seeded constructions of fields and maps for scenarios and tests."""

from __future__ import annotations

import numpy as np

from . import fd
from .errors import InvalidParameter
from .grid import GridMap, GridSpec, ScalarField, VectorField, gradient

TWO_PI = 2.0 * np.pi


def cellular_flow(spec: GridSpec, amplitude: float = 1.0) -> VectorField:
    """(sin 2 pi y, sin 2 pi x): each component independent of its own axis,
    hence divergence-free for every difference or spectral divergence."""
    if spec.dim != 2:
        raise InvalidParameter("cellular_flow is 2D")
    return VectorField.from_function(
        spec, lambda x, y: (amplitude * np.sin(TWO_PI * y), amplitude * np.sin(TWO_PI * x))
    )


def random_stream_function(spec: GridSpec, seed: int, max_freq: int = 3) -> ScalarField:
    """Seeded band-limited trigonometric polynomial with unit sup-scale coefficients."""
    rng = np.random.default_rng(seed)
    coords = spec.coords()
    vals = np.zeros(spec.sizes)
    ks = np.array(np.meshgrid(*[np.arange(-max_freq, max_freq + 1)] * spec.dim, indexing="ij")).reshape(spec.dim, -1).T
    for k in ks:
        if not k.any():
            continue
        phase = TWO_PI * sum(ki * xi for ki, xi in zip(k, coords))
        a, b = rng.standard_normal(2) / (1.0 + float(k @ k))
        vals += a * np.cos(phase) + b * np.sin(phase)
    return ScalarField(spec, vals)


def spectral_curl(psi: ScalarField) -> VectorField:
    """2D rotated gradient (d psi/dy, -d psi/dx): spectrally divergence-free."""
    g = gradient(psi).values
    return VectorField(psi.spec, np.stack([g[1], -g[0]]))


def _unit_c0(F: VectorField) -> VectorField:
    return F * (1.0 / float(np.max(F.magnitude())))


def random_divfree_spectral(spec: GridSpec, seed: int, max_freq: int = 3) -> VectorField:
    """Seeded spectrally divergence-free field with sup |F| = 1."""
    return _unit_c0(spectral_curl(random_stream_function(spec, seed, max_freq)))


def random_divfree_discrete(spec: GridSpec, seed: int, max_freq: int = 3) -> VectorField:
    """Seeded field with zero forward-difference divergence and sup |F| = 1."""
    return _unit_c0(fd.curl_fwd(random_stream_function(spec, seed, max_freq)))


def localized_perturbation(spec: GridSpec, center, radius: float, seed: int = 0) -> VectorField:
    """Forward-curl of a smooth compactly supported stream function, normalised to C0 = 1."""
    rng = np.random.default_rng(seed)
    d = spec.distance_from(center)
    off = spec.offsets_from(center)
    t = np.clip(d / radius, 0.0, 1.0)
    envelope = np.where(t < 1.0, np.cos(0.5 * np.pi * t) ** 4, 0.0)
    kx, ky = rng.uniform(1.0, 3.0, 2)
    psi = envelope * np.cos(TWO_PI * (kx * off[0] + ky * off[1]) + rng.uniform(0, TWO_PI))
    return _unit_c0(fd.curl_fwd(ScalarField(spec, psi)))


# --- maps --------------------------------------------------------------------------


def shear_map(spec: GridSpec, a: float, axis: int = 0) -> GridMap:
    """x -> x + a sin(2 pi y) (axis=0) or y -> y + a sin(2 pi x) (axis=1)."""

    def disp(x, y):
        if axis == 0:
            return a * np.sin(TWO_PI * y), np.zeros_like(x)
        return np.zeros_like(x), a * np.sin(TWO_PI * x)

    return GridMap.from_function(spec, disp)


def two_shear_displacement(a: float, b: float):
    """Displacement of (x, y) -> (x', y + b sin 2 pi x') with x' = x + a sin 2 pi y.

    A composition of two area-preserving shears (standard-map like).
    """

    def disp(x, y):
        xp = x + a * np.sin(TWO_PI * y)
        return xp - x, b * np.sin(TWO_PI * xp)

    return disp


def two_shear_map(spec: GridSpec, a: float = 0.02, b: float = 0.02) -> GridMap:
    return GridMap.from_function(spec, two_shear_displacement(a, b), diffeo=True)
