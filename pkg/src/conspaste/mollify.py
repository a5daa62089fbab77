"""Friedrichs mollification on the torus.

Convolution is done in frequency space, so it is a Fourier multiplier like the
spectral derivative and the two commute to rounding:
``divergence(mollify(V)) == mollify(divergence(V))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse, KernelTooWide, SpecMismatch
from .grid import GridSpec, ScalarField


def bump_profile(s: np.ndarray) -> np.ndarray:
    """exp(-1 / (1 - |s|^2)) inside the unit ball, exactly 0 outside."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class MollifierKernel:
    eps: float
    kernel: ScalarField  # centred at the origin node

    @property
    def spec(self) -> GridSpec:
        return self.kernel.spec

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.kernel.values))

    def symbol(self) -> np.ndarray:
        # the sampled kernel is even under index negation, so its DFT is real
        axes = tuple(range(self.spec.dim))
        return np.real(np.fft.fftn(self.kernel.values, axes=axes)) * self.spec.cell_volume


def kernel(eps: float, spec: GridSpec) -> MollifierKernel:
    h = spec.min_spacing
    if eps < 4 * h:
        raise GridTooCoarse(f"eps = {eps} below 4h = {4 * h}")
    if eps >= 0.25:
        raise KernelTooWide(f"eps = {eps} must be < 0.25")
    d = spec.distance_from(np.zeros(spec.dim))
    raw = bump_profile(d / eps)
    # renormalise to unit discrete mass instead of using the continuum constant
    raw /= np.sum(raw) * spec.cell_volume
    return MollifierKernel(eps, ScalarField(spec, raw))


def mollify_field(F, k: MollifierKernel):
    if F.spec != k.spec:
        raise SpecMismatch("field and kernel live on different grids")
    spec = F.spec
    axes = tuple(range(-spec.dim, 0))
    symbol = k.symbol()
    out = np.real(np.fft.ifftn(np.fft.fftn(F.values, axes=axes) * symbol, axes=axes))
    return type(F)(spec, out)


def mollify(F, eps: float):
    """Convenience wrapper: build the kernel for ``F``'s grid and convolve."""
    return mollify_field(F, kernel(eps, F.spec))

