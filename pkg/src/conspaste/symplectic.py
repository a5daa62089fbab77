"""Local pasting of area-preserving planar maps through generating functions.

Convention (type 1): a twist map ``(x, y) -> (X, Y)`` is encoded by
``S(x, X)`` with ``y = -dS/dx`` and ``Y = dS/dX``.  Any ``S`` with
``d2S/dxdX != 0`` defines an area-preserving map, so blending two generating
functions with a cutoff in ``(x, X)`` pastes two maps without leaving the
symplectic class.

Coordinates are local to a patch ``[-delta, delta]^2`` around a chart centre.
``S`` is stored as a tensor Chebyshev series on that square, which makes its
derivatives exact polynomial operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import InvalidParameter, NoTwist, TwistLost
from .regions import smoothstep

TWIST_FLOOR = 1e-6
MAP_TWIST_MIN = 1e-3
AREA_TOL = 1e-9
NEWTON_TOL = 1e-12
DEFAULT_DEGREE = 24
BLEND_SMOOTHNESS = 3


@dataclass(frozen=True)
class LocalMap:
    """A planar map given as a vectorised callable on a square patch."""

    fn: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    delta: float
    center: tuple[float, float] = (0.0, 0.0)

    def __call__(self, x, y):
        X, Y = self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(X, dtype=float), np.asarray(Y, dtype=float)


@dataclass(frozen=True)
class MapPatch:
    """Map samples ``(X, Y)`` on a uniform ``n x n`` grid of the patch; ``valid`` marks solved nodes."""

    center: tuple[float, float]
    delta: float
    values: np.ndarray  # (2, n, n)
    valid: np.ndarray  # (n, n) bool

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return patch_nodes(self.delta, self.n)

    def header(self) -> dict:
        return {"center": [float(c) for c in self.center], "delta": float(self.delta)}


def patch_nodes(delta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.linspace(-delta, delta, n)
    return np.meshgrid(t, t, indexing="ij")


def _cheb_points(n: int) -> np.ndarray:
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)[::-1]


def _fit2d(values: np.ndarray) -> np.ndarray:
    """Tensor Chebyshev interpolation coefficients from samples at first-kind nodes."""
    n = values.shape[0]
    V = C.chebvander(_cheb_points(n), n - 1)
    Vinv = np.linalg.inv(V)
    return Vinv @ values @ Vinv.T


# --- numerical derivatives of callables ---------------------------------------------

_STENCIL = (np.array([1.0, -8.0, 8.0, -1.0]) / 12.0, np.array([-2.0, -1.0, 1.0, 2.0]))


def _d(fn, args, which: int, step: float):
    w, offs = _STENCIL
    out = 0.0
    for wk, ok in zip(w, offs):
        a = list(args)
        a[which] = a[which] + ok * step
        out = out + wk * np.asarray(fn(*a))
    return out / step


def fd_jacobian(mapping, x, y, step: float = 2e-5) -> np.ndarray:
    """Fourth-order central-difference Jacobian ``(2, 2, ...)`` of ``(x, y) -> (X, Y)``."""
    dx = _d(lambda a, b: np.stack(mapping(a, b)), (x, y), 0, step)
    dy = _d(lambda a, b: np.stack(mapping(a, b)), (x, y), 1, step)
    return np.stack([dx, dy], axis=1)


def fd_jacobian_det(mapping, x, y, step: float = 2e-5) -> np.ndarray:
    J = fd_jacobian(mapping, x, y, step)
    return J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]


# --- generating functions -----------------------------------------------------------


class GeneratingFunction:
    """Type-1 generating function on ``[-delta, delta]^2`` in ``(x, X)``.

    Subclasses provide ``value`` and the derivatives ``d1`` (in x), ``d2``
    (in X) and ``d12``.  Construction checks the twist bound on a sample
    grid; a vanishing twist is rejected with :class:`NoTwist`.
    """

    delta: float

    def _check_twist(self, error=NoTwist):
        bound = self.twist_bound()
        if not bound > TWIST_FLOOR:
            raise error(f"twist bound {bound:.3e} is not positive on the patch")

    def twist_bound(self, n: int = 33) -> float:
        """``min |d12 S|`` on a sample grid, or 0 if ``d12 S`` changes sign."""
        x, X = patch_nodes(self.delta, n)
        t = self.d12(x, X)
        if np.min(t) < 0 < np.max(t):
            return 0.0
        return float(np.min(np.abs(t)))

    def value(self, x, X):
        raise NotImplementedError

    def d1(self, x, X):
        raise NotImplementedError

    def d2(self, x, X):
        raise NotImplementedError

    def d12(self, x, X):
        raise NotImplementedError


class ChebyshevGenerating(GeneratingFunction):
    def __init__(self, coef: np.ndarray, delta: float):
        if delta <= 0:
            raise InvalidParameter("patch radius must be positive")
        self.coef = np.asarray(coef, dtype=float)
        self.delta = float(delta)
        s = 1.0 / self.delta
        self._c1 = C.chebder(self.coef, 1, scl=s, axis=0)
        self._c2 = C.chebder(self.coef, 1, scl=s, axis=1)
        self._c12 = C.chebder(self._c1, 1, scl=s, axis=1)
        self._check_twist()

    @classmethod
    def from_function(cls, fn, delta: float, degree: int = DEFAULT_DEGREE) -> "ChebyshevGenerating":
        """Interpolate ``fn(x, X)`` at tensor Chebyshev nodes (exact for polynomials up to ``degree``)."""
        u = _cheb_points(degree + 1) * delta
        x, X = np.meshgrid(u, u, indexing="ij")
        return cls(_fit2d(np.asarray(fn(x, X), dtype=float)), delta)

    def _eval(self, c, x, X):
        return C.chebval2d(np.asarray(x) / self.delta, np.asarray(X) / self.delta, c)

    def value(self, x, X):
        return self._eval(self.coef, x, X)

    def d1(self, x, X):
        return self._eval(self._c1, x, X)

    def d2(self, x, X):
        return self._eval(self._c2, x, X)

    def d12(self, x, X):
        return self._eval(self._c12, x, X)


def blend_weight(z: np.ndarray, deriv: int = 0) -> np.ndarray:
    """``lam(z)``: 1 for ``z <= 1/2``, 0 for ``z >= 1``, smoothstep in between."""
    s = smoothstep(2.0 * np.asarray(z, dtype=float) - 1.0, BLEND_SMOOTHNESS, deriv)
    return (1.0 - s) if deriv == 0 else -s * 2.0**deriv


class BlendedGenerating(GeneratingFunction):
    """``lam(2|(x, X)|/delta) S1 + (1 - lam) S0``; equal to ``S1`` for ``|(x, X)| <= delta/4`` and ``S0`` beyond ``delta/2``."""

    def __init__(self, S0: GeneratingFunction, S1: GeneratingFunction, delta: float):
        if abs(S0.delta - S1.delta) > 1e-15:
            raise InvalidParameter("generating functions live on different patches")
        if not 0 < delta <= 2 * S0.delta:
            raise InvalidParameter(f"blend radius {delta} does not fit the patch")
        for S in (S0, S1):
            if abs(float(S.value(0.0, 0.0))) > 1e-12:
                raise InvalidParameter("normalise generating functions to S(0, 0) = 0 before blending")
        self.S0, self.S1 = S0, S1
        self.delta = S0.delta
        self.blend_radius = float(delta)
        self._check_twist(TwistLost)

    def _weights(self, x, X):
        x = np.asarray(x, dtype=float)
        X = np.asarray(X, dtype=float)
        rad = np.hypot(x, X)
        k = 2.0 / self.blend_radius
        z = k * rad
        lam = blend_weight(z)
        l1 = blend_weight(z, 1)
        l2 = blend_weight(z, 2)
        safe = np.where(rad > 0, rad, 1.0)
        zx, zX = k * x / safe, k * X / safe
        zxX = -k * x * X / safe**3
        # z is not smooth at the origin, but lam is constant there
        lam_x = np.where(rad > 0, l1 * zx, 0.0)
        lam_X = np.where(rad > 0, l1 * zX, 0.0)
        lam_xX = np.where(rad > 0, l2 * zx * zX + l1 * zxX, 0.0)
        return lam, lam_x, lam_X, lam_xX

    def value(self, x, X):
        lam = self._weights(x, X)[0]
        return lam * self.S1.value(x, X) + (1.0 - lam) * self.S0.value(x, X)

    def d1(self, x, X):
        lam, lx, _, _ = self._weights(x, X)
        diff = self.S1.value(x, X) - self.S0.value(x, X)
        return lam * self.S1.d1(x, X) + (1.0 - lam) * self.S0.d1(x, X) + lx * diff

    def d2(self, x, X):
        lam, _, lX, _ = self._weights(x, X)
        diff = self.S1.value(x, X) - self.S0.value(x, X)
        return lam * self.S1.d2(x, X) + (1.0 - lam) * self.S0.d2(x, X) + lX * diff

    def d12(self, x, X):
        lam, lx, lX, lxX = self._weights(x, X)
        diff = self.S1.value(x, X) - self.S0.value(x, X)
        d1 = self.S1.d1(x, X) - self.S0.d1(x, X)
        d2 = self.S1.d2(x, X) - self.S0.d2(x, X)
        return (
            lam * self.S1.d12(x, X) + (1.0 - lam) * self.S0.d12(x, X)
            + lxX * diff + lx * d2 + lX * d1
        )


def blend_generating(S0: GeneratingFunction, S1: GeneratingFunction, delta: float) -> GeneratingFunction:
    return BlendedGenerating(S0, S1, delta)


# --- map <-> generating function ------------------------------------------------------


def _solve_y(f: LocalMap, x: np.ndarray, X: np.ndarray, max_steps: int = 50) -> np.ndarray:
    """Solve ``X(x, y) = X`` for y, vectorised 1D Newton."""
    y = np.zeros_like(x)
    step = 1e-4 * f.delta
    for _ in range(max_steps):
        r = f(x, y)[0] - X
        if np.max(np.abs(r)) <= 1e-15:
            break
        dXdy = _d(lambda a, b: f(a, b)[0], (x, y), 1, step)
        y = y - r / dXdy
    return y


def generating_from_map(f: LocalMap, degree: int = DEFAULT_DEGREE, check_n: int = 21) -> ChebyshevGenerating:
    """Type-1 generating function of a twist map, normalised to ``S(0, 0) = 0``."""
    delta = f.delta
    x, y = patch_nodes(delta, check_n)
    twist = np.abs(_d(lambda a, b: f(a, b)[0], (x, y), 1, 1e-4 * delta))
    if np.min(twist) < MAP_TWIST_MIN:
        raise NoTwist(f"|dX/dy| drops to {np.min(twist):.3e} on the patch")
    area = np.abs(fd_jacobian_det(f, x, y, 1e-4 * delta) - 1.0)
    if np.max(area) > AREA_TOL:
        raise InvalidParameter(f"map is not area preserving on the patch (|det - 1| = {np.max(area):.2e})")

    u = _cheb_points(degree + 1) * delta
    xs, Xs = np.meshgrid(u, u, indexing="ij")
    ys = _solve_y(f, xs, Xs)
    Ys = f(xs, ys)[1]
    cy = _fit2d(-ys)  # dS/dx
    cY = _fit2d(Ys)  # dS/dX

    # S(x, X) = int_0^x -y(s, X) ds + int_0^X Y(0, t) dt
    S = C.chebint(cy, 1, lbnd=0, scl=delta, axis=0)
    y_axis = C.chebval(0.0, cY)  # coefficients in X of Y(0, X)
    edge = C.chebint(y_axis, 1, lbnd=0, scl=delta)
    out = np.zeros((S.shape[0], max(S.shape[1], edge.size)))
    out[:, : S.shape[1]] = S
    out[0, : edge.size] += edge
    return ChebyshevGenerating(out, delta)


def map_from_generating(
    S: GeneratingFunction,
    x: np.ndarray,
    y: np.ndarray,
    seed: np.ndarray | None = None,
    max_steps: int = 60,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(X, Y, valid)`` at points ``(x, y)``: Newton on ``-d1 S(x, X) = y``, then ``Y = d2 S``.

    Newton runs to rounding level (proposed updates below ``1e-15 delta``) so that
    finite-difference Jacobians of the result are not polluted by the
    stopping tolerance.  ``valid`` is False where Newton failed or left the patch.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.array(x + y if seed is None else seed, dtype=float)
    active = np.ones(x.shape, dtype=bool)
    floor = 1e-15 * S.delta
    for _ in range(max_steps):
        xa, Xa = x[active], X[active]
        dX = (-S.d1(xa, Xa) - y[active]) / S.d12(xa, Xa)
        # a step at the floor is dropped, not applied: a converged iterate is then a
        # fixed point, and two generating functions that agree bitwise near it agree on X
        still = ~(np.abs(dX) <= floor)
        X[active] = np.where(still, Xa + dX, Xa)
        active[active] = still
        if not active.any():
            break
    resid = np.abs(-S.d1(x, X) - y)
    valid = np.isfinite(X) & (resid <= NEWTON_TOL) & (np.abs(X) <= S.delta)
    Y = np.where(valid, S.d2(x, np.where(valid, X, 0.0)), np.nan)
    return np.where(valid, X, np.nan), Y, valid


def patch_from_generating(S: GeneratingFunction, n: int, center=(0.0, 0.0)) -> MapPatch:
    x, y = patch_nodes(S.delta, n)
    X, Y, valid = map_from_generating(S, x, y)
    return MapPatch(tuple(center), S.delta, np.stack([X, Y]), valid)


def generating_map(S: GeneratingFunction) -> Callable:
    """The map of ``S`` as a callable, for finite-difference checks."""

    def fn(x, y):
        X, Y, _ = map_from_generating(S, x, y)
        return X, Y

    return fn


def paste_along_orbit(outer: list[LocalMap], inner: list[LocalMap], deltas: list[float]) -> list[GeneratingFunction]:
    """Blend independently at each orbit chart: ``inner`` near the point, ``outer`` away from it."""
    if not len(outer) == len(inner) == len(deltas):
        raise InvalidParameter("one inner map, outer map and radius per orbit point")
    return [
        blend_generating(generating_from_map(o), generating_from_map(i), d)
        for o, i, d in zip(outer, inner, deltas)
    ]


# --- examples -------------------------------------------------------------------------


def standard_map(k: float, delta: float) -> LocalMap:
    """``Y = y + k sin x, X = x + Y`` around its fixed point at the origin."""

    def fn(x, y):
        Y = y + k * np.sin(x)
        return x + Y, Y

    return LocalMap(fn, delta)


def linear_map(matrix, delta: float) -> LocalMap:
    A = np.asarray(matrix, dtype=float)

    def fn(x, y):
        return A[0, 0] * x + A[0, 1] * y, A[1, 0] * x + A[1, 1] * y

    return LocalMap(fn, delta)


def standard_map_linearisation(k: float, delta: float) -> LocalMap:
    return linear_map([[1.0 + k, 1.0], [k, 1.0]], delta)
