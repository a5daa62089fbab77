"""Uniform periodic grids on the flat torus [0, 1)^n and spectral calculus.

Fields are stored as numpy arrays with axis 0 along x, axis 1 along y (and
axis 2 along z in 3D), i.e. ``indexing="ij"``.  Vector fields carry the
component index first: ``values.shape == (dim, *sizes)``.

Derivatives are Fourier multipliers.  The Nyquist wavenumber of an even-sized
axis is dropped from first derivatives so that real fields stay real, and the
Laplacian is *defined* as divergence of gradient so that the identity
``divergence(gradient(s)) == laplacian(s)`` holds to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import InvalidField, InvalidParameter, InvalidRegion, SpecMismatch

MIN_SIZE = 8
HOLDER_NEIGHBOUR_RADIUS = 8
HOLDER_LONG_RANGE_PAIRS = 10_000
HOLDER_SEED = 0


@dataclass(frozen=True)
class GridSpec:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) not in (2, 3):
            raise InvalidParameter(f"grid must be 2D or 3D, got {len(sizes)} axes")
        if any(s < MIN_SIZE for s in sizes):
            raise InvalidParameter(f"every axis needs at least {MIN_SIZE} nodes: {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def square(cls, n: int, dim: int = 2) -> "GridSpec":
        return cls((n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / s for s in self.sizes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates as broadcast-ready meshgrid arrays."""
        axes = [np.arange(n) / n for n in self.sizes]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates stacked as ``(dim, *sizes)``."""
        return np.stack(self.coords())

    def nearest_node(self, x) -> tuple[int, ...]:
        x = np.asarray(x, dtype=float) % 1.0
        return tuple(int(round(xi * n)) % n for xi, n in zip(x, self.sizes))

    def offsets_from(self, x0) -> np.ndarray:
        """Minimum-image displacement ``y - x0`` for every node ``y``."""
        pts = self.points()
        x0 = np.asarray(x0, dtype=float).reshape((-1,) + (1,) * self.dim)
        d = pts - x0
        return d - np.round(d)

    def distance_from(self, x0) -> np.ndarray:
        return np.sqrt(np.sum(self.offsets_from(x0) ** 2, axis=0))

    @cached_property
    def _wavenumbers(self) -> tuple[np.ndarray, ...]:
        ks = []
        for axis, n in enumerate(self.sizes):
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
            if n % 2 == 0:
                k[n // 2] = 0.0
            shape = [1] * self.dim
            shape[axis] = n
            ks.append(k.reshape(shape))
        return tuple(ks)

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Derivative symbols per axis (Nyquist zeroed), broadcastable."""
        return self._wavenumbers

    def laplacian_symbol(self) -> np.ndarray:
        return -sum(k**2 for k in self._wavenumbers)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.spec.sizes:
            raise InvalidField(f"scalar field shape {v.shape} != grid {self.spec.sizes}")
        if not np.all(np.isfinite(v)):
            raise InvalidField("scalar field has non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    kind = "scalar"

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "ScalarField":
        return cls(spec, np.broadcast_to(fn(*spec.coords()), spec.sizes))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "ScalarField":
        return cls(spec, np.full(spec.sizes, float(c)))

    def __add__(self, other):
        return _combine(self, other, np.add)

    def __sub__(self, other):
        return _combine(self, other, np.subtract)

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            return _combine(self, c, np.multiply)
        return ScalarField(self.spec, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.spec, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    spec: GridSpec
    values: np.ndarray

    kind = "vector"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (self.spec.dim,) + self.spec.sizes
        if v.shape != expected:
            raise InvalidField(f"vector field shape {v.shape} != {expected}")
        if not np.all(np.isfinite(v)):
            raise InvalidField("vector field has non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "VectorField":
        comps = fn(*spec.coords())
        return cls(spec, np.stack([np.broadcast_to(c, spec.sizes) for c in comps]))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorField":
        return cls(spec, np.zeros((spec.dim,) + spec.sizes))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.spec, self.values[i])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))

    def __add__(self, other):
        return _combine(self, other, np.add)

    def __sub__(self, other):
        return _combine(self, other, np.subtract)

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            _check_same_spec(self, c)
            return VectorField(self.spec, self.values * c.values)
        return VectorField(self.spec, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.spec, -self.values)


Field = Union[ScalarField, VectorField]


def _check_same_spec(a, b):
    if a.spec != b.spec:
        raise SpecMismatch(f"grids differ: {a.spec.sizes} vs {b.spec.sizes}")


def _combine(a, b, op):
    if type(a) is not type(b):
        raise SpecMismatch(f"cannot combine {a.kind} and {getattr(b, 'kind', type(b))}")
    _check_same_spec(a, b)
    return type(a)(a.spec, op(a.values, b.values))


@dataclass(frozen=True, eq=False)
class GridMap:
    """Torus self-map ``x -> x + displacement(x) (mod 1)``."""

    displacement: VectorField
    diffeo: bool = False

    kind = "map"

    def __post_init__(self):
        if self.diffeo:
            _, det = jacobian(self)
            if np.min(det.values) <= 0.0:
                from .errors import NotDiffeo

                raise NotDiffeo("map is not orientation preserving at every node")

    @property
    def spec(self) -> GridSpec:
        return self.displacement.spec

    @property
    def values(self) -> np.ndarray:
        return self.displacement.values

    @classmethod
    def identity(cls, spec: GridSpec) -> "GridMap":
        return cls(VectorField.zeros(spec))

    @classmethod
    def from_function(cls, spec: GridSpec, fn, diffeo: bool = False) -> "GridMap":
        """Build from a function returning the periodic displacement."""
        return cls(VectorField.from_function(spec, fn), diffeo=diffeo)

    def image_points(self) -> np.ndarray:
        return (self.spec.points() + self.displacement.values) % 1.0


# --- spectral calculus ---------------------------------------------------------


def _require_finite(a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise InvalidField("non-finite input")


def spectral_derivative(a: np.ndarray, spec: GridSpec, axis: int) -> np.ndarray:
    _require_finite(a)
    k = spec.wavenumbers()[axis]
    axes = tuple(range(-spec.dim, 0))
    return np.real(np.fft.ifftn(1j * k * np.fft.fftn(a, axes=axes), axes=axes))


def divergence(v: VectorField) -> ScalarField:
    spec = v.spec
    axes = tuple(range(spec.dim))
    ks = spec.wavenumbers()
    acc = np.zeros(spec.sizes, dtype=complex)
    for i in range(spec.dim):
        acc += 1j * ks[i] * np.fft.fftn(v.values[i], axes=axes)
    return ScalarField(spec, np.real(np.fft.ifftn(acc, axes=axes)))


def gradient(s: ScalarField) -> VectorField:
    spec = s.spec
    axes = tuple(range(spec.dim))
    s_hat = np.fft.fftn(s.values, axes=axes)
    comps = [np.real(np.fft.ifftn(1j * k * s_hat, axes=axes)) for k in spec.wavenumbers()]
    return VectorField(spec, np.stack(comps))


def laplacian(s: ScalarField) -> ScalarField:
    spec = s.spec
    axes = tuple(range(spec.dim))
    s_hat = np.fft.fftn(s.values, axes=axes)
    return ScalarField(spec, np.real(np.fft.ifftn(spec.laplacian_symbol() * s_hat, axes=axes)))


def derivative_matrix(f: Field) -> np.ndarray:
    """Spectral derivative: ``(dim, *sizes)`` for scalars, ``(dim, dim, *sizes)`` for vectors.

    For vectors ``out[i, j] = d f_i / d x_j``.
    """
    spec = f.spec
    if isinstance(f, ScalarField):
        return gradient(f).values
    return np.stack([gradient(f.component(i)).values for i in range(spec.dim)])


def jacobian(m: GridMap) -> tuple[np.ndarray, ScalarField]:
    """Jacobian of ``x + displacement`` and its determinant at every node."""
    spec = m.spec
    J = derivative_matrix(m.displacement)
    for i in range(spec.dim):
        J[i, i] += 1.0
    return J, ScalarField(spec, det_field(J))


def det_field(J: np.ndarray) -> np.ndarray:
    """Determinant of a ``(d, d, *sizes)`` matrix field."""
    return np.linalg.det(np.moveaxis(J, (0, 1), (-2, -1)))


# --- norms and integration -----------------------------------------------------


@dataclass(frozen=True)
class NormReport:
    c0: float
    c1: float
    holder: float
    alpha: float
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"c0": self.c0, "c1": self.c1, "holder": self.holder, "alpha": self.alpha}


def _pointwise_abs(f: Field) -> np.ndarray:
    if isinstance(f, ScalarField):
        return np.abs(f.values)
    return f.magnitude()


def _derivative_sup(D: np.ndarray, spec: GridSpec) -> float:
    if D.ndim == spec.dim + 1:
        return float(np.max(np.sqrt(np.sum(D**2, axis=0))))
    M = np.moveaxis(D, (0, 1), (-2, -1)).reshape(-1, spec.dim, spec.dim)
    return float(np.max(np.linalg.norm(M, ord=2, axis=(1, 2))))


def _torus_distance(offset: np.ndarray, spec: GridSpec) -> np.ndarray:
    frac = offset / np.asarray(spec.sizes, dtype=float)
    frac = frac - np.round(frac)
    return np.sqrt(np.sum(frac**2, axis=-1))


def _neighbour_offsets(dim: int, radius: int) -> np.ndarray:
    rng = range(-radius, radius + 1)
    offs = np.array(np.meshgrid(*[rng] * dim, indexing="ij")).reshape(dim, -1).T
    l1 = np.abs(offs).sum(axis=1)
    keep = (l1 >= 1) & (l1 <= radius)
    offs = offs[keep]
    # one representative of each +/- pair
    first_nonzero = np.array([o[np.nonzero(o)[0][0]] for o in offs])
    return offs[first_nonzero > 0]


def holder_seminorm(f: Field, alpha: float) -> float:
    """Sampled Holder-alpha seminorm in the flat torus metric.

    Pairs: every node with all nodes within grid graph distance 8, plus
    ``HOLDER_LONG_RANGE_PAIRS`` seeded random pairs.  This is a lower bound
    of the true supremum, reproducible across runs.
    """
    spec = f.spec
    vals = f.values if isinstance(f, VectorField) else f.values[None]
    best = 0.0
    for off in _neighbour_offsets(spec.dim, HOLDER_NEIGHBOUR_RADIUS):
        dist = float(_torus_distance(off.astype(float), spec))
        if dist == 0.0:
            continue
        shifted = np.roll(vals, shift=tuple(-off), axis=tuple(range(1, spec.dim + 1)))
        diff = np.sqrt(np.sum((vals - shifted) ** 2, axis=0))
        best = max(best, float(np.max(diff)) / dist**alpha)
    rng = np.random.default_rng(HOLDER_SEED)
    flat = vals.reshape(vals.shape[0], -1)
    n = flat.shape[1]
    i = rng.integers(0, n, HOLDER_LONG_RANGE_PAIRS)
    j = rng.integers(0, n, HOLDER_LONG_RANGE_PAIRS)
    idx_i = np.array(np.unravel_index(i, spec.sizes)).T
    idx_j = np.array(np.unravel_index(j, spec.sizes)).T
    dist = _torus_distance((idx_i - idx_j).astype(float), spec)
    ok = dist > 0
    if np.any(ok):
        diff = np.sqrt(np.sum((flat[:, i] - flat[:, j]) ** 2, axis=0))
        best = max(best, float(np.max(diff[ok] / dist[ok] ** alpha)))
    return best


def norms(f: Field, alpha: float = 0.5, derivative: np.ndarray | None = None) -> NormReport:
    """C0, C1 and sampled Holder-alpha norms.

    ``derivative`` overrides the spectral derivative; pass a locally computed
    one for fields that are only piecewise smooth (zero extensions).
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    spec = f.spec
    c0 = float(np.max(_pointwise_abs(f)))
    D = derivative_matrix(f) if derivative is None else derivative
    c1 = max(c0, _derivative_sup(D, spec))
    return NormReport(c0=c0, c1=c1, holder=holder_seminorm(f, alpha), alpha=alpha)


def integrate(s: ScalarField, mask: np.ndarray | None = None) -> float:
    if mask is None:
        return float(np.sum(s.values) * s.spec.cell_volume)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != s.spec.sizes:
        raise SpecMismatch("mask shape does not match grid")
    if not mask.any():
        raise InvalidRegion("integration mask is empty")
    return float(np.sum(s.values[mask]) * s.spec.cell_volume)


def trig_eval(values: np.ndarray, spec: GridSpec, points: np.ndarray, deriv_axis: int | None = None) -> np.ndarray:
    """Evaluate the trigonometric interpolant of nodal ``values`` at torus points.

    ``points`` has shape ``(dim, M)``.  The Nyquist mode of an even axis is
    taken as a cosine, so the interpolant is real and matches the nodes.
    With ``deriv_axis`` the spectral derivative along that axis is evaluated.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coef = np.fft.fftn(values) / spec.n_nodes
    if deriv_axis is not None:
        coef = coef * (1j * spec.wavenumbers()[deriv_axis])
    factors = []
    for ax, n in enumerate(spec.sizes):
        k = np.fft.fftfreq(n, d=1.0 / n)
        E = np.exp(2j * np.pi * np.outer(k, points[ax]))
        if n % 2 == 0:
            E[n // 2] = np.cos(np.pi * n * points[ax])
        factors.append(E)
    letters = "abc"[: spec.dim]
    expr = letters + "," + ",".join(f"{c}m" for c in letters) + "->m"
    return np.real(np.einsum(expr, coef, *factors))
