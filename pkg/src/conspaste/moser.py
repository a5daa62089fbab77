"""Prescribed Jacobian equation ``g(u(x)) det Du(x) = lam f(x)``.

Written ``u = id + v``, the equation becomes ``div v = F - 1 - Q(Dv)`` with
``F = lam f / (g o u)`` and ``Q(z) = det(I + z) - 1 - tr(z)``.  The fixed-point
iteration ``v <- L(F - 1 - Q(Dv))`` uses a right inverse ``L`` of the
divergence:

* on the whole torus, the spectral gradient solve; spectral derivatives
  make ``sum Q(Dv)`` vanish identically, so the datum is always compatible;
* on an annulus, the zero-boundary solver with forward differences and the
  divergence-form Jacobian of :func:`conspaste.fd.q_fwd`; ``sum Q`` again
  vanishes exactly.  ``lam`` is re-normalised every sweep so the datum stays
  compatible; it only moves when ``g`` is not constant.

``g o u`` is refreshed every sweep (frozen-coefficient outer loop) through
periodic cubic spline interpolation.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import fd
from .divsolve import solve_divergence_torus, zero_boundary_solver
from .errors import DegenerateMap, InvalidField, InvalidParameter, NoContraction, SpecMismatch
from .grid import GridMap, GridSpec, ScalarField, VectorField, derivative_matrix, det_field
from .regions import RegionSet

log = logging.getLogger(__name__)

CONTRACTION_REGIME = 0.25
STALL_FACTOR = 1.2
STALL_WINDOW = 3
INJECTIVITY_MARGIN = 0.25


def q_of(z: np.ndarray) -> np.ndarray:
    """``det(I + z) - 1 - tr z`` for a matrix or a ``(d, d, ...)`` matrix field.

    Evaluated as its degree >= 2 monomials, avoiding the cancellation in
    ``det(I + z) - 1``.
    """
    z = np.asarray(z, dtype=float)
    d = z.shape[0]
    if z.shape[1] != d or d not in (2, 3):
        raise InvalidParameter(f"Q needs 2x2 or 3x3 matrices, got {z.shape[:2]}")
    if d == 2:
        return z[0, 0] * z[1, 1] - z[0, 1] * z[1, 0]
    minors = sum(
        z[i, i] * z[j, j] - z[i, j] * z[j, i] for i, j in ((0, 1), (0, 2), (1, 2))
    )
    det3 = (
        z[0, 0] * (z[1, 1] * z[2, 2] - z[1, 2] * z[2, 1])
        - z[0, 1] * (z[1, 0] * z[2, 2] - z[1, 2] * z[2, 0])
        + z[0, 2] * (z[1, 0] * z[2, 1] - z[1, 1] * z[2, 0])
    )
    return minors + det3


class PeriodicInterpolator:
    """Periodic cubic spline of a scalar field, evaluated at torus points."""

    def __init__(self, s: ScalarField):
        self.spec = s.spec
        self._coef = ndimage.spline_filter(s.values, order=3, mode="grid-wrap")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        scale = np.asarray(self.spec.sizes, dtype=float).reshape((-1,) + (1,) * (points.ndim - 1))
        idx = (points % 1.0) * scale
        return ndimage.map_coordinates(self._coef, idx, order=3, mode="grid-wrap", prefilter=False)

    def gradient(self, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
        out = []
        for ax in range(self.spec.dim):
            e = np.zeros((self.spec.dim,) + (1,) * (points.ndim - 1))
            e[ax] = step
            out.append((self(points + e) - self(points - e)) / (2 * step))
        return np.stack(out)


@dataclass(eq=False)
class MoserProblem:
    f: ScalarField
    g: ScalarField | None = None
    region: RegionSet | None = None

    def __post_init__(self):
        if self.g is not None and self.g.spec != self.f.spec:
            raise SpecMismatch("f and g live on different grids")
        if self.region is not None and self.region.spec != self.f.spec:
            raise SpecMismatch("region lives on a different grid")
        dom = self.domain
        if np.min(self.f.values[dom]) <= 0 or (self.g is not None and np.min(self.g.values[dom]) <= 0):
            raise InvalidField("densities must be strictly positive on the domain")

    @property
    def spec(self) -> GridSpec:
        return self.f.spec

    @property
    def domain(self) -> np.ndarray:
        if self.region is None:
            return np.ones(self.spec.sizes, dtype=bool)
        return zero_boundary_solver(self.region).row_mask

    @property
    def lam(self) -> float:
        dom = self.domain
        g_total = float(dom.sum()) if self.g is None else float(np.sum(self.g.values[dom]))
        return g_total / float(np.sum(self.f.values[dom]))

    def g_at(self, points: np.ndarray, interp: PeriodicInterpolator | None) -> np.ndarray:
        if interp is None:
            return np.ones(points.shape[1:])
        return interp(points)


@dataclass
class IterationTrace:
    residuals: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return max(len(self.residuals) - 1, 0)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    def geometric_ratio(self) -> float:
        if len(self.residuals) < 2 or self.residuals[0] == 0:
            return 0.0
        return (self.residuals[-1] / self.residuals[0]) ** (1.0 / (len(self.residuals) - 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "residual_c0", "ratio"])
        for i, r in enumerate(self.residuals):
            w.writerow([i, repr(float(r)), "" if i == 0 else repr(float(self.ratios[i - 1]))])
        return buf.getvalue()


class _Discretisation:
    """Jacobian and right-inverse pair matching the problem's domain."""

    def __init__(self, p: MoserProblem):
        self.p = p
        self.spec = p.spec
        if p.region is None:
            self.solver = None
            self.rows = np.ones(self.spec.sizes, dtype=bool)
        else:
            self.solver = zero_boundary_solver(p.region)
            self.rows = self.solver.row_mask

    def jacobian_parts(self, v: VectorField) -> tuple[np.ndarray, np.ndarray]:
        """``(det, Q)`` with ``det = 1 + div v + Q``."""
        if self.solver is None:
            D = derivative_matrix(v)
            return _det_of(D), q_of(D)
        Q = fd.q_fwd(v).values
        return 1.0 + fd.divergence_fwd(v).values + Q, Q

    def right_inverse(self, a: np.ndarray) -> VectorField:
        s = ScalarField(self.spec, np.where(self.rows, a, 0.0))
        if self.solver is None:
            return solve_divergence_torus(s)
        v, _ = self.solver.solve(s)
        return v


def _det_of(D: np.ndarray) -> np.ndarray:
    J = D.copy()
    for i in range(J.shape[0]):
        J[i, i] += 1.0
    return det_field(J)


def jacobian_determinant(u: GridMap, p: MoserProblem) -> ScalarField:
    """det Du as the solver for ``p`` discretises it.

    Spectral on the torus; on a bounded region the divergence-form forward
    Jacobian, whose sum over the solve rows is exactly their count.
    """
    det, _ = _Discretisation(p).jacobian_parts(u.displacement)
    return ScalarField(u.spec, det)


def det_residual(u: GridMap, p: MoserProblem, lam: float | None = None) -> ScalarField:
    """Pointwise ``g(u(x)) det Du(x) - lam f(x)``."""
    lam = p.lam if lam is None else lam
    interp = None if p.g is None else PeriodicInterpolator(p.g)
    G = p.g_at(u.image_points(), interp)
    det = jacobian_determinant(u, p).values
    return ScalarField(u.spec, G * det - lam * p.f.values)


def _stalled(residuals: list) -> bool:
    if len(residuals) < STALL_WINDOW + 1:
        return False
    recent = residuals[-(STALL_WINDOW + 1):]
    return all(recent[i + 1] * STALL_FACTOR > recent[i] for i in range(STALL_WINDOW))


def solve_jacobian_eq(p: MoserProblem, tol: float = 1e-10, max_iter: int = 50) -> tuple[GridMap, IterationTrace]:
    """Fixed-point solve; see the module docstring for the scheme."""
    if tol < 1e-12:
        raise InvalidParameter("tol must be >= 1e-12")
    spec = p.spec
    disc = _Discretisation(p)
    rows = disc.rows
    interp = None if p.g is None else PeriodicInterpolator(p.g)
    base = spec.points()
    f = p.f.values

    G0 = p.g_at(base, interp)
    gap = float(np.max(np.abs(p.lam * f / G0 - 1.0)[rows]))
    if gap > CONTRACTION_REGIME:
        raise NoContraction(f"|lam f/g - 1| = {gap:.3f} exceeds the contraction regime {CONTRACTION_REGIME}")

    trace = IterationTrace()
    v = VectorField.zeros(spec)
    for it in range(max_iter + 1):
        det, Qv = disc.jacobian_parts(v)
        if np.min(det) <= 0.0:
            trace.status = "degenerate"
            raise DegenerateMap(f"det Du <= 0 at iteration {it}")
        G = p.g_at(base + v.values, interp)
        ratio_field = f / G
        # both sums are exact invariants of the scheme, so with g = 1 this is p.lam
        lam = float(np.sum(det[rows]) / np.sum(ratio_field[rows]))
        res = float(np.max(np.abs(det - lam * ratio_field)[rows]))
        trace.lambdas.append(lam)
        if trace.residuals:
            trace.ratios.append(res / trace.residuals[-1] if trace.residuals[-1] > 0 else 0.0)
        trace.residuals.append(res)
        if res <= tol:
            trace.status = "converged"
            break
        if _stalled(trace.residuals):
            trace.status = "no-contraction"
            raise NoContraction(f"residual stalled at {res:.3e} after {it} iterations")
        if it == max_iter:
            trace.status = "max-iter"
            raise NoContraction(f"no convergence in {max_iter} iterations (residual {res:.3e})")
        rhs = lam * ratio_field - 1.0 - Qv
        if p.region is None:
            rhs = rhs - np.mean(rhs)
        v = disc.right_inverse(rhs)
        if np.max(np.abs(v.values)) >= INJECTIVITY_MARGIN:
            raise DegenerateMap("displacement left the injectivity margin")

    u = GridMap(v)
    log.info("moser: %s after %d sweeps, residual %.3e", trace.status, trace.iterations, trace.final_residual)
    return u, trace


def moser_problem_torus(f: ScalarField, g: ScalarField | None = None) -> MoserProblem:
    return MoserProblem(f, g, None)

