"""Local linearisation of volume-preserving torus maps.

``linear_blend`` replaces a map ``f`` near ``x0`` by its affine part,
``h = rho A + (1 - rho) f`` with ``A(y) = f(x0) + Df(x0)(y - x0)`` in the
fundamental-domain chart centred at ``x0``.  ``weak_paste`` then repairs the
volume defect of ``h`` on the annulus ``r/2 < |y - x0| < r``: with
``theta = det Dh`` it solves ``det Dpsi = lam theta`` with ``psi = id`` off
the annulus and returns ``g = h o psi^{-1}``, which is affine on the inner
ball, equal to ``f`` outside ``B(x0, r)`` and has ``det Dg = 1 / lam``.

``Dh`` is assembled from the product rule with the analytic bump gradient,
so ``theta`` carries no differencing error of its own.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, NotDiffeo
from .grid import GridMap, NormReport, ScalarField, VectorField, det_field, derivative_matrix, jacobian, norms, trig_eval
from .moser import MoserProblem, PeriodicInterpolator, jacobian_determinant, solve_jacobian_eq
from .divsolve import zero_boundary_solver
from .regions import Bump, annulus_regions, radial_bump

log = logging.getLogger(__name__)

MAX_RADIUS = 0.2
VOLUME_TOL = 1e-9


def _push_profile(d: np.ndarray, r: float, deriv: int = 0) -> np.ndarray:
    """sin^2 bump in the radial coordinate, zero outside ``r/2 < d < r``."""
    half = r / 2.0
    t = (d - half) / half
    inside = (t > 0.0) & (t < 1.0)
    if deriv == 0:
        return np.where(inside, np.sin(np.pi * t) ** 2, 0.0)
    return np.where(inside, np.pi / half * np.sin(2.0 * np.pi * t), 0.0)


def _push_field(offsets: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Radial push ``eta = w(d) e`` and its Jacobian at chart offsets."""
    dim = offsets.shape[0]
    d = np.sqrt(np.sum(offsets**2, axis=0))
    safe = np.where(d > 0, d, 1.0)
    e = offsets / safe
    w = _push_profile(d, r)
    dw = _push_profile(d, r, 1)
    eta = w * e
    eye = np.eye(dim).reshape((dim, dim) + (1,) * (offsets.ndim - 1))
    outer = e[:, None] * e[None, :]
    deta = dw * outer + (w / safe) * (eye - outer)
    return eta, deta


@dataclass(eq=False)
class LinearBlend:
    """``h`` together with the pieces needed for its analytic Jacobian.

    ``eps`` scales an optional radial push inside the annulus (see
    :meth:`balanced`); it is 0 for the plain blend.
    """

    h: GridMap
    f: GridMap
    x0: tuple[float, ...]
    r: float
    bump: Bump
    value0: np.ndarray  # f(x0) - x0
    jac0: np.ndarray  # Df(x0)
    dh: np.ndarray  # (d, d, *sizes)
    eps: float = 0.0

    @property
    def theta(self) -> ScalarField:
        return ScalarField(self.h.spec, det_field(self.dh))

    def affine_displacement(self, offsets: np.ndarray) -> np.ndarray:
        """Displacement of ``y -> f(x0) + Df(x0)(y - x0)`` at chart offsets ``y - x0``."""
        d = offsets.shape[0]
        lin = np.einsum("ij,j...->i...", self.jac0 - np.eye(d), offsets)
        return self.value0.reshape((d,) + (1,) * (offsets.ndim - 1)) + lin

    def displacement_at(self, points: np.ndarray) -> np.ndarray:
        """Displacement of ``h`` at arbitrary points ``(d, M)``, with ``f`` trigonometrically interpolated."""
        off = points - np.asarray(self.x0).reshape(-1, 1)
        off = off - np.round(off)
        rho = self.bump.value_at(off)
        f_disp = np.stack([trig_eval(c, self.f.spec, points) for c in self.f.values])
        out = rho * self.affine_displacement(off) + (1.0 - rho) * f_disp
        if self.eps:
            out = out + self.eps * _push_field(off, self.r)[0]
        return out

    def balanced(self, rows: np.ndarray, max_steps: int = 8) -> "LinearBlend":
        """Copy with ``eps`` chosen so that ``theta`` sums to the node count over ``rows``.

        That sum is the solvability condition of the discrete volume
        correction; without the push it is met only up to quadrature error.
        """
        spec = self.h.spec
        eta, deta = _push_field(spec.offsets_from(self.x0), self.r)
        target = float(rows.sum())

        def mass(eps):
            return float(np.sum(det_field(self.dh + eps * deta)[rows])) - target

        eps, step = 0.0, 1e-6
        for _ in range(max_steps):
            m = mass(eps)
            if abs(m) <= 1e-13 * target:
                break
            slope = (mass(eps + step) - mass(eps - step)) / (2 * step)
            eps -= m / slope
        disp = self.h.values + eps * eta
        return LinearBlend(
            GridMap(VectorField(spec, disp)), self.f, self.x0, self.r, self.bump,
            self.value0, self.jac0, self.dh + eps * deta, eps,
        )


def _affine_data(f: GridMap, x0) -> tuple[np.ndarray, np.ndarray]:
    spec = f.spec
    pt = np.asarray(x0, dtype=float).reshape(-1, 1)
    value = np.array([trig_eval(c, spec, pt)[0] for c in f.values])
    jac = np.eye(spec.dim)
    for i in range(spec.dim):
        for j in range(spec.dim):
            jac[i, j] += trig_eval(f.values[i], spec, pt, deriv_axis=j)[0]
    return value, jac


def linear_blend(f: GridMap, x0, r: float, smoothness: int = 2) -> LinearBlend:
    spec = f.spec
    if not 0 < r < MAX_RADIUS:
        raise InvalidParameter(f"blend radius must lie in (0, {MAX_RADIUS}), got {r}")
    bump = radial_bump(spec, x0, r, smoothness)
    x0 = bump.center
    value0, jac0 = _affine_data(f, x0)

    off = spec.offsets_from(x0)
    rho = bump.field.values
    affine = np.einsum("ij,j...->i...", jac0 - np.eye(spec.dim), off) + value0.reshape((-1,) + (1,) * spec.dim)
    f_disp = f.values
    # node-exact plateaus: rho is exactly 1 or 0 there
    disp = np.where(rho == 1.0, affine, np.where(rho == 0.0, f_disp, rho * affine + (1.0 - rho) * f_disp))

    Df, _ = jacobian(f)
    grad_rho = bump.gradient_at(off)
    diff = affine - f_disp
    dh = rho * jac0.reshape(jac0.shape + (1,) * spec.dim) + (1.0 - rho) * Df
    dh = dh + diff[:, None] * grad_rho[None, :]
    det = det_field(dh)
    if np.min(det) <= 0.0:
        raise NotDiffeo(f"blend folds: min det Dh = {np.min(det):.3e}")
    h = GridMap(VectorField(spec, disp))
    return LinearBlend(h, f, x0, r, bump, value0, jac0, dh)


def _c1_distance(a: GridMap, b: GridMap, alpha: float = 0.5) -> NormReport:
    diff = a.displacement - b.displacement
    return norms(diff, alpha)


def f_c2(f: GridMap) -> float:
    """Max of the C0, C1 and C2 sup norms of the displacement (spectral)."""
    D = derivative_matrix(f.displacement)
    D2 = np.stack([derivative_matrix(VectorField(f.spec, D[:, j])) for j in range(f.spec.dim)])
    return float(max(np.max(np.abs(f.values)), np.max(np.abs(D)), np.max(np.abs(D2))))


@dataclass
class WeakPasteReport:
    r: float
    alpha: float
    det_error_sup: float
    theta_holder: float
    theta_bound_constant: float
    blend_c1: float
    blend_constant: float
    moser_iterations: int
    moser_residual: float
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "alpha": self.alpha,
            "det_error_sup": self.det_error_sup,
            "theta_holder": self.theta_holder,
            "theta_bound_constant": self.theta_bound_constant,
            "blend_c1": self.blend_c1,
            "blend_constant": self.blend_constant,
            "moser_iterations": self.moser_iterations,
            "moser_residual": self.moser_residual,
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


@dataclass(eq=False)
class WeakPaste:
    g: GridMap
    blend: LinearBlend
    psi: GridMap
    det_g: ScalarField
    report: WeakPasteReport

    def __post_init__(self):
        spec = self.g.spec
        self._w = [PeriodicInterpolator(ScalarField(spec, c)) for c in self.psi.values]
        self._support = np.asarray(self.psi.values != 0.0).any(axis=0)

    def psi_inverse(self, points: np.ndarray, tol: float = 1e-14, max_steps: int = 60) -> np.ndarray:
        """Solve ``x + w(x) = y`` by fixed-point iteration (``|Dw|`` is small)."""
        x = np.array(points, dtype=float)
        for _ in range(max_steps):
            w = np.stack([ip(x) for ip in self._w])
            nxt = points - w
            if np.max(np.abs(nxt - x)) <= tol:
                return nxt
            x = nxt
        return x

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """``g`` at arbitrary points ``(d, M)``: ``h`` after the interpolated inverse correction."""
        q = self.psi_inverse(points)
        return q + self.blend.displacement_at(q % 1.0)


def weak_paste(f: GridMap, x0, r: float, alpha: float = 0.5, tol: float = 1e-10, smoothness: int = 2) -> WeakPaste:
    """Affine near ``x0``, ``f`` off ``B(x0, r)``, volume preserving in between.

    The correction ``psi = id + w`` solves ``det Dpsi = lam theta`` on the
    annulus (no composition needed) and ``g = h o psi^{-1}``, so that
    ``det Dg = theta(psi^{-1}) / det Dpsi(psi^{-1}) = 1 / lam``.  ``lam`` is
    fixed by the discrete mass of ``theta`` on the solve rows, which
    :meth:`LinearBlend.balanced` makes exact, so ``lam = 1`` to rounding.
    """
    spec = f.spec
    _, det_f = jacobian(f)
    vol_err = float(np.max(np.abs(det_f.values - 1.0)))
    if vol_err > VOLUME_TOL:
        raise InvalidParameter(f"f is not volume preserving: |det Df - 1| = {vol_err:.3e}")
    plain = linear_blend(f, x0, r, smoothness)
    rs = annulus_regions(spec, plain.x0, r / 2.0, r)
    blend = plain.balanced(zero_boundary_solver(rs).row_mask)
    theta = blend.theta
    problem = MoserProblem(theta, None, rs)
    psi, trace = solve_jacobian_eq(problem, tol=tol)
    det_psi = jacobian_determinant(psi, problem)

    result = WeakPaste(GridMap(blend.h.displacement), blend, psi, theta, None)
    moved = result._support
    disp = np.array(blend.h.values)
    det_g = np.array(theta.values / det_psi.values)
    if moved.any():
        y = spec.points()[:, moved]
        q = result.psi_inverse(y)
        disp[:, moved] = (q - y) + blend.displacement_at(q % 1.0)
        det_g[moved] = PeriodicInterpolator(theta)(q) / PeriodicInterpolator(det_psi)(q)
    g = GridMap(VectorField(spec, disp))
    result.g = g
    result.det_g = ScalarField(spec, det_g)

    theta_norm = norms(theta - ScalarField.constant(spec, 1.0), alpha)
    theta_holder = theta_norm.c0 + theta_norm.holder
    c2 = f_c2(f)
    blend_c1 = _c1_distance(plain.h, f, alpha).c1
    _, det_spec = jacobian(g)
    result.report = WeakPasteReport(
        r=r,
        alpha=alpha,
        det_error_sup=float(np.max(np.abs(det_g - 1.0))),
        theta_holder=theta_holder,
        theta_bound_constant=theta_holder / (c2 * r ** (1.0 - alpha)),
        blend_c1=blend_c1,
        blend_constant=blend_c1 / (c2 * r),
        moser_iterations=trace.iterations,
        moser_residual=trace.final_residual,
        extras={
            "f_c2": c2,
            "theta_c0": theta_norm.c0,
            "lambda": trace.lambdas[-1],
            "balance_eps": blend.eps,
            "det_min": float(np.min(det_g)),
            "det_spectral_sup_error": float(np.max(np.abs(det_spec.values - 1.0))),
            "correction_c0": float(np.max(np.abs(psi.values))),
            "status": trace.status,
        },
    )
    log.info("weak paste r=%.3g: det error %.2e", r, result.report.det_error_sup)
    return result


def newton_inverse(paste: WeakPaste, targets: np.ndarray, tol: float = 1e-12, max_steps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``g(x) = y`` for each target column; returns ``(x, converged)``.

    Jacobians are central differences of ``paste.evaluate``.  Diagnostic only.
    """
    d = targets.shape[0]
    x = np.array(targets, dtype=float)
    step = 1e-6
    done = np.zeros(targets.shape[1], dtype=bool)
    for _ in range(max_steps):
        res = paste.evaluate(x) - targets
        res -= np.round(res)
        err = np.max(np.abs(res), axis=0)
        done = err <= tol
        if done.all():
            break
        J = np.empty((targets.shape[1], d, d))
        for j in range(d):
            e = np.zeros((d, 1))
            e[j] = step
            J[:, :, j] = ((paste.evaluate(x + e) - paste.evaluate(x - e)) / (2 * step)).T
        dx = np.linalg.solve(J, res.T[..., None])[..., 0].T
        x = x - np.where(done, 0.0, dx)
    return x % 1.0, done


def inverse_consistency(paste: WeakPaste, n_points: int = 64, seed: int = 0) -> float:
    """sup |g(g^{-1}(y)) - y| over seeded points near the annulus."""
    rng = np.random.default_rng(seed)
    spec = paste.g.spec
    x0 = np.asarray(paste.blend.x0)
    ang = rng.uniform(0, 2 * np.pi, n_points)
    rad = rng.uniform(0.3, 1.1, n_points) * paste.blend.r
    if spec.dim == 2:
        dirs = np.stack([np.cos(ang), np.sin(ang)])
    else:
        dirs = rng.standard_normal((3, n_points))
        dirs /= np.linalg.norm(dirs, axis=0)
    y = (x0[:, None] + rad * dirs) % 1.0
    x, _ = newton_inverse(paste, y)
    back = paste.evaluate(x) - y
    return float(np.max(np.abs(back - np.round(back))))
