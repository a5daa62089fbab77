"""Compact periodic difference operators.

The forward difference ``D+ u(i) = (u(i+1) - u(i)) / h`` and the backward
difference ``D-`` are adjoint up to sign::

    sum(a * D+ b) == -sum(D- a * b)

so the forward divergence of any periodic field sums to zero over the torus,
and over any node set containing its support.  These operators are used
wherever a field must vanish exactly outside a region, which a spectral
derivative cannot respect.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import GridSpec, ScalarField, VectorField, det_field


def forward(a: np.ndarray, spec: GridSpec, axis: int) -> np.ndarray:
    ax = a.ndim - spec.dim + axis
    return (np.roll(a, -1, axis=ax) - a) * spec.sizes[axis]


def backward(a: np.ndarray, spec: GridSpec, axis: int) -> np.ndarray:
    ax = a.ndim - spec.dim + axis
    return (a - np.roll(a, 1, axis=ax)) * spec.sizes[axis]


def divergence_fwd(v: VectorField) -> ScalarField:
    spec = v.spec
    return ScalarField(spec, sum(forward(v.values[i], spec, i) for i in range(spec.dim)))


def gradient_fwd(s: ScalarField) -> VectorField:
    spec = s.spec
    return VectorField(spec, np.stack([forward(s.values, spec, i) for i in range(spec.dim)]))


def derivative_matrix_fwd(v: VectorField) -> np.ndarray:
    """``out[i, j] = D+_j v_i``."""
    spec = v.spec
    return np.stack([np.stack([forward(v.values[i], spec, j) for j in range(spec.dim)]) for i in range(spec.dim)])


def jacobian_fwd(displacement: VectorField) -> tuple[np.ndarray, ScalarField]:
    spec = displacement.spec
    J = derivative_matrix_fwd(displacement)
    for i in range(spec.dim):
        J[i, i] += 1.0
    return J, ScalarField(spec, det_field(J))


def q_fwd(v: VectorField) -> ScalarField:
    """Nonlinear part of the divergence-form discrete Jacobian.

    ``det(I + Dv) - 1 - div v`` is a sum of exact divergences (2x2 minors
    ``d_i(v_i d_j v_j) - d_j(v_i d_i v_j)`` and in 3D ``div(v_0 grad v_1 x grad v_2)``).
    Discretising each with an outer ``D+`` makes the periodic sum vanish
    exactly, and the value at a node is nonzero only on the support of ``v``
    or one forward step before it.
    """
    spec = v.spec
    d = spec.dim
    a = v.values
    D = derivative_matrix_fwd(v)
    out = np.zeros(spec.sizes)
    for i in range(d):
        for j in range(i + 1, d):
            out += forward(a[i] * D[j, j], spec, i) - forward(a[i] * D[j, i], spec, j)
    if d == 3:
        cross = np.cross(D[1], D[2], axis=0)
        out += sum(forward(a[0] * cross[k], spec, k) for k in range(3))
    return ScalarField(spec, out)


def jacobian_det_conservative(v: VectorField) -> ScalarField:
    """``1 + D+ . v + q_fwd(v)``: a discrete det(I + Dv) whose periodic sum is exactly the node count."""
    return ScalarField(v.spec, 1.0 + divergence_fwd(v).values + q_fwd(v).values)


def curl_fwd(potential) -> VectorField:
    """Forward-difference curl; its forward divergence vanishes identically.

    2D: ``potential`` is a ScalarField stream function psi and the result is
    ``(D+_y psi, -D+_x psi)``.  3D: a VectorField vector potential.
    """
    spec = potential.spec
    if spec.dim == 2:
        psi = potential.values
        return VectorField(spec, np.stack([forward(psi, spec, 1), -forward(psi, spec, 0)]))
    A = potential.values
    d = lambda c, ax: forward(A[c], spec, ax)  # noqa: E731
    return VectorField(
        spec,
        np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]),
    )


def forward_matrix(spec: GridSpec, axis: int) -> sp.csr_matrix:
    """Sparse matrix of ``D+`` along ``axis`` acting on row-major flattened nodes."""
    n = spec.n_nodes
    idx = np.arange(n).reshape(spec.sizes)
    nxt = np.roll(idx, -1, axis=axis).ravel()
    inv_h = float(spec.sizes[axis])
    rows = np.concatenate([np.arange(n), np.arange(n)])
    cols = np.concatenate([nxt, np.arange(n)])
    data = np.concatenate([np.full(n, inv_h), np.full(n, -inv_h)])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))
