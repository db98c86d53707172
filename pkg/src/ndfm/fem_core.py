"""Reference-element machinery: shape functions, quadrature, local integrals.

Elements are linear Lagrange triangles (P1) and bilinear quadrilaterals
(Q1).  Besides the usual cell stiffness/load integrals, a cell crossed by a
fracture picks up a line integral of the tangential derivatives of its
shape functions along the fracture path; that is the term that lets
fracture geometry ignore mesh lines entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom2d import ParamInterval, polygon_area


class FEMError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Quadrature rules


@dataclass(frozen=True)
class QuadratureRule:
    """Points/weights on a reference domain; exact up to ``exact_degree``."""

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int


def gauss_interval(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1] (n = 1..5 commonly used)."""
    if n < 1:
        raise FEMError("need at least one Gauss point")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x.reshape(-1, 1), w, 2 * n - 1)


def tri_quadrature(npts: int) -> QuadratureRule:
    """Rule on the reference triangle (0,0)-(1,0)-(0,1); npts in {3, 7}."""
    if npts == 3:
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        w = np.full(3, 1.0 / 6.0)
        return QuadratureRule(pts, w, 2)
    if npts == 7:
        s15 = np.sqrt(15.0)
        a = (6.0 - s15) / 21.0
        b = (6.0 + s15) / 21.0
        wa = (155.0 - s15) / 1200.0
        wb = (155.0 + s15) / 1200.0
        pts = np.array(
            [
                [1.0 / 3.0, 1.0 / 3.0],
                [a, a],
                [1.0 - 2.0 * a, a],
                [a, 1.0 - 2.0 * a],
                [b, b],
                [1.0 - 2.0 * b, b],
                [b, 1.0 - 2.0 * b],
            ]
        )
        w = 0.5 * np.array([9.0 / 40.0, wa, wa, wa, wb, wb, wb])
        return QuadratureRule(pts, w, 5)
    raise FEMError("triangle rules available with 3 or 7 points")


def quad_quadrature(n: int) -> QuadratureRule:
    """Tensor Gauss rule on the reference square [-1,1]^2; n in {2, 4}."""
    if n not in (2, 4):
        raise FEMError("square rules available as 2x2 or 4x4 tensor Gauss")
    x, w = np.polynomial.legendre.leggauss(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), 2 * n - 1)


# ---------------------------------------------------------------------------
# Reference shape functions


def quad_ref_values(xi, eta):
    """Q1 shape values on the reference square, corners CCW from (-1,-1)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 0.25 * np.stack(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ],
        axis=-1,
    )


def quad_ref_gradients(xi, eta):
    """d(shape)/d(xi, eta) on the reference square, shape (..., 4, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dxi = 0.25 * np.stack([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)], axis=-1)
    deta = 0.25 * np.stack([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)], axis=-1)
    return np.stack([dxi, deta], axis=-1)


def tri_gradients(coords):
    """Constant P1 gradients for one triangle, shape (3, 2)."""
    x = coords[:, 0]
    y = coords[:, 1]
    area2 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    if area2 <= 0.0:
        raise FEMError("triangle is degenerate or clockwise")
    g = np.empty((3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[i] = (y[j] - y[k], x[k] - x[j])
    return g / area2


def _invert_quad_map(coords, p, tol=1e-13, maxit=30):
    """Reference coordinates of a physical point inside a Q1 cell (Newton)."""
    ref = np.zeros(2)
    p = np.asarray(p, dtype=float)
    for _ in range(maxit):
        N = quad_ref_values(ref[0], ref[1])
        dN = quad_ref_gradients(ref[0], ref[1])
        r = N @ coords - p
        if np.abs(r).max() <= tol * max(np.abs(coords).max(), 1.0):
            break
        J = dN.T @ coords  # J[a, b] = d x_b / d xi_a
        ref -= np.linalg.solve(J.T, r)
    return ref


class ShapeFunctionSet:
    """Shape values and physical gradients for one cell, evaluated anywhere."""

    def __init__(self, cell_kind, coords):
        if cell_kind not in ("tri3", "quad4"):
            raise FEMError(f"unknown cell kind {cell_kind!r}")
        self.cell_kind = cell_kind
        self.coords = np.asarray(coords, dtype=float)
        if polygon_area(self.coords) <= 0.0:
            raise FEMError("cell is degenerate or clockwise")
        if cell_kind == "tri3":
            self._grads = tri_gradients(self.coords)

    @property
    def n(self):
        return len(self.coords)

    def values(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.cell_kind == "tri3":
            # barycentric coordinates from the affine map
            v0 = self.coords[0]
            T = np.column_stack([self.coords[1] - v0, self.coords[2] - v0])
            lam = np.linalg.solve(T, (pts - v0).T).T
            return np.column_stack([1.0 - lam[:, 0] - lam[:, 1], lam[:, 0], lam[:, 1]])
        refs = np.array([_invert_quad_map(self.coords, p) for p in pts])
        return quad_ref_values(refs[:, 0], refs[:, 1])

    def gradients(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.cell_kind == "tri3":
            return np.broadcast_to(self._grads, (len(pts), 3, 2)).copy()
        out = np.empty((len(pts), 4, 2))
        for k, p in enumerate(pts):
            ref = _invert_quad_map(self.coords, p)
            dN = quad_ref_gradients(ref[0], ref[1])  # (4, 2) wrt (xi, eta)
            J = dN.T @ self.coords  # J[a, b] = d x_b / d xi_a
            out[k] = np.linalg.solve(J, dN.T).T
        return out


# ---------------------------------------------------------------------------
# Local integrals


def _as_tensor(km):
    t = np.asarray(km, dtype=float)
    if t.shape == ():
        t = t * np.eye(2)
    if t.shape != (2, 2):
        raise FEMError("permeability tensor must be 2x2 (or a scalar)")
    return t


def local_matrix_stiffness(cell_kind, coords, km):
    """Cell integral of (K grad psi_i) . grad psi_j.

    Exact for tri3 (constant gradients); 2x2 Gauss for quad4, which is exact
    on affine cells.
    """
    coords = np.asarray(coords, dtype=float)
    km = _as_tensor(km)
    if cell_kind == "tri3":
        g = tri_gradients(coords)
        area = polygon_area(coords)
        return area * (g @ km @ g.T)
    if cell_kind != "quad4":
        raise FEMError(f"unknown cell kind {cell_kind!r}")
    rule = quad_quadrature(2)
    out = np.zeros((4, 4))
    for (xi, eta), w in zip(rule.points, rule.weights):
        dN = quad_ref_gradients(xi, eta)
        J = dN.T @ coords
        detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        g = np.linalg.solve(J, dN.T).T  # physical gradients (4, 2)
        out += w * detJ * (g @ km @ g.T)
    return out


def local_fracture_stiffness(cell_kind, coords, curve, interval: ParamInterval, eps_kf, nq):
    """Line integral of eps*k_f (d psi_i/d tau)(d psi_j/d tau) along a path piece.

    ``eps_kf`` is the conductance as a function of arc length s along the
    whole curve (a plain number works too).  Gauss quadrature with ``nq``
    points in the curve parameter; the arc-length weight |velocity| makes
    this exact for polynomial integrands of degree <= 2 nq - 1 in t.
    """
    if nq < 1:
        raise FEMError("need at least one quadrature point")
    sf = ShapeFunctionSet(cell_kind, coords)
    out = np.zeros((sf.n, sf.n))
    if interval.width == 0.0:
        return out
    rule = gauss_interval(nq)
    mid = interval.midpoint()
    half = 0.5 * interval.width
    ts = mid + half * rule.points[:, 0]
    pts = curve.point(ts)
    vels = curve.velocity(ts)
    speeds = np.linalg.norm(vels, axis=1)
    grads = sf.gradients(pts)  # (nq, n, 2)
    tangential = np.einsum("qni,qi->qn", grads, vels)
    coef = np.empty(len(ts))
    if callable(eps_kf):
        for k, t in enumerate(ts):
            s = curve.arclength_between(curve.domain[0], float(t))
            c = eps_kf(s)
            if not c > 0.0:
                raise FEMError(f"fracture conductance must be positive, got {c} at s={s}")
            coef[k] = c
    else:
        c = float(eps_kf)
        if not c > 0.0:
            raise FEMError(f"fracture conductance must be positive, got {c}")
        coef[:] = c
    w = rule.weights * half * coef / speeds
    return np.einsum("q,qn,qm->nm", w, tangential, tangential)


def local_load(cell_kind, coords, f):
    """Cell load vector for the source term, 7-point tri / 4x4 quad Gauss."""
    coords = np.asarray(coords, dtype=float)
    fn = f if callable(f) else (lambda x, y, _v=float(f): np.full_like(np.asarray(x, float), _v))
    if cell_kind == "tri3":
        rule = tri_quadrature(7)
        v0 = coords[0]
        T = np.column_stack([coords[1] - v0, coords[2] - v0])
        detT = abs(np.linalg.det(T))
        pts = v0 + rule.points @ T.T
        lam = rule.points
        values = np.column_stack([1.0 - lam[:, 0] - lam[:, 1], lam[:, 0], lam[:, 1]])
        fv = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
        return np.einsum("q,q,qn->n", rule.weights * detT, fv, values)
    if cell_kind != "quad4":
        raise FEMError(f"unknown cell kind {cell_kind!r}")
    rule = quad_quadrature(4)
    out = np.zeros(4)
    for (xi, eta), w in zip(rule.points, rule.weights):
        N = quad_ref_values(xi, eta)
        dN = quad_ref_gradients(xi, eta)
        J = dN.T @ coords
        detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        p = N @ coords
        out += w * detJ * float(fn(p[0], p[1])) * N
    return out


def neumann_load(edge_coords, q_n):
    """Boundary-edge load: accumulates + integral of q_N psi_i ds (3-pt Gauss)."""
    a = np.asarray(edge_coords[0], dtype=float)
    b = np.asarray(edge_coords[1], dtype=float)
    length = float(np.hypot(*(b - a)))
    qfn = q_n if callable(q_n) else (lambda x, y, _v=float(q_n): _v)
    rule = gauss_interval(3)
    out = np.zeros(2)
    for (u,), w in zip(rule.points, rule.weights):
        t = 0.5 * (1.0 + u)
        p = a + t * (b - a)
        q = float(qfn(p[0], p[1]))
        out += w * 0.5 * length * q * np.array([1.0 - t, t])
    return out
