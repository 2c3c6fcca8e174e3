"""Constraint-defined submanifolds of Euclidean space.

A manifold is the regular zero set of a :class:`~pullgeom.smooth.SmoothMap`
``c: R^N -> R^m`` and carries the induced metric.  Extrinsic quantities come
from the constraint derivatives: with ``J = Dc(x)`` the second fundamental
form is ``II(X, Y) = -J^+ d^2c(X, Y)`` and curvature follows from the Gauss
equation for a flat ambient space,

    <R(X,Y)Z, W> = <II(X,W), II(Y,Z)> - <II(Y,W), II(X,Z)>,

with ``R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AmbiguityError, DegeneratePlaneError, RetractionError, SingularPointError
from .smooth import QuadraticMap, SmoothMap, compose, linear_map, stack

RANK_TOL = 1e-10
RETRACTION_TOL = 1e-12
RETRACTION_MAXITER = 20
DEFAULT_DT = 1e-3


@dataclass
class GeodesicState:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0


class EmbeddedManifold:
    """Regular level set ``{x in R^N : c(x) = 0}`` with the induced metric."""

    def __init__(
        self,
        constraint: SmoothMap,
        name: str = "",
        rank_tol: float = RANK_TOL,
        exp_map: Optional[Callable] = None,
    ):
        self.constraint = constraint
        self.name = name
        self.rank_tol = rank_tol
        self.ambient_dim = constraint.in_dim
        self.codim = constraint.out_dim
        self.dim = self.ambient_dim - self.codim
        self._exp_map = exp_map

    def __repr__(self) -> str:
        return f"EmbeddedManifold({self.name!r}, dim={self.dim}, ambient={self.ambient_dim})"

    def residual(self, x) -> float:
        return float(np.linalg.norm(self.constraint(x)))

    def _svd(self, x):
        J = self.constraint.jacobian(x)
        U, s, Vt = np.linalg.svd(J, full_matrices=True)
        if s.size < self.codim or s[-1] <= self.rank_tol * max(1.0, s[0]):
            raise SingularPointError(
                f"{self.name}: constraint Jacobian rank deficient "
                f"(smallest singular value {s[-1] if s.size else 0.0:.3g})"
            )
        return J, U, s, Vt

    def _pinv_apply(self, x, r):
        """``J^+ r`` for a residual-shaped vector ``r``."""
        _, U, s, Vt = self._svd(x)
        m = self.codim
        return Vt[:m].T @ ((U.T @ r) / s)

    def smallest_singular_value(self, x) -> float:
        s = np.linalg.svd(self.constraint.jacobian(x), compute_uv=False)
        return float(s[-1])

    def tangent_basis(self, x) -> np.ndarray:
        """Orthonormal basis of ``T_x``, shape ``(N, dim)``."""
        _, _, _, Vt = self._svd(x)
        return Vt[self.codim:].T

    def normal_basis(self, x) -> np.ndarray:
        _, _, _, Vt = self._svd(x)
        return Vt[: self.codim].T

    def tangent_projector(self, x) -> np.ndarray:
        Q = self.normal_basis(x)
        return np.eye(self.ambient_dim) - Q @ Q.T

    def tangent_project(self, x, w) -> np.ndarray:
        Q = self.normal_basis(x)
        w = np.asarray(w, dtype=float)
        return w - Q @ (Q.T @ w)

    def retract(self, x, tol: float = RETRACTION_TOL, maxiter: int = RETRACTION_MAXITER):
        """Newton projection (minimum-norm steps) onto the constraint set."""
        x = np.array(x, dtype=float)
        for _ in range(maxiter + 1):
            r = self.constraint(x)
            if np.linalg.norm(r) < tol:
                return x
            x = x - self._pinv_apply(x, r)
        raise RetractionError(
            f"{self.name}: retraction did not converge in {maxiter} iterations "
            f"(residual {np.linalg.norm(self.constraint(x)):.3g})"
        )

    def second_fundamental_form(self, x, X, Y) -> np.ndarray:
        """Normal-valued ``II(X, Y) = -J^+ d^2c(X, Y)``."""
        return -self._pinv_apply(x, self.constraint.second(x, X, Y))

    def shape_matrix(self, x, X) -> np.ndarray:
        """Matrix ``S_X`` with ``S_X W = II(X, W)`` for tangent ``W``."""
        _, U, s, Vt = self._svd(x)
        D = self.constraint.djac(x, X)
        m = self.codim
        return -Vt[:m].T @ ((U.T @ D) / s[:, None])

    def curvature_tensor(self, x, X, Y, Z, W) -> float:
        """``<R(X,Y)Z, W>``."""
        II = self.second_fundamental_form
        return float(II(x, X, W) @ II(x, Y, Z) - II(x, Y, W) @ II(x, X, Z))

    def curvature_operator_apply(self, x, X, Y, Z) -> np.ndarray:
        """Tangent vector ``R(X,Y)Z``."""
        II = self.second_fundamental_form
        SX = self.shape_matrix(x, X)
        SY = self.shape_matrix(x, Y)
        r = SX.T @ II(x, Y, Z) - SY.T @ II(x, X, Z)
        return self.tangent_project(x, r)

    def sectional_curvature(self, x, X, Y, normalized: bool = True) -> float:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        II = self.second_fundamental_form
        den = (X @ X) * (Y @ Y) - (X @ Y) ** 2
        if den <= 1e-14 * max(1.0, (X @ X) * (Y @ Y)):
            raise DegeneratePlaneError("tangent vectors do not span a plane")
        a, b, c = II(x, X, X), II(x, Y, Y), II(x, X, Y)
        num = float(a @ b - c @ c)
        return num / den if normalized else num

    # geodesics

    def _accel(self, x, v):
        return self.second_fundamental_form(x, v, v)

    def geodesic_path(self, x, v, T: float, dt: float = DEFAULT_DT):
        """RK4 for ``x'' = II(x', x')`` with retraction and velocity re-projection.

        Returns ``(ts, xs, vs)`` including the initial state.
        """
        x = np.array(x, dtype=float)
        v = np.array(v, dtype=float)
        n = max(1, int(np.ceil(abs(T) / dt - 1e-9)))
        h = T / n
        ts = [0.0]
        xs = [x.copy()]
        vs = [v.copy()]
        for i in range(n):
            k1x, k1v = v, self._accel(x, v)
            x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
            k2x, k2v = v2, self._accel(x2, v2)
            x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
            k3x, k3v = v3, self._accel(x3, v3)
            x4, v4 = x + h * k3x, v + h * k3v
            k4x, k4v = v4, self._accel(x4, v4)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            x = self.retract(x)
            v = self.tangent_project(x, v)
            ts.append((i + 1) * h)
            xs.append(x.copy())
            vs.append(v.copy())
        return np.array(ts), np.array(xs), np.array(vs)

    def exp(self, x, v, t: float = 1.0, dt: float = DEFAULT_DT) -> np.ndarray:
        """``exp_x(t v)``; closed form when the manifold provides one."""
        if self._exp_map is not None:
            return self._exp_map(np.asarray(x, float), np.asarray(v, float), t)
        if t == 0.0:
            return np.array(x, dtype=float)
        return self.geodesic_path(x, v, t, dt)[1][-1]


def geodesic_integrate(M: EmbeddedManifold, state: GeodesicState, T: float,
                       dt: float = DEFAULT_DT) -> GeodesicState:
    _, xs, vs = M.geodesic_path(state.x, state.v, T, dt)
    return GeodesicState(xs[-1], vs[-1], state.t + T)


class Submanifold(EmbeddedManifold):
    """Submanifold of ``parent`` cut out by additional equations ``extra(x) = 0``."""

    def __init__(self, parent: EmbeddedManifold, extra: SmoothMap, name: str = "",
                 rank_tol: float = RANK_TOL):
        super().__init__(stack([parent.constraint, extra]), name=name, rank_tol=rank_tol)
        self.parent = parent
        self.extra = extra

    def relative_second_fundamental_form(self, x, X, Y) -> np.ndarray:
        """Second fundamental form of this submanifold inside ``parent``."""
        return self.parent.tangent_project(x, self.second_fundamental_form(x, X, Y))

    def normal_projector_in_parent(self, x) -> np.ndarray:
        return self.parent.tangent_projector(x) - self.tangent_projector(x)


# factories


def _sphere_exp(radius: float):
    def exp_map(x, v, t):
        speed = np.linalg.norm(v)
        if speed * abs(t) == 0.0:
            return np.array(x, dtype=float)
        ang = speed * t / radius
        return np.cos(ang) * x + radius * np.sin(ang) * v / speed

    return exp_map


def sphere_constraint(ambient_dim: int, radius: float = 1.0, center=None) -> QuadraticMap:
    A = np.eye(ambient_dim)[None]
    if center is None:
        return QuadraticMap(A, np.zeros((1, ambient_dim)), [-radius**2], name="sphere")
    center = np.asarray(center, dtype=float)
    return QuadraticMap(A, (-2 * center)[None], [center @ center - radius**2], name="sphere")


def sphere(n: int, radius: float = 1.0, analytic: bool = True) -> EmbeddedManifold:
    """Round ``S^n`` of the given radius in ``R^(n+1)``.

    With ``analytic=False`` all constraint derivatives are finite differences.
    """
    N = n + 1
    if analytic:
        c = sphere_constraint(N, radius)
    else:
        c = SmoothMap(lambda x: np.array([x @ x - radius**2]), N, 1, name="sphere-fd")
    return EmbeddedManifold(c, name=f"S^{n}", exp_map=_sphere_exp(radius))


def block_constraint(blocks, ambient_dim: int) -> SmoothMap:
    """Stack constraints acting on coordinate slices ``[(slice, map), ...]``."""
    maps = []
    for sl, c in blocks:
        idx = np.arange(ambient_dim)[sl]
        sel = np.zeros((idx.size, ambient_dim))
        sel[np.arange(idx.size), idx] = 1.0
        if isinstance(c, QuadraticMap):
            A = np.einsum("ai,mab,bj->mij", sel, c.A, sel)
            maps.append(QuadraticMap(A, c.B @ sel, c.c, name=c.name))
        else:
            maps.append(compose(c, linear_map(sel)))
    if all(isinstance(m, QuadraticMap) for m in maps):
        return QuadraticMap(
            np.concatenate([m.A for m in maps]),
            np.concatenate([m.B for m in maps]),
            np.concatenate([m.c for m in maps]),
        )
    return stack(maps)


def product(*manifolds: EmbeddedManifold, name: str = "") -> EmbeddedManifold:
    """Riemannian product of embedded manifolds (block constraints)."""
    N = sum(M.ambient_dim for M in manifolds)
    blocks = []
    start = 0
    for M in manifolds:
        blocks.append((slice(start, start + M.ambient_dim), M.constraint))
        start += M.ambient_dim
    exps = [M._exp_map for M in manifolds]
    exp_map = None
    if all(e is not None for e in exps):
        dims = [M.ambient_dim for M in manifolds]

        def exp_map(x, v, t):
            out, s = [], 0
            for e, d in zip(exps, dims):
                out.append(e(x[s:s + d], v[s:s + d], t))
                s += d
            return np.concatenate(out)

    label = name or "x".join(M.name for M in manifolds)
    return EmbeddedManifold(block_constraint(blocks, N), name=label, exp_map=exp_map)


def flat_torus(k: int = 2) -> EmbeddedManifold:
    """Product of ``k`` unit circles in ``R^(2k)``."""
    return product(*[sphere(1) for _ in range(k)], name=f"T^{k}")


def linear_slice(parent: EmbeddedManifold, L, offset=None, name: str = "") -> Submanifold:
    """``{x in parent : L x + offset = 0}``."""
    return Submanifold(parent, linear_map(L, offset), name=name)


# closest point and distance function

CLOSEST_TOL = 1e-14
AMBIGUITY_TOL = 1e-6


@dataclass
class ClosestPoint:
    point: np.ndarray
    distance: float
    iterations: int


def _descend(S: EmbeddedManifold, x, s, maxiter: int):
    for it in range(maxiter):
        step = S.tangent_project(s, x - s)
        s = S.retract(s + step)
        if np.linalg.norm(step) < CLOSEST_TOL * max(1.0, np.linalg.norm(x)):
            return s, it + 1
    return s, maxiter


def closest_point(S: EmbeddedManifold, x, n_starts: int = 6, seed: int = 0,
                  maxiter: int = 500, ambiguity_tol: float = AMBIGUITY_TOL) -> ClosestPoint:
    """Closest point of ``S`` to ambient ``x`` in the chordal (ambient) distance.

    Multistart fixed-point iteration ``s <- R(s + P_s (x - s))`` converging to a
    point with ``x - s`` normal to ``S``.  Distinct local minimizers whose
    distances agree within ``ambiguity_tol`` raise :class:`AmbiguityError`.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    try:
        first = S.retract(x, maxiter=50)
        spread = 2.0 * max(np.linalg.norm(x - first), 1e-3)
        starts = [first]
    except (RetractionError, SingularPointError):
        spread = 1.0
        starts = [x + spread * rng.standard_normal(x.size)]
    starts += [x + spread * rng.standard_normal(x.size) for _ in range(n_starts - 1)]
    found = []
    for s0 in starts:
        try:
            s = S.retract(s0, maxiter=50)
            s, its = _descend(S, x, s, maxiter)
        except (RetractionError, SingularPointError):
            continue
        found.append(ClosestPoint(s, float(np.linalg.norm(x - s)), its))
    if not found:
        raise RetractionError("closest_point: no start converged")
    best = min(found, key=lambda c: c.distance)
    for c in found:
        if (np.linalg.norm(c.point - best.point) > ambiguity_tol
                and c.distance - best.distance < ambiguity_tol):
            raise AmbiguityError(
                f"closest point not unique: two minimizers at distance {best.distance:.6g}"
            )
    return best


def half_distance_sq(S: EmbeddedManifold, x, **kw) -> float:
    return 0.5 * closest_point(S, x, **kw).distance ** 2


def distance_sq_hessian_check(S: Submanifold, x, v, h: float = 1e-3,
                              grad_tol: float = 1e-6, hess_tol: float = 1e-4) -> dict:
    """Finite-difference derivatives of ``eta = dist(., S)^2 / 2`` along a geodesic.

    At ``x`` in ``S`` the first derivative vanishes and the second equals
    ``|Pi v|^2`` with ``Pi`` the projection onto the normal space of ``S`` in
    its parent manifold.
    """
    M = S.parent
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    eta0 = half_distance_sq(S, x)
    etap = half_distance_sq(S, M.exp(x, v, h))
    etam = half_distance_sq(S, M.exp(x, v, -h))
    d1 = (etap - etam) / (2 * h)
    d2 = (etap - 2 * eta0 + etam) / (h * h)
    Pi = S.normal_projector_in_parent(x)
    expected = float((Pi @ v) @ (Pi @ v))
    return {
        "first_derivative": d1,
        "second_derivative": d2,
        "expected_second_derivative": expected,
        "first_ok": abs(d1) < grad_tol,
        "second_ok": abs(d2 - expected) < hess_tol,
    }


# Sp(2) as a quadric in R^16 (columns (a,b), (c,d) packed as [a, b, c, d])


def _sp2_equations(x):
    from .algebra import qconj, qmul

    a, b, c, d = x[0:4], x[4:8], x[8:12], x[12:16]
    off = qmul(qconj(a), c) + qmul(qconj(b), d)
    return np.concatenate([[a @ a + b @ b - 1.0, c @ c + d @ d - 1.0], off])


def sp2_manifold() -> EmbeddedManifold:
    """``Sp(2)`` with the Frobenius (bi-invariant) metric, dimension 10."""
    c = QuadraticMap.from_function(_sp2_equations, 16, name="sp2")
    return EmbeddedManifold(c, name="Sp(2)", exp_map=_sp2_exp)


def quat_left_matrix(q) -> np.ndarray:
    """Real 4x4 matrix of ``v -> q v``."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array([[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]])


def qmat_real(A) -> np.ndarray:
    """Real 8x8 representation of a quaternionic 2x2 matrix acting on ``H^2``."""
    A = np.asarray(A, dtype=float)
    return np.block([[quat_left_matrix(A[i, j]) for j in range(2)] for i in range(2)])


def qmat_from_real(R) -> np.ndarray:
    out = np.zeros((2, 2, 4))
    for i in range(2):
        for j in range(2):
            out[i, j] = R[4 * i:4 * i + 4, 4 * j]
    return out


def sp2_algebra_basis() -> np.ndarray:
    """Orthonormal (Frobenius) basis of ``sp(2)``, shape ``(10, 2, 2, 4)``."""
    basis = []
    for u in range(1, 4):
        for r in range(2):
            X = np.zeros((2, 2, 4))
            X[r, r, u] = 1.0
            basis.append(X)
    for u in range(4):
        X = np.zeros((2, 2, 4))
        X[1, 0, u] = 1.0
        X[0, 1] = -np.array([1.0, -1, -1, -1]) * X[1, 0]
        basis.append(X / np.sqrt(2.0))
    return np.array(basis)


def sp2_expm(X) -> np.ndarray:
    from scipy.linalg import expm

    return qmat_from_real(expm(qmat_real(X)))


def _sp2_exp(x, v, t):
    from .algebra import qmat_adjoint, qmat_from_columns, qmat_mul, qmat_to_columns

    A = qmat_from_columns(x)
    X = qmat_mul(qmat_adjoint(A), qmat_from_columns(v))
    return qmat_to_columns(qmat_mul(A, sp2_expm(t * X)))
