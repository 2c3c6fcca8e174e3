"""Principal bundles with Kaluza-Klein metrics and their O'Neill A-tensor.

A bundle is a total space ``E`` and base ``M`` (both embedded), a projection
``pi: E -> M`` given on ambient coordinates, and the infinitesimal generators
``xi_u(p)`` of a free isometric group action.  The horizontal space is the
orthogonal complement of the generators inside ``T_pE``.

The A-tensor ``A_X Y`` (horizontal ``X``, ``Y``) is available three ways:

* ``projection``: vertical part of the ambient derivative of a basic field;
* ``curvature_form``: ``-beta(Omega(X, Y), u)`` with ``Omega = -omega([X, Y]) / 2``
  read off the bracket of two differently-extended basic fields;
* ``closed``: a per-bundle formula (Hopf and pullbacks of Hopf).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import subspace_angles

from .algebra import hopf, qconj, qmul, random_sphere
from .errors import PreconditionError, SingularPointError
from .geometry import EmbeddedManifold, product, sphere
from .smooth import QuadraticMap, SmoothMap, compose, linear_map, stack

AFLAT_TOL = 1e-6
RIGIDITY_TOL = 1e-4
ACCEL_TOL = 1e-4
FLAT_TOL = 1e-5
SWEEP_TOL = 1e-6
FD_STEP = 1e-3

_UNITS = np.eye(4)[1:]


def _right_mul_blocks(p, u):
    """``(a u, b u, ...)`` for a vector of quaternion blocks."""
    return qmul(np.asarray(p, float).reshape(-1, 4), u).ravel()


def _stencil(func, p, direction, retract, h=FD_STEP):
    """Fourth-order central derivative of ``func`` along retracted curves."""
    nd = np.linalg.norm(direction)
    if nd == 0.0:
        return np.zeros_like(func(p))
    d = direction / nd
    vals = [func(retract(p + s * h * d)) for s in (2, 1, -1, -2)]
    return (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h) * nd


@dataclass
class ATensorFrame:
    """``T[i, i', j] = <A_{X_i} X_i', U_j>`` in orthonormal frames at ``p``."""

    p: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray
    T: np.ndarray

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.T + np.swapaxes(self.T, 0, 1))))

    def adjoint(self, i: int, U) -> np.ndarray:
        """Horizontal vector ``A*_{X_i} U`` with ``<A*_X U, Y> = <A_X Y, U>``."""
        coeffs = self.T[i] @ (self.vertical.T @ U)
        return self.horizontal @ coeffs


@dataclass
class AFlatDistribution:
    point: np.ndarray
    basis: np.ndarray
    threshold: float
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


class SubmersionBundle:
    """Principal bundle ``E -> M`` with Kaluza-Klein metric induced from the ambient space."""

    def __init__(
        self,
        total: EmbeddedManifold,
        base: EmbeddedManifold,
        projection: SmoothMap,
        generators: Callable,
        lie_basis,
        fiber_gram=None,
        sampler: Optional[Callable] = None,
        closed_form: Optional[Callable] = None,
        name: str = "",
    ):
        self.total = total
        self.base = base
        self.projection = projection
        self._generators = generators
        self.lie_basis = list(lie_basis)
        g = len(self.lie_basis)
        self.fiber_gram = np.eye(g) if fiber_gram is None else np.asarray(fiber_gram, float)
        self._sampler = sampler
        self._closed = closed_form
        self.name = name
        self._shear = np.random.default_rng(12345).standard_normal(
            (base.ambient_dim, base.ambient_dim)
        ) * 0.5

    @property
    def group_dim(self) -> int:
        return len(self.lie_basis)

    @property
    def has_closed_form(self) -> bool:
        return self._closed is not None

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        if self._sampler is None:
            raise NotImplementedError(f"{self.name}: no sampler")
        return self._sampler(rng)

    def generators(self, p) -> np.ndarray:
        """Columns ``xi_u(p)`` for ``u`` in the Lie basis."""
        return np.asarray(self._generators(np.asarray(p, float)), float)

    def vertical_space(self, p) -> np.ndarray:
        Xi = self.generators(p)
        Q, R = np.linalg.qr(Xi)
        d = np.abs(np.diag(R))
        if d.min() <= 1e-10 * max(1.0, d.max()):
            raise SingularPointError(f"{self.name}: action not free at this point")
        return Q

    def horizontal_space(self, p) -> np.ndarray:
        T = self.total.tangent_basis(p)
        V = self.vertical_space(p)
        W = T - V @ (V.T @ T)
        U, _, _ = np.linalg.svd(W, full_matrices=False)
        return U[:, : self.total.dim - self.group_dim]

    def vertical_part(self, p, w) -> np.ndarray:
        V = self.vertical_space(p)
        return V @ (V.T @ w)

    def horizontal_part(self, p, w) -> np.ndarray:
        return self.total.tangent_project(p, w) - self.vertical_part(p, w)

    def dpi(self, p) -> np.ndarray:
        return self.projection.jacobian(p)

    def lift(self, p, Z) -> np.ndarray:
        """Horizontal lift ``H (dpi H)^+ Z`` of a base tangent vector ``Z``."""
        H = self.horizontal_space(p)
        return H @ np.linalg.lstsq(self.dpi(p) @ H, np.asarray(Z, float), rcond=None)[0]

    def connection_form(self, p, w) -> np.ndarray:
        """Lie-algebra coordinates of the vertical part of tangent ``w``."""
        return np.linalg.lstsq(self.generators(p), np.asarray(w, float), rcond=None)[0]

    def _basic(self, Z0, m0, shear=None):
        def fieldfn(q):
            m = self.projection(q)
            Z = Z0 if shear is None else Z0 + shear @ (m - m0)
            return self.lift(q, self.base.tangent_project(m, Z))

        return fieldfn

    def a_tensor_projection(self, p, X, Y) -> np.ndarray:
        """``A_X Y`` as the vertical part of ``D_X`` of the basic extension of ``Y``."""
        p = np.asarray(p, float)
        m = self.projection(p)
        Yb = self._basic(self.dpi(p) @ Y, m)
        D = _stencil(Yb, p, np.asarray(X, float), self.total.retract)
        return self.vertical_part(p, D)

    def a_tensor_curvature_form(self, p, X, Y, U) -> float:
        """``-beta(Omega(X, Y), omega(U))``, equal to ``<A_X Y, U>``."""
        p = np.asarray(p, float)
        m = self.projection(p)
        dpi = self.dpi(p)
        Xb = self._basic(dpi @ X, m, self._shear)
        Yb = self._basic(dpi @ Y, m, -self._shear.T)
        bracket = (_stencil(Yb, p, np.asarray(X, float), self.total.retract)
                   - _stencil(Xb, p, np.asarray(Y, float), self.total.retract))
        omega_bracket = self.connection_form(p, bracket)
        Omega = -0.5 * omega_bracket
        u = self.connection_form(p, U)
        return float(-(Omega @ self.fiber_gram @ u))

    def a_tensor(self, p, X, Y, method: str = "closed") -> np.ndarray:
        if method == "closed" and self._closed is not None:
            return self._closed(np.asarray(p, float), np.asarray(X, float), np.asarray(Y, float))
        if method in ("closed", "projection"):
            return self.a_tensor_projection(p, X, Y)
        if method == "curvature_form":
            V = self.vertical_space(p)
            return V @ np.array([self.a_tensor_curvature_form(p, X, Y, V[:, j])
                                 for j in range(V.shape[1])])
        raise ValueError(f"unknown A-tensor method {method!r}")

    def a_tensor_frame(self, p, method: str = "closed") -> ATensorFrame:
        H = self.horizontal_space(p)
        V = self.vertical_space(p)
        h = H.shape[1]
        T = np.zeros((h, h, V.shape[1]))
        for i in range(h):
            for k in range(h):
                T[i, k] = V.T @ self.a_tensor(p, H[:, i], H[:, k], method)
        return ATensorFrame(np.asarray(p, float), H, V, T)


# A-flat kernel and curvature diagnostics


def a_flat_kernel(B: SubmersionBundle, p, aflat_tol: float = AFLAT_TOL,
                  method: str = "closed") -> AFlatDistribution:
    """``{X in T_mM : A_{X^} = 0}`` from the SVD of ``X -> (entries of A_{X^})``."""
    p = np.asarray(p, float)
    m = B.projection(p)
    E = B.base.tangent_basis(m)
    H = B.horizontal_space(p)
    V = B.vertical_space(p)
    cols = []
    for i in range(E.shape[1]):
        Xh = B.lift(p, E[:, i])
        entries = [V.T @ B.a_tensor(p, Xh, H[:, k], method) for k in range(H.shape[1])]
        cols.append(np.concatenate(entries))
    K = np.array(cols).T
    _, s, Vt = np.linalg.svd(K)
    if s.size == 0 or s[0] == 0.0:
        return AFlatDistribution(m, E, aflat_tol, s)
    rank = int(np.sum(s > aflat_tol * s[0]))
    return AFlatDistribution(m, E @ Vt[rank:].T, aflat_tol, s)


def a_operator_norm(B: SubmersionBundle, p, X, method: str = "closed") -> float:
    """Operator norm of ``A_{X^}`` from horizontal to vertical, for base vector ``X``."""
    Xh = B.lift(p, X)
    H = B.horizontal_space(p)
    V = B.vertical_space(p)
    M = np.array([V.T @ B.a_tensor(p, Xh, H[:, k], method) for k in range(H.shape[1])]).T
    return float(np.linalg.norm(M, 2))


def a_flat_rank_scan(B: SubmersionBundle, sample_count: int, seed: int = 0,
                     aflat_tol: float = AFLAT_TOL) -> dict:
    """Histogram of ``dim D_m`` over random points; the minimum marks the generic stratum."""
    rng = np.random.default_rng(seed)
    ranks = []
    for _ in range(sample_count):
        try:
            ranks.append(a_flat_kernel(B, B.random_point(rng), aflat_tol).dim)
        except SingularPointError:
            continue
    hist = Counter(ranks)
    generic = min(hist) if hist else None
    return {
        "histogram": dict(sorted(hist.items())),
        "generic_rank": generic,
        "samples": len(ranks),
    }


def principal_angles(A, B) -> np.ndarray:
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros(0)
    return subspace_angles(A, B)


def vertizontal_curvature(B: SubmersionBundle, p, X, U, method: str = "closed") -> float:
    """``|A*_X U|^2`` assembled over an orthonormal horizontal frame."""
    H = B.horizontal_space(p)
    U = np.asarray(U, float)
    vals = [B.a_tensor(p, X, H[:, k], method) @ U for k in range(H.shape[1])]
    return float(np.sum(np.square(vals)))


def flat_section_rigidity_check(M: EmbeddedManifold, x, X, U, flat_tol: float = FLAT_TOL,
                                rigidity_tol: float = RIGIDITY_TOL,
                                sweep_tol: float = SWEEP_TOL, t_grid=None) -> dict:
    """Zero curvature plane ``span(X, U)`` in non-negative curvature forces ``R(X,U)X = 0``.

    Also sweeps ``Z`` over a tangent basis, checking
    ``K(X, tU + Z) = t^2 K(X,U) - 2t <R(X,U)X, Z> + K(X,Z) >= 0`` on a grid
    (unnormalized curvatures).
    """
    K = M.sectional_curvature(x, X, U)
    if K >= flat_tol:
        raise PreconditionError(f"plane is not flat: K = {K:.3g} >= {flat_tol:g}")
    RXUX = M.curvature_operator_apply(x, X, U, X)
    t = np.linspace(-10.0, 10.0, 201) if t_grid is None else np.asarray(t_grid, float)
    KXU = M.curvature_tensor(x, X, U, U, X)
    sweep_min = np.inf
    for Z in M.tangent_basis(x).T:
        KXZ = M.curvature_tensor(x, X, Z, Z, X)
        lin = RXUX @ Z
        q = t**2 * KXU - 2 * t * lin + KXZ
        sweep_min = min(sweep_min, float(q.min()))
    r = float(np.linalg.norm(RXUX))
    return {
        "sectional_curvature": float(K),
        "rigidity_residual": r,
        "sweep_min": sweep_min,
        "rigidity_ok": r < rigidity_tol,
        "sweep_ok": sweep_min >= -sweep_tol,
    }


def covariant_derivative(M: EmbeddedManifold, x, field: Callable, direction) -> np.ndarray:
    """``nabla_direction field`` via the tangent projection of the ambient derivative."""
    D = _stencil(field, np.asarray(x, float), np.asarray(direction, float), M.retract)
    return M.tangent_project(x, D)


def a_flat_acceleration_check(B: SubmersionBundle, points, field: Callable,
                              accel_tol: float = ACCEL_TOL, aflat_tol: float = AFLAT_TOL) -> dict:
    """A-flat field ``X`` on the base: ``nabla_X X`` must again be A-flat.

    ``points`` are base points along a curve in the regular locus.
    """
    worst_field = worst_accel = 0.0
    for m in points:
        p = _point_over(B, m)
        X = field(m)
        acc = covariant_derivative(B.base, m, field, X)
        worst_field = max(worst_field, a_operator_norm(B, p, X))
        worst_accel = max(worst_accel, a_operator_norm(B, p, acc))
    return {
        "field_a_norm": worst_field,
        "acceleration_a_norm": worst_accel,
        "ok": worst_field < accel_tol and worst_accel < accel_tol,
    }


def a_flat_bracket_check(B: SubmersionBundle, points, field1: Callable, field2: Callable,
                         tol: float = ACCEL_TOL) -> dict:
    """Involutivity: the bracket of two A-flat fields is A-flat."""
    worst = 0.0
    for m in points:
        p = _point_over(B, m)
        D21 = _stencil(field2, m, field1(m), B.base.retract)
        D12 = _stencil(field1, m, field2(m), B.base.retract)
        br = B.base.tangent_project(m, D21 - D12)
        worst = max(worst, a_operator_norm(B, p, br))
    return {"bracket_a_norm": worst, "ok": worst < tol}


def _point_over(B: SubmersionBundle, m) -> np.ndarray:
    lifter = getattr(B, "point_over", None)
    if lifter is None:
        raise NotImplementedError(f"{B.name}: cannot lift base points")
    return lifter(np.asarray(m, float))


# concrete bundles


def hopf_section(b) -> np.ndarray:
    """A point ``p`` in ``S^7`` with ``hopf(p) = b`` for unit ``b = (x0, y0)``."""
    b = np.asarray(b, float)
    x0, y0 = b[0], b[1:]
    if x0 > -0.5:
        a0 = np.sqrt((1 + x0) / 2)
        a = np.array([a0, 0, 0, 0])
        bq = qconj(y0) / (2 * a0)
    else:
        b0 = np.sqrt((1 - x0) / 2)
        bq = np.array([b0, 0, 0, 0])
        a = y0 / (2 * b0)
    return np.concatenate([a, bq])


def hopf_quadratic(scale: float = 1.0) -> QuadraticMap:
    return QuadraticMap.from_function(lambda p: scale * hopf(p, check=False), 8, name="hopf")


def hopf_a_tensor(p, X, Y) -> np.ndarray:
    """Closed form ``A_X Y = -sum_u <X u, Y> p u`` on the Hopf bundle ``S^7 -> S^4(1/2)``."""
    out = np.zeros(8)
    for u in _UNITS:
        out -= (_right_mul_blocks(X, u) @ Y) * _right_mul_blocks(p, u)
    return out


def _hopf_generators(p):
    return np.stack([_right_mul_blocks(p, u) for u in _UNITS], axis=1)


class HopfBundle(SubmersionBundle):
    """``S^7(1) -> S^4(1/2)``, ``pi = hopf / 2``, right action of unit quaternions."""

    def __init__(self):
        super().__init__(
            total=sphere(7),
            base=sphere(4, radius=0.5),
            projection=hopf_quadratic(0.5),
            generators=_hopf_generators,
            lie_basis=["i", "j", "k"],
            sampler=lambda rng: random_sphere(rng, 8),
            closed_form=hopf_a_tensor,
            name="hopf",
        )

    def point_over(self, m):
        return hopf_section(2.0 * np.asarray(m, float))


class TrivialBundle(SubmersionBundle):
    """Product ``M x S^3`` with the product metric; the A-tensor vanishes."""

    def __init__(self, M: EmbeddedManifold, M_sampler: Optional[Callable] = None):
        N = M.ambient_dim
        total = product(M, sphere(3))
        sel = np.hstack([np.eye(N), np.zeros((N, 4))])

        def gens(p):
            g = p[N:]
            return np.stack([np.concatenate([np.zeros(N), qmul(g, u)]) for u in _UNITS], axis=1)

        sampler = None
        if M_sampler is not None:
            sampler = lambda rng: np.concatenate([M_sampler(rng), random_sphere(rng, 4)])
        super().__init__(total, M, linear_map(sel), gens, ["i", "j", "k"], sampler=sampler,
                         closed_form=lambda p, X, Y: np.zeros(N + 4), name=f"{M.name}xS3")

    def point_over(self, m):
        return np.concatenate([m, [1.0, 0, 0, 0]])


class PullbackBundle(SubmersionBundle):
    """``f*Hopf = {(m, p) in M x S^7 : hopf(p) = f(m)}`` with the induced metric.

    ``f`` must be defined on ambient coordinates of ``M`` with values in the
    unit ``S^4``.  The base metric making ``pi`` a Riemannian submersion is the
    graph metric ``g_M + <d(f/2), d(f/2)>``.
    """

    def __init__(self, M: EmbeddedManifold, f: SmoothMap, M_sampler: Optional[Callable] = None,
                 name: str = ""):
        N = M.ambient_dim
        self.M = M
        self.f = f
        self.hopf_bundle = HopfBundle()
        selM = np.hstack([np.eye(N), np.zeros((N, 8))])
        selP = np.hstack([np.zeros((8, N)), np.eye(8)])
        hp = _lift_quadratic(hopf_quadratic(1.0), selP)
        if isinstance(M.constraint, QuadraticMap) and isinstance(f, QuadraticMap):
            fm = _lift_quadratic(f, selM)
            total_c = _quad_stack([
                _lift_quadratic(M.constraint, selM),
                QuadraticMap(hp.A - fm.A, hp.B - fm.B, hp.c - fm.c),
            ])
        else:
            cM = compose(M.constraint, linear_map(selM))
            total_c = stack([cM, _difference(hp, compose(f, linear_map(selM)))])
        total = EmbeddedManifold(total_c, name=name or f"pullback({f.name})")

        def gens(q):
            p = q[N:]
            return np.stack([np.concatenate([np.zeros(N), _right_mul_blocks(p, u)])
                             for u in _UNITS], axis=1)

        sampler = None
        if M_sampler is not None:
            def sampler(rng):
                m = M_sampler(rng)
                return self.point_over(m, rng)

        super().__init__(total, M, linear_map(selM), gens, ["i", "j", "k"], sampler=sampler,
                         closed_form=self._closed_a, name=name or f"pullback({f.name})")

    def point_over(self, m, rng: Optional[np.random.Generator] = None):
        p = hopf_section(self.f(m))
        if rng is not None:
            q = random_sphere(rng, 4)
            p = _right_mul_blocks(p, q)
        return np.concatenate([m, p])

    def _closed_a(self, q, X, Y):
        N = self.M.ambient_dim
        m, p = q[:N], q[N:]
        J = self.f.jacobian(m)
        Xt = self.hopf_bundle.lift(p, 0.5 * J @ X[:N])
        Yt = self.hopf_bundle.lift(p, 0.5 * J @ Y[:N])
        return np.concatenate([np.zeros(N), hopf_a_tensor(p, Xt, Yt)])


def _difference(g: SmoothMap, f: SmoothMap) -> SmoothMap:
    """``x -> g(x) - f(x)`` with derivatives from the factors."""
    return SmoothMap(
        lambda x: g(x) - f(x), g.in_dim, g.out_dim,
        jac=lambda x: g.jacobian(x) - f.jacobian(x),
        djac=lambda x, u: g.djac(x, u) - f.djac(x, u),
        name=f"{g.name}-{f.name}",
    )


def _lift_quadratic(c: QuadraticMap, sel) -> QuadraticMap:
    """``x -> c(sel x)`` kept in quadratic form."""
    return QuadraticMap(np.einsum("ai,mab,bj->mij", sel, c.A, sel), c.B @ sel, c.c)


def _quad_stack(maps) -> QuadraticMap:
    return QuadraticMap(np.concatenate([m.A for m in maps]),
                        np.concatenate([m.B for m in maps]),
                        np.concatenate([m.c for m in maps]))


def sp2_pullback_bundle() -> PullbackBundle:
    """``Sp(2) -> S^7`` (first column) as the pullback of Hopf along ``a o h``."""
    f = hopf_quadratic(-1.0)
    f.name = "a.h"
    return PullbackBundle(sphere(7), f, M_sampler=lambda rng: random_sphere(rng, 8), name="sp2")


def graph_metric_inner(f: SmoothMap, m, X, Y, scale: float = 1.0) -> float:
    """``g_M(X, Y) + scale^2 <df X, df Y>``."""
    J = f.jacobian(m)
    return float(np.asarray(X) @ np.asarray(Y) + scale**2 * (J @ X) @ (J @ Y))


def graph_manifold(M: EmbeddedManifold, f: SmoothMap, scale: float = 1.0) -> EmbeddedManifold:
    """``Gamma_f = {(m, scale f(m))}`` in ``R^N x R^k``; its metric is the graph metric."""
    N, k = M.ambient_dim, f.out_dim

    selM = np.hstack([np.eye(N), np.zeros((N, k))])
    selY = np.hstack([np.zeros((k, N)), np.eye(k)])
    cM = compose(M.constraint, linear_map(selM))
    fm = compose(f, linear_map(selM))
    y = linear_map(selY)
    g = SmoothMap(
        lambda x: y(x) - scale * fm(x), N + k, k,
        jac=lambda x: selY - scale * fm.jacobian(x),
        djac=lambda x, u: -scale * fm.djac(x, u),
    )
    return EmbeddedManifold(stack([cM, g]), name=f"graph({f.name})")


def graph_embed(f: SmoothMap, m, scale: float = 1.0) -> np.ndarray:
    return np.concatenate([m, scale * f(m)])


def graph_tangent(f: SmoothMap, m, X, scale: float = 1.0) -> np.ndarray:
    return np.concatenate([X, scale * f.jacobian(m) @ X])
