"""Explicit sphere maps whose pullbacks of the Hopf bundle are studied here.

Every map is a :class:`ZooMap`: a domain manifold, an ambient extension ``F``
of the map (needed for derivatives), and the codomain, which is either a unit
sphere or a Euclidean space.  Fibers ``F^{-1}(b)`` are cut out of the domain by
``sigma_b(F(x)) = 0`` with ``sigma_b`` the stereographic chart centred at ``b``,
so the Newton systems are square.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .algebra import (
    cayley_pow, dual_hopf, hopf, hopf_s3_s2, qconj, qmul, qpow, random_sphere,
)
from .errors import DomainError, EmptyFiberError, RetractionError, SingularLocusError, SingularPointError
from .geometry import EmbeddedManifold, Submanifold, quat_left_matrix, sphere
from .smooth import H_FIRST, QuadraticMap, SmoothMap, compose, linear_map
from .submersion import _right_mul_blocks, hopf_quadratic, hopf_section

DOMAIN_TOL = 1e-8
RANK_TOL = 1e-6
KERVAIRE_Y_FLOOR = 1e-6
MESH_FACTOR = 3.0


# charts


def stereographic_chart(b) -> SmoothMap:
    """``sigma_b(y) = Q^T y / (1 + b.y)`` with ``Q`` an orthonormal basis of ``b^perp``."""
    b = np.asarray(b, float)
    b = b / np.linalg.norm(b)
    k = b.size
    Q = np.linalg.svd(b[None, :])[2][1:].T

    def func(y):
        return Q.T @ y / (1.0 + b @ y)

    def jac(y):
        s = 1.0 + b @ y
        return Q.T / s - np.outer(Q.T @ y, b) / s**2

    def djac(y, u):
        s = 1.0 + b @ y
        bu = b @ u
        return (-Q.T * bu / s**2 - np.outer(Q.T @ u, b) / s**2
                + 2.0 * np.outer(Q.T @ y, b) * bu / s**3)

    return SmoothMap(func, k, k - 1, jac=jac, djac=djac, name="stereo")


def _fd_djac_from_jac(jac):
    def djac(x, u):
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return np.zeros_like(jac(x))
        d = u / nu
        return (jac(x + H_FIRST * d) - jac(x - H_FIRST * d)) / (2 * H_FIRST) * nu

    return djac


# the maps


@dataclass
class ZooMap:
    name: str
    param: Optional[int]
    domain: EmbeddedManifold
    F: SmoothMap
    sampler: Callable
    sphere_codomain: bool = True
    y_floor: float = 0.0
    guard: Optional[Callable] = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return self.name if self.param is None else f"{self.name}({self.param})"

    @property
    def codomain_ambient_dim(self) -> int:
        return self.F.out_dim

    @property
    def codomain_dim(self) -> int:
        return self.F.out_dim - (1 if self.sphere_codomain else 0)

    @property
    def fiber_dim(self) -> int:
        return self.domain.dim - self.codomain_dim

    def __call__(self, x) -> np.ndarray:
        return self.F(x)

    def tangent_jacobian(self, x) -> np.ndarray:
        """``dF`` restricted to an orthonormal basis of ``T_x domain``."""
        return self.F.jacobian(x) @ self.domain.tangent_basis(x)

    def rank(self, x, tol: float = RANK_TOL) -> int:
        s = np.linalg.svd(self.tangent_jacobian(x), compute_uv=False)
        return int(np.sum(s > tol * max(1.0, s[0])))

    def chart(self, b) -> SmoothMap:
        if self.sphere_codomain:
            return stereographic_chart(b)
        return linear_map(np.eye(self.F.out_dim), -np.asarray(b, float))

    def fiber_manifold(self, b) -> Submanifold:
        return Submanifold(self.domain, compose(self.chart(b), self.F),
                           name=f"{self.label}^-1(b)")


def zoo_eval(zmap: ZooMap, x) -> np.ndarray:
    x = np.asarray(x, float)
    if zmap.domain.residual(x) > DOMAIN_TOL:
        raise DomainError(f"{zmap.label}: point is not on the domain")
    if zmap.guard is not None:
        zmap.guard(x)
    return zmap(x)


def _right_matrix(q) -> np.ndarray:
    """Real 4x4 matrix of ``v -> v q``."""
    w, x, y, z = q
    return np.array([[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]])


def _qpow_jac(y, k: int) -> np.ndarray:
    """Jacobian of ``y -> y^k`` (``k >= 1``): ``v -> sum_j y^j v y^(k-1-j)``."""
    powers = [np.array([1.0, 0, 0, 0])]
    for _ in range(k - 1):
        powers.append(qmul(powers[-1], y))
    return sum(quat_left_matrix(powers[j]) @ _right_matrix(powers[k - 1 - j]) for j in range(k))


def _normalize_jac(z) -> np.ndarray:
    n = np.linalg.norm(z)
    u = z / n
    return (np.eye(z.size) - np.outer(u, u)) / n


def suspension_power_map(k: int) -> SmoothMap:
    """``phi_k(x, y) = (x, y^k) / |(x, y^k)|`` on ambient ``R x H``."""
    if k == 0:
        raise DomainError("power 0 gives a degenerate suspension")

    def raw(z):
        return np.concatenate([[z[0]], qpow(z[1:], k)])

    def func(z):
        r = raw(z)
        return r / np.linalg.norm(r)

    jac = None
    if k > 0:
        def jac(z):
            Jr = np.zeros((5, 5))
            Jr[0, 0] = 1.0
            Jr[1:, 1:] = _qpow_jac(z[1:], k)
            return _normalize_jac(raw(z)) @ Jr

    return SmoothMap(func, 5, 5, jac=jac, djac=None if jac is None else _fd_djac_from_jac(jac),
                     name=f"phi_{k}")


def _normalizing(F: SmoothMap) -> SmoothMap:
    """``x -> F(x / |x|)`` so that maps defined on a sphere extend homogeneously."""
    def func(x):
        return F(x / np.linalg.norm(x))

    jac = None
    if F.analytic_jacobian:
        def jac(x):
            n = np.linalg.norm(x)
            return F.jacobian(x / n) @ _normalize_jac(x)
    return SmoothMap(func, F.in_dim, F.out_dim, jac=jac,
                     djac=None if jac is None else _fd_djac_from_jac(jac), name=F.name)


def sp2_map() -> ZooMap:
    """``a o h: S^7 -> S^4``; its pullback of Hopf is ``Sp(2) -> S^7``."""
    F = hopf_quadratic(-1.0)
    F.name = "a.h"
    return ZooMap("sp2", None, sphere(7), F, lambda rng: random_sphere(rng, 8))


def rigas_map(k: int) -> ZooMap:
    """``r_k = phi_k o h: S^7 -> S^4``."""
    phi = suspension_power_map(k)
    F = compose(phi, hopf_quadratic(1.0), name=f"r_{k}")
    return ZooMap("rigas", k, sphere(7), F, lambda rng: random_sphere(rng, 8))


def rigas_meridian_map() -> ZooMap:
    """``p -> (h_0(p), Re h_1(p))``.

    Level sets ``(x0, 0)`` are Hopf preimages of the meridian spheres
    ``{(x0, y) : Re y = 0}``, where ``phi_2`` is critical.
    """
    F = QuadraticMap.from_function(lambda p: hopf(p, check=False)[:2], 8, name="meridian")
    return ZooMap("rigas-meridian", None, sphere(7), F, lambda rng: random_sphere(rng, 8),
                  sphere_codomain=False)


def cayley_map(n: int) -> ZooMap:
    """``f_n = a o h o phi_n`` with ``phi_n`` the Cayley power map."""
    def func(x):
        q = x / np.linalg.norm(x)
        return -hopf(cayley_pow(n, q), check=False)

    F = SmoothMap(func, 8, 5, name=f"f_{n}")
    return ZooMap("cayley", n, sphere(7), F, lambda rng: random_sphere(rng, 8))


def _psi(z):
    x, lam, y = z[0:4], z[4], z[5:9]
    second = hopf_s3_s2(y)
    second[0] += lam
    return np.concatenate([x, second])


def susp8_phi() -> SmoothMap:
    """``phi = psi / |psi|: S^8 -> S^7`` with ``psi(x, lam, y) = (x, lam + eta(y))``."""
    def raw_jac(z):
        y = z[5:9]
        J = np.zeros((8, 9))
        J[0:4, 0:4] = np.eye(4)
        J[4, 4] = 1.0
        I = np.array([0.0, 1, 0, 0])
        for c in range(4):
            v = np.eye(4)[c]
            J[4:8, 5 + c] = qmul(qmul(v, I), qconj(y)) + qmul(qmul(y, I), qconj(v))
        return J

    def func(z):
        r = _psi(z)
        return r / np.linalg.norm(r)

    def jac(z):
        return _normalize_jac(_psi(z)) @ raw_jac(z)

    return SmoothMap(func, 9, 8, jac=jac, djac=_fd_djac_from_jac(jac), name="phi8")


def susp8_map() -> ZooMap:
    """``f = a o h o phi: S^8 -> S^4``, ``S^8`` in ``H x R x H``."""
    F = compose(hopf_quadratic(-1.0), _normalizing(susp8_phi()), name="f8")
    return ZooMap("susp8", None, sphere(8), F, lambda rng: random_sphere(rng, 9))


def psi_norm_sq(z) -> float:
    """``|psi(x, lam, y)|^2``, equal to ``|x|^2 + lam^2 + |y|^4``."""
    return float(np.sum(_psi(np.asarray(z, float)) ** 2))


def reflection(u) -> np.ndarray:
    """``tau(u) = I - 2 u u^T`` for unit ``u``."""
    u = np.asarray(u, float)
    return np.eye(u.size) - 2.0 * np.outer(u, u)


def kervaire_map(n: int, y_floor: float = KERVAIRE_Y_FLOOR) -> ZooMap:
    """``J tau(x, y) = tau(y/|y|) x / |x|`` from ``S^(4n+1)`` to ``S^(2n)``."""
    if n < 1:
        raise DomainError("kervaire map needs n >= 1")
    d = 2 * n + 1

    def func(z):
        x, y = z[:d], z[d:]
        w = x - 2.0 * (y @ x) / (y @ y) * y
        return w / np.linalg.norm(w)

    def guard(z):
        if np.linalg.norm(z[d:]) <= y_floor:
            raise SingularLocusError("kervaire map evaluated at y = 0")

    F = SmoothMap(func, 2 * d, d, name=f"Jtau_{n}")
    return ZooMap("kervaire", n, sphere(4 * n + 1), F,
                  lambda rng: random_sphere(rng, 2 * d), y_floor=y_floor, guard=guard)


# Wilhelm spaces


def _wilhelm_equations(x, m: int):
    u = x.reshape(m, 8)
    out = [np.sum(u * u, axis=1) - 1.0]
    a1, b1, a2, b2 = u[0, :4], u[0, 4:], u[1, :4], u[1, 4:]
    out.append(qmul(qconj(a1), a2) + qmul(qconj(b1), b2))
    for i in range(1, m - 1):
        ai, bi, an, bn = u[i, :4], u[i, 4:], u[i + 1, :4], u[i + 1, 4:]
        out.append(qmul(ai, an) + qmul(bi, bn))
    return np.concatenate(out)


def wilhelm_space(m: int) -> EmbeddedManifold:
    """``Sp(2, m)`` inside ``(S^7)^m``, dimension ``3m + 4``.

    ``h(u_1) = a h(u_2)`` is encoded as ``conj(a_1) a_2 + conj(b_1) b_2 = 0`` and
    ``h~(u_i) = a h(u_{i+1})`` as ``a_i a_{i+1} + b_i b_{i+1} = 0``.
    """
    if m < 2:
        raise DomainError("Sp(2, m) needs m >= 2")
    c = QuadraticMap.from_function(lambda x: _wilhelm_equations(x, m), 8 * m, name=f"sp2_{m}")
    return EmbeddedManifold(c, name=f"Sp(2,{m})")


def wilhelm_random(m: int, rng: np.random.Generator) -> np.ndarray:
    u = [random_sphere(rng, 8)]
    u.append(_right_mul_blocks(hopf_section(-hopf(u[0])), random_sphere(rng, 4)))
    for i in range(1, m - 1):
        u.append(_right_mul_blocks(hopf_section(-dual_hopf(u[i])), random_sphere(rng, 4)))
    return np.concatenate(u)


def wilhelm_map(m: int) -> ZooMap:
    """``h~ o pr_m: Sp(2, m) -> S^4``."""
    sel = np.zeros((8, 8 * m))
    sel[:, 8 * (m - 1):] = np.eye(8)
    dh = QuadraticMap.from_function(lambda p: dual_hopf(p, check=False), 8)
    F = QuadraticMap(np.einsum("ai,mab,bj->mij", sel, dh.A, sel), dh.B @ sel, dh.c,
                     name="dual_hopf.pr")
    return ZooMap("wilhelm", m, wilhelm_space(m), F, lambda rng: wilhelm_random(m, rng))


# Sp(2) elements


@dataclass(frozen=True)
class Sp2Element:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @classmethod
    def from_array(cls, x) -> "Sp2Element":
        x = np.asarray(x, float)
        return cls(x[0:4], x[4:8], x[8:12], x[12:16])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.c, self.d])

    @property
    def first_column(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    @property
    def second_column(self) -> np.ndarray:
        return np.concatenate([self.c, self.d])

    def membership_residuals(self) -> np.ndarray:
        off = qmul(qconj(self.a), self.c) + qmul(qconj(self.b), self.d)
        return np.array([
            abs(self.a @ self.a + self.b @ self.b - 1.0),
            abs(self.c @ self.c + self.d @ self.d - 1.0),
            float(np.linalg.norm(off)),
        ])


def sp2_identity() -> Sp2Element:
    e, z = np.array([1.0, 0, 0, 0]), np.zeros(4)
    return Sp2Element(e, z, z, e)


def sp2_random(rng: np.random.Generator) -> Sp2Element:
    """Quaternionic Gram-Schmidt of two Gaussian columns (not Haar distributed)."""
    while True:
        v1 = rng.standard_normal(8)
        v2 = rng.standard_normal(8)
        n1 = np.linalg.norm(v1)
        if n1 < 1e-8:
            continue
        v1 = v1 / n1
        a, b = v1[:4], v1[4:]
        lam = qmul(qconj(a), v2[:4]) + qmul(qconj(b), v2[4:])
        w = v2 - np.concatenate([qmul(a, lam), qmul(b, lam)])
        n2 = np.linalg.norm(w)
        if n2 < 1e-8:
            continue
        w = w / n2
        return Sp2Element(a, b, w[:4], w[4:])


MAP_FACTORIES = {
    "sp2": lambda param=None: sp2_map(),
    "wilhelm": lambda param=2: wilhelm_map(param or 2),
    "rigas": lambda param=2: rigas_map(param or 2),
    "cayley": lambda param=2: cayley_map(param or 2),
    "susp8": lambda param=None: susp8_map(),
    "kervaire": lambda param=1: kervaire_map(param or 1),
}


def make_map(name: str, param: Optional[int] = None) -> ZooMap:
    if name not in MAP_FACTORIES:
        raise KeyError(f"unknown map {name!r}; choose from {sorted(MAP_FACTORIES)}")
    return MAP_FACTORIES[name](param) if param is not None else MAP_FACTORIES[name]()


# fiber sampling


@dataclass
class FiberSample:
    target: np.ndarray
    points: np.ndarray
    frames: np.ndarray
    labels: np.ndarray
    conditions: np.ndarray
    singular: np.ndarray
    manifold: Submanifold = field(repr=False)
    zmap: Optional[ZooMap] = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def dim(self) -> int:
        return self.frames.shape[2]

    def residuals(self) -> np.ndarray:
        if self.zmap is None:
            return np.array([np.linalg.norm(self.manifold.extra(x)) for x in self.points])
        return np.array([np.linalg.norm(self.zmap(x) - self.target) for x in self.points])

    def to_csv(self, path) -> None:
        N = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(N)] + ["component", "frame_cond"])
            for x, lab, c in zip(self.points, self.labels, self.conditions):
                w.writerow([repr(float(v)) for v in x] + [int(lab), repr(float(c))])


def label_components(points, factor: float = MESH_FACTOR) -> np.ndarray:
    """Connected components of the graph joining points closer than ``factor`` x median NN distance."""
    points = np.asarray(points, float)
    if len(points) < 2:
        return np.zeros(len(points), dtype=int)
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    radius = factor * float(np.median(dist[:, 1]))
    graph = tree.sparse_distance_matrix(tree, radius, output_type="coo_matrix")
    _, labels = connected_components(graph, directed=False)
    # relabel by order of first appearance for deterministic output
    _, first = np.unique(labels, return_index=True)
    order = {lab: i for i, lab in enumerate(labels[np.sort(first)])}
    return np.array([order[lab] for lab in labels], dtype=int)


def _march(fiber: Submanifold, x, y, radius: float, max_steps: int = 400) -> bool:
    """Walk along ``fiber`` from ``x`` towards ``y``; True if it gets within ``radius``."""
    best = np.linalg.norm(y - x)
    stall = 0
    for _ in range(max_steps):
        if best < radius:
            return True
        try:
            step = fiber.tangent_project(x, y - x)
            n = np.linalg.norm(step)
            if n < 1e-12:
                return False
            x = fiber.retract(x + min(n, 0.5 * radius) * step / n)
        except (RetractionError, SingularPointError):
            return False
        d = np.linalg.norm(y - x)
        stall = stall + 1 if d > best - 1e-3 * radius else 0
        best = min(best, d)
        if stall > 20:
            return False
    return best < radius


def merge_by_walk(fiber: Submanifold, points, labels, minor: float = 0.05) -> np.ndarray:
    """Join small proximity clusters to larger ones they reach by walking along the fiber.

    Proximity clustering splits off isolated points in sparsely sampled regions;
    a small cluster joins the first larger cluster whose nearest point is
    reachable by tangent steps.
    """
    labels = np.asarray(labels).copy()
    if labels.size == 0:
        return labels
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    radius = MESH_FACTOR * float(np.median(dist[:, 1]))
    sizes = np.bincount(labels)
    order = np.argsort(-sizes, kind="stable")
    for lab in order[::-1]:
        if sizes[lab] == 0 or sizes[lab] >= minor * len(points):
            continue
        x = points[labels == lab][0]
        for other in order:
            if other == lab or sizes[other] <= sizes[lab]:
                continue
            members = points[labels == other]
            y = members[np.argmin(np.linalg.norm(members - x, axis=1))]
            if _march(fiber, x, y, radius):
                labels[labels == lab] = other
                sizes[other] += sizes[lab]
                sizes[lab] = 0
                break
    _, first = np.unique(labels, return_index=True)
    remap = {lab: i for i, lab in enumerate(labels[np.sort(first)])}
    return np.array([remap[lab] for lab in labels], dtype=int)


def _frame_info(fiber: Submanifold, x):
    J = fiber.constraint.jacobian(x)
    s = np.linalg.svd(J, compute_uv=False)
    singular = s[-1] <= RANK_TOL * max(1.0, s[0])
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    return cond, singular


def collect_fiber(fiber: Submanifold, starts, target, count: int, rng,
                  zmap: Optional[ZooMap] = None, walk_step: float = 0.3,
                  accept: Optional[Callable] = None, mesh_factor: float = MESH_FACTOR,
                  residual_tol: float = 1e-10) -> FiberSample:
    """Newton-project ``starts`` onto ``fiber``, spread by a tangent random walk, label components."""
    target = np.asarray(target, float)

    def ok(x):
        if np.linalg.norm(fiber.constraint(x)) > residual_tol:
            return False
        if zmap is not None and np.linalg.norm(zmap(x) - target) > 1e-8:
            return False
        return accept is None or accept(x)

    found = []
    for s0 in starts:
        try:
            x = fiber.retract(s0, maxiter=60)
        except (RetractionError, SingularPointError, FloatingPointError):
            continue
        if ok(x):
            found.append(x)
        if len(found) >= count:
            break
    if not found:
        raise EmptyFiberError("no Newton start converged onto the fiber")
    seeds = list(found)
    i = 0
    while len(found) < count and i < 50 * count:
        base = found[rng.integers(len(found))] if i % 2 else seeds[i // 2 % len(seeds)]
        i += 1
        try:
            T = fiber.tangent_basis(base)
            x = fiber.retract(base + walk_step * T @ rng.standard_normal(T.shape[1])
                              / np.sqrt(T.shape[1]), maxiter=60)
        except (RetractionError, SingularPointError):
            continue
        if ok(x):
            found.append(x)
    pts = np.array(found)
    frames, conds, sing = [], [], []
    for x in pts:
        c, s = _frame_info(fiber, x)
        conds.append(c)
        sing.append(s)
        frames.append(fiber.tangent_basis(x) if not s else
                      np.full((pts.shape[1], fiber.dim), np.nan))
    labels = merge_by_walk(fiber, pts, label_components(pts, mesh_factor))
    return FiberSample(target, pts, np.array(frames), labels, np.array(conds),
                       np.array(sing), fiber, zmap)


def fiber_sample(zmap: ZooMap, b, count: int = 500, seed: int = 0,
                 mesh_factor: float = MESH_FACTOR, accept: Optional[Callable] = None,
                 start_sampler: Optional[Callable] = None) -> FiberSample:
    """Sample ``F^{-1}(b)`` by multistart Newton on ``{domain, sigma_b(F) = 0}``."""
    b = np.asarray(b, float)
    rng = np.random.default_rng(seed)
    fiber = zmap.fiber_manifold(b)
    draw = start_sampler or zmap.sampler
    starts = (draw(rng) for _ in range(20 * count))
    return collect_fiber(fiber, starts, b, count, rng, zmap=zmap, accept=accept,
                         mesh_factor=mesh_factor)


# singular values


def _sigma_min(zmap: ZooMap, x) -> float:
    x = zmap.domain.retract(x)
    s = np.linalg.svd(zmap.tangent_jacobian(x), compute_uv=False)
    return float(s[zmap.codomain_dim - 1]) if s.size >= zmap.codomain_dim else 0.0


def _descend_sigma(zmap: ZooMap, x0, iters: int = 300) -> np.ndarray:
    from scipy.optimize import minimize

    def obj(z):
        try:
            return _sigma_min(zmap, z)
        except (RetractionError, SingularPointError):
            return 1e3

    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"maxiter": iters * x0.size, "xatol": 1e-12, "fatol": 1e-14})
    return zmap.domain.retract(res.x)


def cluster_points(points, radius: float = 1e-3) -> list[dict]:
    """Greedy clustering; returns centres and sizes in order of first appearance."""
    clusters: list[dict] = []
    for y in points:
        for c in clusters:
            if np.linalg.norm(y - c["center"]) < radius:
                c["members"].append(y)
                break
        else:
            clusters.append({"center": np.asarray(y, float), "members": [y]})
    return [{"center": np.mean(c["members"], axis=0), "size": len(c["members"])} for c in clusters]


def singular_value_scan(zmap: ZooMap, sample_count: int = 1000, seed: int = 0,
                        descents: int = 12, rank_tol: float = RANK_TOL,
                        cluster_radius: float = 1e-3) -> dict:
    """Ranks of ``dF`` at random points plus descent on the smallest relevant singular value.

    Returns the rank histogram of the random sample, the located rank-deficient
    points with their images, and clusters of those images.
    """
    rng = np.random.default_rng(seed)
    xs = [zmap.sampler(rng) for _ in range(sample_count)]
    ranks, sig = [], []
    for x in xs:
        s = np.linalg.svd(zmap.tangent_jacobian(x), compute_uv=False)
        ranks.append(int(np.sum(s > rank_tol * max(1.0, s[0]))))
        sig.append(s[zmap.codomain_dim - 1])
    order = np.argsort(sig)[:descents]
    singular = []
    for idx in order:
        x = _descend_sigma(zmap, xs[idx])
        r = zmap.rank(x, rank_tol)
        if r < zmap.codomain_dim:
            singular.append((x, r, zmap(x)))
    for x, r in zip(xs, ranks):
        if r < zmap.codomain_dim:
            singular.append((x, r, zmap(x)))
    images = [im for _, _, im in singular]
    hist: dict[int, int] = {}
    for r in ranks:
        hist[r] = hist.get(r, 0) + 1
    return {
        "rank_histogram": dict(sorted(hist.items())),
        "regular_rank": max(hist) if hist else None,
        "singular_points": singular,
        "clusters": cluster_points(images, cluster_radius),
    }


# Kervaire fibers


def kervaire_fiber(n: int, z, lambdas, n_dirs: int = 50, seed: int = 0) -> FiberSample:
    """Points ``(sqrt(1 - lam^2) tau(u) z, lam u)`` of ``J tau^{-1}(z)``.

    ``z`` is a unit vector of ``R^(2n+1)`` and ``lam`` ranges over ``[-1, 0)``.
    """
    z = np.asarray(z, float)
    d = 2 * n + 1
    if z.size != d:
        raise DomainError(f"target must lie in R^{d}")
    lambdas = np.asarray(lambdas, float)
    if np.any(lambdas == 0.0):
        raise SingularLocusError("lambda = 0 lies on the singular locus y = 0")
    if np.any(lambdas < -1.0) or np.any(lambdas > 0.0):
        raise DomainError("lambda must lie in [-1, 0)")
    zmap = kervaire_map(n)
    rng = np.random.default_rng(seed)
    pts = []
    for lam in lambdas:
        for u in random_sphere(rng, d, n_dirs):
            pts.append(np.concatenate([np.sqrt(1.0 - lam**2) * reflection(u) @ z, lam * u]))
    pts = np.array(pts)
    fiber = zmap.fiber_manifold(z)
    frames, conds, sing = [], [], []
    for x in pts:
        try:
            c, s = _frame_info(fiber, x)
        except SingularPointError:
            c, s = np.inf, True
        conds.append(c)
        sing.append(s)
        frames.append(fiber.tangent_basis(x) if not s else np.full((2 * d, fiber.dim), np.nan))
    return FiberSample(z, pts, np.array(frames), np.zeros(len(pts), dtype=int),
                       np.array(conds), np.array(sing), fiber, zmap)
