"""Executable obstruction experiments.

* totally-geodesic tests for fibers (pointwise II and geodesic shooting);
* fiber degeneration along a curve of regular values approaching a critical value;
* immersion test for the closest-point projection onto a limit set;
* geodesy of traced A-flat leaves;
* the quadratic lower bound for the distance-squared function.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .algebra import octonion_angle, random_sphere
from .errors import AmbiguityError, EmptyFiberError, PreconditionError, RegularLocusError, RetractionError
from .geometry import EmbeddedManifold, Submanifold, closest_point, half_distance_sq
from .mapzoo import FiberSample, ZooMap, collect_fiber, fiber_sample
from .submersion import SubmersionBundle, a_flat_kernel

PASS_TOL = 1e-4
FAIL_FLOOR = 1e-2
IMM_TOL = 1e-3
GEODESIC_T = 0.5
GEODESIC_DT = 5e-3
ETA_ZERO = 1e-12


def classify(measures, pass_tol: float = PASS_TOL, fail_floor: float = FAIL_FLOOR) -> str:
    if all(m < pass_tol for m in measures):
        return "pass"
    if any(m > fail_floor for m in measures):
        return "fail"
    return "indeterminate"


@dataclass
class GeodesyVerdict:
    fiber_id: str
    max_ii: float
    geodesic_deviation: float
    pass_tol: float
    fail_floor: float
    verdict: str
    reason: str = ""
    samples: int = 0
    pairs: int = 0

    @property
    def measures_agree(self) -> bool:
        a = classify([self.max_ii], self.pass_tol, self.fail_floor)
        b = classify([self.geodesic_deviation], self.pass_tol, self.fail_floor)
        return a == b

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measures_agree"] = self.measures_agree
        return d


def _unit_pairs(frame, rng, pairs):
    d = frame.shape[1]
    out = []
    for _ in range(pairs):
        a = frame @ random_sphere(rng, d)
        b = frame @ random_sphere(rng, d)
        out.append((a, b))
    return out


def totally_geodesic_test(M: EmbeddedManifold, fiber: FiberSample, pairs: int = 20,
                          geodesic_T: float = GEODESIC_T, shots: int = 10, seed: int = 0,
                          pass_tol: float = PASS_TOL, fail_floor: float = FAIL_FLOOR,
                          dt: float = GEODESIC_DT, fiber_id: str = "",
                          level: Optional[Callable] = None) -> GeodesyVerdict:
    """Two measures of non-geodesy of a sampled fiber inside ``M``.

    Measure 1 is ``max |II(X, Y)|`` of the fiber in ``M`` over unit tangent pairs.
    Measure 2 shoots ``M``-geodesics tangent to the fiber for time
    ``geodesic_T`` and records ``max |level(gamma(t))|``, where ``level``
    vanishes exactly on the fiber (defaults to its extra equations).
    """
    rng = np.random.default_rng(seed)
    S = fiber.manifold
    if np.any(fiber.singular):
        return GeodesyVerdict(fiber_id, np.nan, np.nan, pass_tol, fail_floor, "indeterminate",
                              reason="fiber contains singular points", samples=len(fiber.points))
    level = level or (lambda x: S.extra(x))
    max_ii = 0.0
    for x, frame in zip(fiber.points, fiber.frames):
        for X, Y in _unit_pairs(frame, rng, pairs):
            rel = M.tangent_project(x, S.second_fundamental_form(x, X, Y))
            max_ii = max(max_ii, float(np.linalg.norm(rel)))
    idx = rng.choice(len(fiber.points), size=min(shots, len(fiber.points)), replace=False)
    dev = 0.0
    for i in np.sort(idx):
        x, frame = fiber.points[i], fiber.frames[i]
        v = frame @ random_sphere(rng, frame.shape[1])
        if M._exp_map is not None:
            traj = [M.exp(x, v, t) for t in np.linspace(0.0, geodesic_T, 51)]
        else:
            traj = M.geodesic_path(x, v, geodesic_T, dt)[1]
        dev = max(dev, max(float(np.linalg.norm(level(y))) for y in traj))
    verdict = classify([max_ii, dev], pass_tol, fail_floor)
    return GeodesyVerdict(fiber_id, max_ii, dev, pass_tol, fail_floor, verdict,
                          samples=len(fiber.points), pairs=pairs)


# degeneration of Cayley fibers


def cayley_eta(n: int, t):
    """``eta(t) = 2 sin^2(nt) / sin^2(t)``."""
    t = np.asarray(t, float)
    return 2.0 * np.sin(n * t) ** 2 / np.sin(t) ** 2


def cayley_eta_min(n: int, grid: int = 20001) -> float:
    """Minimum of ``eta`` over the north cap ``(0, pi/n]`` by grid search plus bounded refinement."""
    ts = np.linspace(1e-9, np.pi / n, grid)
    vals = cayley_eta(n, ts)
    i = int(np.argmin(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    if hi - lo <= 0:
        return float(vals[i])
    res = minimize_scalar(lambda t: float(cayley_eta(n, t)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    val = float(min(vals[i], res.fun))
    return 0.0 if val < ETA_ZERO else val


@dataclass
class DegenerationTrace:
    n: int
    thetas: np.ndarray
    max_b_sq: np.ndarray
    bound: np.ndarray
    diameter: np.ndarray
    min_dist_singular: np.ndarray
    identity_residual: np.ndarray
    eta_min: float
    samples: list = field(default_factory=list, repr=False)

    def bound_ok(self, tol: float = 1e-6) -> bool:
        return bool(np.all(self.max_b_sq <= self.bound + tol))

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.max_b_sq) <= 1e-9))

    def rows(self):
        for i in range(len(self.thetas)):
            yield {
                "theta": float(self.thetas[i]),
                "max_b": float(np.sqrt(self.max_b_sq[i])),
                "max_b_sq": float(self.max_b_sq[i]),
                "bound": float(self.bound[i]),
                "diameter": float(self.diameter[i]),
                "min_dist_singular": float(self.min_dist_singular[i]),
                "identity_residual": float(self.identity_residual[i]),
            }


def _cap_sampler(n: int):
    def draw(rng):
        t = rng.uniform(0.0, np.pi / n)
        alpha = random_sphere(rng, 7)
        return np.concatenate([[np.cos(t)], np.sin(t) * alpha])

    return draw


def degeneration_trace(zmap: ZooMap, thetas, count: int = 300, seed: int = 0) -> DegenerationTrace:
    """Follow the north-cap fiber component of ``f_n`` over ``(cos theta, sin theta)``.

    Records ``max |b|^2`` over the sampled component together with the bound
    ``(1 + cos theta) / min eta`` and the pointwise identity residual
    ``max | eta(t) |b|^2 - (1 + cos theta) |``.
    """
    if zmap.name != "cayley":
        raise PreconditionError("degeneration_trace expects a cayley map")
    n = zmap.param
    eta_min = cayley_eta_min(n)
    thetas = np.asarray(thetas, float)
    out = {k: [] for k in ("max_b_sq", "bound", "diameter", "dist", "ident")}
    samples = []
    for k, th in enumerate(thetas):
        target = np.array([np.cos(th), np.sin(th), 0.0, 0.0, 0.0])
        cap = lambda x: octonion_angle(x) <= np.pi / n
        fs = fiber_sample(zmap, target, count=count, seed=seed + k, accept=cap,
                          start_sampler=_cap_sampler(n))
        pts = fs.points
        if len(pts) == 0:
            raise EmptyFiberError(f"no cap component at theta={th}")
        bsq = np.sum(pts[:, 4:] ** 2, axis=1)
        t = octonion_angle(pts)
        ident = np.abs(cayley_eta(n, t) * bsq - (1.0 + np.cos(th)))
        out["max_b_sq"].append(float(bsq.max()))
        out["bound"].append((1.0 + np.cos(th)) / eta_min if eta_min > ETA_ZERO else np.inf)
        diffs = pts[:, None, :] - pts[None, :, :]
        out["diameter"].append(float(np.sqrt(np.max(np.sum(diffs**2, axis=-1)))))
        # chordal distance to the singular meridian {(a, 0) : |a| = 1}
        anorm = np.linalg.norm(pts[:, :4], axis=1)
        out["dist"].append(float(np.sqrt(np.min((1.0 - anorm) ** 2 + bsq))))
        out["ident"].append(float(ident.max()))
        samples.append(fs)
    return DegenerationTrace(n, thetas, np.array(out["max_b_sq"]), np.array(out["bound"]),
                             np.array(out["diameter"]), np.array(out["dist"]),
                             np.array(out["ident"]), eta_min, samples)


# radial projection


def radial_projection_immersion_test(S: EmbeddedManifold, fiber: FiberSample, h: float = 1e-4,
                                     imm_tol: float = IMM_TOL, max_points: int = 50,
                                     seed: int = 0) -> dict:
    """Is the closest-point projection onto ``S`` an immersion of the fiber?

    A fiber of larger dimension than ``S`` is reported as a structural
    obstruction before anything is computed.
    """
    fdim = fiber.manifold.dim
    if fdim > S.dim:
        return {
            "fiber_dim": fdim, "target_dim": S.dim, "immersion": False,
            "reason": "dimension obstruction: fiber dimension exceeds target dimension",
            "min_singular_value": 0.0, "rank_profile": {}, "evaluated_points": 0,
        }
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(fiber.points), size=min(max_points, len(fiber.points)),
                             replace=False))
    F = fiber.manifold
    svals, ranks, failures = [], [], 0
    for i in idx:
        x, frame = fiber.points[i], fiber.frames[i]
        try:
            cols = []
            for v in frame.T:
                pp = closest_point(S, F.retract(x + h * v)).point
                pm = closest_point(S, F.retract(x - h * v)).point
                cols.append((pp - pm) / (2 * h))
        except (AmbiguityError, RetractionError):
            failures += 1
            continue
        s = np.linalg.svd(np.array(cols).T, compute_uv=False)
        svals.append(float(s[-1]))
        ranks.append(int(np.sum(s > imm_tol)))
    profile: dict[int, int] = {}
    for r in ranks:
        profile[r] = profile.get(r, 0) + 1
    min_s = min(svals) if svals else np.nan
    return {
        "fiber_dim": fdim, "target_dim": S.dim,
        "immersion": bool(svals) and min_s > imm_tol and failures == 0,
        "reason": "" if not failures else f"{failures} points outside the tubular neighbourhood",
        "min_singular_value": min_s,
        "rank_profile": dict(sorted(profile.items())),
        "evaluated_points": len(svals),
    }


# A-flat leaves


def _kernel_projector(B: SubmersionBundle, m, dim: Optional[int], lift: Callable):
    D = a_flat_kernel(B, lift(m))
    if dim is not None and D.dim != dim:
        raise RegularLocusError(f"A-flat rank changed from {dim} to {D.dim}")
    return D.basis @ D.basis.T, D.dim


def aflat_leaf_geodesy(B: SubmersionBundle, m0, stratum: Optional[EmbeddedManifold] = None,
                       directions: int = 4, length: float = 0.4, steps: int = 20,
                       pairs: int = 6, seed: int = 0, pass_tol: float = PASS_TOL,
                       fail_floor: float = FAIL_FLOOR, fiber_id: str = "aflat-leaf") -> GeodesyVerdict:
    """Trace the A-flat distribution ``D`` from ``m0`` and test the traced leaf patch.

    Curves are ``M``-geodesic steps (RK4) whose velocity is re-projected onto
    ``D`` after each step.  Measure 1 is the second fundamental form of ``D``,
    ``|(P_M - P_D)(dP_D[X] Y)|`` for unit ``X, Y`` in ``D``; measure 2 compares
    each traced curve with the ``M``-geodesic of the same initial velocity.
    Tracing on a singular stratum passes that stratum as ``stratum``.
    """
    M = B.base
    carrier = stratum or M
    lift = B.point_over
    rng = np.random.default_rng(seed)
    m0 = carrier.retract(np.asarray(m0, float))
    P0, dim = _kernel_projector(B, m0, None, lift)
    if dim == 0:
        return GeodesyVerdict(fiber_id, 0.0, 0.0, pass_tol, fail_floor, "pass",
                              reason="A-flat distribution is zero")
    basis0 = np.linalg.svd(P0)[0][:, :dim]
    h = length / steps
    max_ii = 0.0
    dev = 0.0
    patch = [m0]
    for _ in range(directions):
        v0 = basis0 @ random_sphere(rng, dim)
        x, v = m0.copy(), v0.copy()
        curve = [x]
        for _ in range(steps):
            _, xs, vs = M.geodesic_path(x, v, h, dt=h)
            x = carrier.retract(xs[-1])
            P, _ = _kernel_projector(B, x, dim, lift)
            v = P @ M.tangent_project(x, vs[-1])
            v /= np.linalg.norm(v)
            curve.append(x)
        patch.extend(curve[steps // 2::steps // 2])
        ts = np.linspace(0.0, length, steps + 1)
        geo = [M.exp(m0, v0, t) for t in ts]
        dev = max(dev, max(float(np.linalg.norm(a - b)) for a, b in zip(curve, geo)))
    for x in patch:
        P, _ = _kernel_projector(B, x, dim, lift)
        Pm = M.tangent_projector(x)
        basis = np.linalg.svd(P)[0][:, :dim]
        for _ in range(pairs):
            X = basis @ random_sphere(rng, dim)
            Y = basis @ random_sphere(rng, dim)
            dP = _directional_projector(B, carrier, x, X, dim, lift)
            max_ii = max(max_ii, float(np.linalg.norm((Pm - P) @ (dP @ Y))))
    verdict = classify([max_ii, dev], pass_tol, fail_floor)
    return GeodesyVerdict(fiber_id, max_ii, dev, pass_tol, fail_floor, verdict,
                          samples=len(patch), pairs=pairs)


def _directional_projector(B, carrier, x, X, dim, lift, h: float = 1e-3):
    vals = []
    for s in (2, 1, -1, -2):
        P, _ = _kernel_projector(B, carrier.retract(x + s * h * X), dim, lift)
        vals.append(P)
    return (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)


# stability bound


def great_circle_s3() -> Submanifold:
    """``{(cos s, sin s, 0, 0)}`` inside the unit ``S^3``."""
    from .geometry import linear_slice, sphere

    L = np.zeros((2, 4))
    L[0, 2] = L[1, 3] = 1.0
    return linear_slice(sphere(3), L, name="great-circle")


def great_circle_eta(x) -> float:
    """Closed form ``eta = (1 - r)`` for the chordal distance to the circle, ``r = |(x0, x1)|``."""
    x = np.asarray(x, float)
    return 1.0 - float(np.hypot(x[0], x[1]))


def stability_bound_probe(S: Submanifold, deltas, n_base: int = 6, n_dirs: int = 4,
                          t_max: float = 1.0, n_t: int = 41, seed: int = 0,
                          c_claimed: float = 0.2, hess_h: float = 1e-3, hess_tol: float = 1e-3) -> dict:
    """Quadratic growth of ``h(t) = eta(gamma(t))`` along normal-fiber geodesics.

    For base points ``x`` in ``S`` and unit normal ``nu`` (normal to ``S`` in
    ``M``), the normal fiber at distance ``delta`` contains
    ``y = exp_x(delta nu)``.  From ``y`` geodesics ``gamma`` are shot with unit
    velocity tangent to the normal fiber, oriented so that ``h'(0) >= 0``, and
    ``c = min h(t) / t^2`` is fitted over times with ``gamma(t)`` inside the
    tube of radius ``2 delta``.
    The Hessian inequality ``d^2 eta(v,v) >= 0.9 |Pi v|^2 - 0.1 |(1 - Pi) v|^2``
    is checked at the points ``y``.
    """
    M = S.parent
    rng = np.random.default_rng(seed)
    ts = np.linspace(t_max / (n_t - 1), t_max, n_t - 1)
    per_delta = []
    c_min_all = np.inf
    hess_min_all = np.inf
    for delta in deltas:
        c_vals, hess_margins = [], []
        for _ in range(n_base):
            x = S.retract(M.retract(random_sphere(rng, M.ambient_dim)))
            Nb = np.linalg.svd(S.normal_projector_in_parent(x))[0][:, : M.dim - S.dim]
            nu = Nb @ random_sphere(rng, Nb.shape[1])
            y = M.exp(x, nu, delta)
            # normal fiber at y: exp_x of the normal space of S; its tangent there is
            # the parallel transport of that normal space along the radial geodesic
            F_tan = _normal_fiber_tangent(M, S, x, Nb, nu, delta)
            for _ in range(n_dirs):
                w = F_tan @ random_sphere(rng, F_tan.shape[1])
                w /= np.linalg.norm(w)
                # orient so that h'(0) >= 0
                if half_distance_sq(S, M.exp(y, w, 1e-4)) < half_distance_sq(S, M.exp(y, w, -1e-4)):
                    w = -w
                ratios = []
                for t in ts:
                    eta = half_distance_sq(S, M.exp(y, w, t))
                    if np.sqrt(2.0 * eta) >= 2.0 * delta:
                        break
                    ratios.append(eta / t**2)
                if ratios:
                    c_vals.append(float(np.min(ratios)))
                hess_margins.append(_hessian_margin(S, M, y, w, hess_h))
        c_min = float(np.min(c_vals)) if c_vals else np.nan
        hmin = float(np.min(hess_margins))
        c_min_all = min(c_min_all, c_min)
        hess_min_all = min(hess_min_all, hmin)
        per_delta.append({"delta": float(delta), "c_min": c_min, "hessian_margin_min": hmin})
    return {
        "c_claimed": c_claimed,
        "c_min": c_min_all,
        "c_ok": c_min_all >= c_claimed,
        "hessian_margin_min": hess_min_all,
        "hessian_ok": hess_min_all >= -hess_tol,
        "per_delta": per_delta,
    }


def _normal_fiber_tangent(M, S, x, Nb, nu, delta):
    """Tangent space at ``exp_x(delta nu)`` of ``{exp_x(w) : w normal to S at x}``."""
    cols = []
    h = 1e-5
    for e in Nb.T:
        wp = delta * nu + h * e
        wm = delta * nu - h * e
        cols.append((M.exp(x, wp, 1.0) - M.exp(x, wm, 1.0)) / (2 * h))
    Q, _ = np.linalg.qr(np.array(cols).T)
    return Q


def _hessian_margin(S, M, y, w, h):
    """``d^2 eta(w, w) - (0.9 |Pi w|^2 - 0.1 |(1 - Pi) w|^2)`` at ``y`` along the ``M``-geodesic."""
    e0 = half_distance_sq(S, y)
    ep = half_distance_sq(S, M.exp(y, w, h))
    em = half_distance_sq(S, M.exp(y, w, -h))
    d2 = (ep - 2 * e0 + em) / h**2
    p = closest_point(S, y).point
    # Pi at y: projection onto the radial (normal-fiber) directions, i.e. ker of
    # the differential of the closest-point map
    Pi = _radial_projector(S, M, y, p)
    Pw = Pi @ w
    rest = w - Pw
    return float(d2 - (0.9 * Pw @ Pw - 0.1 * rest @ rest))


def _radial_projector(S, M, y, p, h: float = 1e-5):
    T = M.tangent_basis(y)
    cols = []
    for e in T.T:
        yp = M.retract(y + h * e)
        ym = M.retract(y - h * e)
        cols.append((closest_point(S, yp).point - closest_point(S, ym).point) / (2 * h))
    Dp = np.array(cols).T
    _, s, Vt = np.linalg.svd(Dp)
    r = int(np.sum(s > 1e-6 * max(1.0, s[0])))
    K = T @ Vt[r:].T
    return K @ K.T
