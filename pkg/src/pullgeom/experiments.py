"""Experiment bodies behind the command line.

Each experiment takes keyword parameters (already merged from defaults, config
file and flags) and returns an :class:`Outcome`.  Nothing here touches the
filesystem; writing reports is the caller's job.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algebra import qmat_from_columns, qmat_mul, qmat_to_columns, random_sphere
from .geometry import Submanifold, linear_slice, sp2_algebra_basis, sp2_expm, sphere
from .mapzoo import (
    FiberSample, fiber_sample, kervaire_fiber, make_map, rigas_meridian_map, singular_value_scan,
    sp2_identity, sp2_random,
)
from .obstruction import (
    FAIL_FLOOR, PASS_TOL, aflat_leaf_geodesy, degeneration_trace, great_circle_s3,
    radial_projection_immersion_test, stability_bound_probe, totally_geodesic_test,
)
from .submersion import (
    HopfBundle, a_flat_acceleration_check, a_flat_bracket_check, a_flat_kernel,
    flat_section_rigidity_check, graph_embed, graph_manifold, graph_tangent, principal_angles,
    sp2_pullback_bundle, vertizontal_curvature,
)
from .smooth import compose, linear_map


@dataclass
class Outcome:
    verdict: str
    measures: dict
    samples: int
    tables: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Experiment:
    name: str
    claim: str
    anchor: str
    defaults: dict
    run: Callable[..., Outcome]
    maps: tuple = ()


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


def _unit(v):
    return v / np.linalg.norm(v)


# Sp(2)


def sp2_biinvariant(seed: int = 0, samples: int = 100, geodesics: int = 10,
                    dt: float = 1e-2, tol: float = 1e-5) -> Outcome:
    """Left and right Sp(2) translations are isometries of the pullback total space."""
    rng = np.random.default_rng(seed)
    T = sp2_pullback_bundle().total
    member = iso = tangency = 0.0
    for _ in range(samples):
        G = qmat_from_columns(sp2_random(rng).to_array())
        x = sp2_random(rng).to_array()
        E = T.tangent_basis(x)
        v, w = E @ rng.standard_normal(E.shape[1]), E @ rng.standard_normal(E.shape[1])
        X = qmat_from_columns(x)
        for act in (lambda A: qmat_mul(G, A), lambda A: qmat_mul(A, G)):
            gx = qmat_to_columns(act(X))
            gv = qmat_to_columns(act(qmat_from_columns(v)))
            gw = qmat_to_columns(act(qmat_from_columns(w)))
            member = max(member, T.residual(gx))
            iso = max(iso, abs(gv @ gw - v @ w))
            tangency = max(tangency, float(np.linalg.norm(gv - T.tangent_project(gx, gv))))
    e = sp2_identity().to_array()
    basis = sp2_algebra_basis()
    geo_err = 0.0
    for _ in range(geodesics):
        Xa = np.tensordot(random_sphere(rng, len(basis)), basis, axes=1)
        v = qmat_to_columns(Xa)
        _, xs, _ = T.geodesic_path(e, v, 1.0, dt)
        geo_err = max(geo_err, float(np.linalg.norm(xs[-1] - qmat_to_columns(sp2_expm(Xa)))))
    measures = {
        "membership_residual": member,
        "isometry_residual": iso,
        "tangency_residual": tangency,
        "geodesic_subgroup_error": geo_err,
    }
    ok = max(member, iso, tangency, geo_err) < tol
    return Outcome(_verdict(ok), measures, samples)


# O'Neill tensor on the Hopf bundle


def hopf_fatness(seed: int = 0, samples: int = 100, tol: float = 1e-5,
                 curvature_tol: float = 1e-3) -> Outcome:
    """A-tensor evaluators agree; vertizontal curvature is 1; no nonzero A-flat vectors."""
    rng = np.random.default_rng(seed)
    agree = {}
    hopf = HopfBundle()
    for label, B in (("hopf", hopf), ("sp2", sp2_pullback_bundle())):
        worst = 0.0
        for _ in range(samples):
            p = B.random_point(rng)
            H = B.horizontal_space(p)
            X = H @ rng.standard_normal(H.shape[1])
            Y = H @ rng.standard_normal(H.shape[1])
            closed = B.a_tensor(p, X, Y)
            for method in ("projection", "curvature_form"):
                worst = max(worst, float(np.linalg.norm(B.a_tensor(p, X, Y, method) - closed)))
        agree[label] = worst
    vz_err = direct_err = 0.0
    kernel_dims = []
    for _ in range(samples):
        p = hopf.random_point(rng)
        H, V = hopf.horizontal_space(p), hopf.vertical_space(p)
        X = _unit(H @ rng.standard_normal(H.shape[1]))
        U = _unit(V @ rng.standard_normal(V.shape[1]))
        vz_err = max(vz_err, abs(vertizontal_curvature(hopf, p, X, U) - 1.0))
        direct_err = max(direct_err, abs(hopf.total.sectional_curvature(p, X, U) - 1.0))
        kernel_dims.append(a_flat_kernel(hopf, p).dim)
    measures = {
        "evaluator_disagreement_hopf": agree["hopf"],
        "evaluator_disagreement_sp2": agree["sp2"],
        "vertizontal_error": vz_err,
        "total_space_curvature_error": direct_err,
        "aflat_kernel_max_dim": int(max(kernel_dims)),
    }
    ok = (max(agree.values()) < tol and max(vz_err, direct_err) < curvature_tol
          and max(kernel_dims) == 0)
    return Outcome(_verdict(ok), measures, samples)


# A-flat distribution of the Sp(2) pullback


def _kernel_of_base_map(B, m):
    E = B.base.tangent_basis(m)
    J = B.f.jacobian(m) @ E
    _, s, Vt = np.linalg.svd(J)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    return E @ Vt[r:].T


def aflat_kernel(seed: int = 0, samples: int = 20, leaves: int = 2, field_points: int = 5,
                 angle_tol: float = 1e-4, leaf_tol: float = 1e-5, accel_tol: float = 1e-4) -> Outcome:
    """A-flat kernel dimension, its agreement with ``ker d(f)``, leaf geodesy and closure."""
    rng = np.random.default_rng(seed)
    B = sp2_pullback_bundle()
    dims, angles = [], []
    for _ in range(samples):
        m = random_sphere(rng, 8)
        D = a_flat_kernel(B, B.point_over(m))
        dims.append(D.dim)
        K = _kernel_of_base_map(B, m)
        if D.dim == K.shape[1]:
            angles.append(float(np.max(principal_angles(D.basis, K), initial=0.0)))
        else:
            angles.append(np.pi / 2)
    leaf = [aflat_leaf_geodesy(B, random_sphere(rng, 8), seed=seed + i) for i in range(leaves)]
    w1, w2 = rng.standard_normal(8), rng.standard_normal(8)

    def field_for(w):
        def X(m):
            D = a_flat_kernel(B, B.point_over(m))
            return D.basis @ (D.basis.T @ w)
        return X

    pts = [random_sphere(rng, 8) for _ in range(field_points)]
    acc = a_flat_acceleration_check(B, pts, field_for(w1), accel_tol=accel_tol)
    br = a_flat_bracket_check(B, pts, field_for(w1), field_for(w2), tol=accel_tol)
    leaf_ii = max(v.max_ii for v in leaf)
    leaf_dev = max(v.geodesic_deviation for v in leaf)
    measures = {
        "kernel_dims": sorted(set(dims)),
        "max_principal_angle": max(angles),
        "leaf_max_ii": leaf_ii,
        "leaf_geodesic_deviation": leaf_dev,
        "leaf_verdicts": [v.verdict for v in leaf],
        "field_a_norm": acc["field_a_norm"],
        "acceleration_a_norm": acc["acceleration_a_norm"],
        "bracket_a_norm": br["bracket_a_norm"],
    }
    ok = (set(dims) == {3} and max(angles) < angle_tol and leaf_ii < leaf_tol
          and all(v.verdict == "pass" for v in leaf) and acc["ok"] and br["ok"])
    return Outcome(_verdict(ok), measures, samples)


def flat_rigidity(seed: int = 0, samples: int = 100, flat_tol: float = 1e-5,
                  rigidity_tol: float = 1e-4, sweep_tol: float = 1e-6) -> Outcome:
    """Flat planes spanned by A-flat and vertical vectors in the bi-invariant Sp(2)."""
    rng = np.random.default_rng(seed)
    B = sp2_pullback_bundle()
    Ks, rs, sweeps = [], [], []
    for _ in range(samples):
        p = B.random_point(rng)
        D = a_flat_kernel(B, p)
        X = _unit(B.lift(p, D.basis @ rng.standard_normal(D.dim)))
        V = B.vertical_space(p)
        U = _unit(V @ rng.standard_normal(V.shape[1]))
        out = flat_section_rigidity_check(B.total, p, X, U, flat_tol, rigidity_tol, sweep_tol)
        Ks.append(out["sectional_curvature"])
        rs.append(out["rigidity_residual"])
        sweeps.append(out["sweep_min"])
    measures = {
        "max_sectional_curvature": max(Ks),
        "max_rigidity_residual": max(rs),
        "min_sweep": min(sweeps),
    }
    ok = max(Ks) < flat_tol and max(rs) < rigidity_tol and min(sweeps) >= -sweep_tol
    return Outcome(_verdict(ok), measures, samples)


# fibers of the example maps


def _random_target(zmap, rng):
    d = zmap.codomain_ambient_dim
    return random_sphere(rng, d) if zmap.sphere_codomain else rng.standard_normal(d)


def sample_fiber(map_name: str, param: Optional[int], which: str, samples: int, seed: int,
                 target=None) -> tuple:
    """The zoo map, its fiber sample, and the manifold it lives in."""
    rng = np.random.default_rng(seed)
    if which == "meridian":
        if map_name != "rigas":
            raise ValueError("--which meridian is only defined for the rigas map")
        zmap = rigas_meridian_map()
        b = np.zeros(2) if target is None else np.asarray(target, float)
        return zmap, fiber_sample(zmap, b, count=samples, seed=seed)
    zmap = make_map(map_name, param)
    b = _random_target(zmap, rng) if target is None else np.asarray(target, float)
    if map_name == "kervaire":
        n_dirs = max(1, samples // 4)
        lambdas = -rng.uniform(0.05, 0.95, size=4)
        return zmap, kervaire_fiber(zmap.param, b, np.sort(lambdas), n_dirs=n_dirs, seed=seed)
    return zmap, fiber_sample(zmap, b, count=samples, seed=seed)


def _fiber_rows(fs: FiberSample) -> list[dict]:
    rows = []
    for x, lab, c in zip(fs.points, fs.labels, fs.conditions):
        row = {f"x{i}": float(v) for i, v in enumerate(x)}
        row["component"] = int(lab)
        row["frame_cond"] = float(c)
        rows.append(row)
    return rows


def fiber_geodesy(map: str = "rigas", param: Optional[int] = None, which: str = "regular",
                  target=None, seed: int = 0, samples: int = 60, pairs: int = 20,
                  pass_tol: float = PASS_TOL, fail_floor: float = FAIL_FLOOR) -> Outcome:
    """Totally-geodesic verdict for one fiber of an example map."""
    zmap, fs = sample_fiber(map, param, which, samples, seed, target)
    v = totally_geodesic_test(zmap.domain, fs, pairs=pairs, seed=seed, pass_tol=pass_tol,
                              fail_floor=fail_floor, fiber_id=f"{zmap.label}:{which}")
    measures = v.to_dict()
    measures.update({
        "target": [float(t) for t in fs.target],
        "fiber_dim": int(fs.manifold.dim),
        "components": fs.n_components,
        "max_residual": float(fs.residuals().max()),
    })
    return Outcome(v.verdict, measures, len(fs.points), tables={"fiber": _fiber_rows(fs)},
                   params={"map": zmap.label})


# exotic spheres


def degenerate(map: str = "cayley", param: Optional[int] = 2, theta_start: float = 3.0,
               theta_end: float = 3.14, steps: int = 20, seed: int = 0, samples: int = 200,
               scan_samples: int = 300, bound_tol: float = 1e-6, shrink_tol: float = 1e-3) -> Outcome:
    """Fiber size along ``(cos theta, sin theta)`` approaching the south pole."""
    if map != "cayley":
        raise ValueError("degenerate is defined for the cayley map only")
    zmap = make_map(map, param)
    thetas = np.linspace(theta_start, theta_end, steps)
    tr = degeneration_trace(zmap, thetas, count=samples, seed=seed)
    scan = singular_value_scan(zmap, scan_samples, seed=seed)
    south = np.array([-1.0, 0.0, 0.0, 0.0, 0.0])
    centers = [c["center"] for c in scan["clusters"]]
    measures = {
        "eta_min": tr.eta_min,
        "bound_ok": tr.bound_ok(bound_tol),
        "monotone": tr.monotone(),
        "final_max_b_sq": float(tr.max_b_sq[-1]),
        "shrinks": bool(tr.max_b_sq[-1] < shrink_tol),
        "max_identity_residual": float(tr.identity_residual.max()),
        "regular_rank": scan["regular_rank"],
        "singular_cluster_centers": [[float(v) for v in c] for c in centers],
        "singular_clusters_at_south_pole": bool(centers) and all(
            np.linalg.norm(c - south) < 1e-3 for c in centers),
    }
    ok = measures["bound_ok"] and measures["shrinks"]
    return Outcome(_verdict(ok), measures, samples * steps, tables={"trace": list(tr.rows())},
                   params={"map": zmap.label})


def _susp8_core() -> Submanifold:
    L = np.zeros((5, 9))
    L[np.arange(5), np.arange(4, 9)] = 1.0
    return linear_slice(sphere(8), L, name="core-S3")


def radial_projection(seed: int = 0, samples: int = 30, scan_samples: int = 1000) -> Outcome:
    """Regular rank of the suspended map, its singular images, and the immersion test."""
    zmap = make_map("susp8")
    rng = np.random.default_rng(seed)
    scan = singular_value_scan(zmap, scan_samples, seed=seed)
    fs = fiber_sample(zmap, _random_target(zmap, rng), count=samples, seed=seed)
    imm = radial_projection_immersion_test(_susp8_core(), fs, seed=seed)
    south = np.array([-1.0, 0.0, 0.0, 0.0, 0.0])
    centers = [c["center"] for c in scan["clusters"]]
    measures = {
        "rank_histogram": {str(k): v for k, v in scan["rank_histogram"].items()},
        "regular_rank": scan["regular_rank"],
        "singular_cluster_centers": [[float(v) for v in c] for c in centers],
        "singular_clusters_at_south_pole": bool(centers) and all(
            np.linalg.norm(c - south) < 1e-3 for c in centers),
        **{k: v for k, v in imm.items() if k != "rank_profile"},
        "rank_profile": {str(k): v for k, v in imm["rank_profile"].items()},
    }
    return Outcome(_verdict(imm["immersion"]), measures, scan_samples,
                   params={"map": zmap.label})


# distance function near a great circle


def stability_probe(seed: int = 0, deltas=(0.05, 0.1, 0.2, 0.3, 0.4), n_base: int = 6,
                    n_dirs: int = 4) -> Outcome:
    """Quadratic growth of the distance-squared function along normal-fiber geodesics."""
    out = stability_bound_probe(great_circle_s3(), list(deltas), n_base=n_base, n_dirs=n_dirs,
                                seed=seed)
    rows = out.pop("per_delta")
    ok = out["c_ok"] and out["hessian_ok"]
    return Outcome(_verdict(ok), out, len(rows) * n_base * n_dirs, tables={"deltas": rows})


# graph metric


def _graph_fiber(fs: FiberSample, zmap, scale: float) -> tuple:
    G = graph_manifold(zmap.domain, zmap.F, scale)
    N = zmap.domain.ambient_dim
    selM = np.hstack([np.eye(N), np.zeros((N, zmap.F.out_dim))])
    extra = compose(zmap.chart(fs.target), compose(zmap.F, linear_map(selM)))
    S = Submanifold(G, extra, name=f"graph {fs.manifold.name}")
    pts = np.array([graph_embed(zmap.F, x, scale) for x in fs.points])
    frames = np.array([
        np.linalg.qr(np.array([graph_tangent(zmap.F, x, e, scale) for e in fr.T]).T)[0]
        for x, fr in zip(fs.points, fs.frames)
    ])
    gfs = FiberSample(fs.target, pts, frames, fs.labels, fs.conditions, fs.singular, S, None)
    return G, gfs


def graph_metric_agreement(seed: int = 0, samples: int = 30, ks=(1, 2), scale: float = 0.5,
                           pairs: int = 10) -> Outcome:
    """Totally-geodesic verdicts of Rigas fibers in the round and in the graph metric."""
    rows = []
    for i, k in enumerate(ks):
        zmap, fs = sample_fiber("rigas", k, "regular", samples, seed + i)
        a = totally_geodesic_test(zmap.domain, fs, pairs=pairs, seed=seed)
        G, gfs = _graph_fiber(fs, zmap, scale)
        b = totally_geodesic_test(G, gfs, pairs=pairs, seed=seed)
        rows.append({
            "k": int(k),
            "round_verdict": a.verdict, "round_max_ii": a.max_ii,
            "round_deviation": a.geodesic_deviation,
            "graph_verdict": b.verdict, "graph_max_ii": b.max_ii,
            "graph_deviation": b.geodesic_deviation,
            "agree": a.verdict == b.verdict,
        })
    ok = all(r["agree"] for r in rows)
    return Outcome(_verdict(ok), {"cases": rows}, samples * len(ks), tables={"cases": rows})


MAP_CHOICES = ("sp2", "wilhelm", "rigas", "cayley", "susp8", "kervaire")

EXPERIMENTS = {
    e.name: e for e in [
        Experiment("sp2-biinvariant",
                   "the pullback metric on Sp(2) is bi-invariant",
                   "examples: Sp(2) as a pullback of the Hopf bundle",
                   {"samples": 100, "geodesics": 10}, sp2_biinvariant),
        Experiment("hopf-fatness",
                   "the quaternionic Hopf bundle is non-degenerate with unit vertizontal curvature",
                   "definitions: non-degenerate submersions",
                   {"samples": 100}, hopf_fatness),
        Experiment("aflat-kernel",
                   "A-flat vectors of the Sp(2) pullback span ker d(a.h) and integrate to totally geodesic leaves",
                   "flat vertizontal sections: A-flat acceleration and involutivity",
                   {"samples": 20, "leaves": 2, "field_points": 5}, aflat_kernel),
        Experiment("flat-rigidity",
                   "a flat plane in non-negative curvature has R(X,U)X = 0",
                   "flat vertizontal sections: curvature lemma",
                   {"samples": 100}, flat_rigidity),
        Experiment("fiber-geodesy",
                   "fibers of the example maps are (or are not) totally geodesic",
                   "examples: Wilhelm, Rigas, Cayley, suspended Hopf and Kervaire maps",
                   {"map": "rigas", "param": None, "which": "regular", "samples": 60, "pairs": 20},
                   fiber_geodesy, MAP_CHOICES),
        Experiment("degenerate",
                   "Cayley fibers shrink onto the singular meridian near the south pole",
                   "examples: exotic 7-spheres, shrinkage formula",
                   {"map": "cayley", "param": 2, "theta_start": 3.0, "theta_end": 3.14,
                    "steps": 20, "samples": 200, "scan_samples": 300},
                   degenerate, ("cayley",)),
        Experiment("radial-projection",
                   "radial projection cannot immerse 4-dimensional fibers into the 3-dimensional core",
                   "examples: exotic 8-sphere; stability: radial projection",
                   {"samples": 30, "scan_samples": 1000}, radial_projection, ("susp8",)),
        Experiment("stability-probe",
                   "the distance-squared function grows at least like t^2/5 along normal fibers",
                   "stability: the distance-squared function",
                   {"deltas": [0.05, 0.1, 0.2, 0.3, 0.4], "n_base": 6, "n_dirs": 4},
                   stability_probe),
        Experiment("graph-metric-agreement",
                   "totally geodesic fibers agree between the round and the graph metric",
                   "pullback geometry: totally geodesic in the graph",
                   {"samples": 30, "ks": [1, 2], "scale": 0.5}, graph_metric_agreement),
    ]
}
