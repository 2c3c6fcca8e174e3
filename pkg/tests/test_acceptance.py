"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a one-line PASS/FAIL summary (printed at the end of the run)
before asserting.  Run alone with ``pytest tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import latitude_ii
from pullgeom.algebra import dual_hopf, hopf, omul, qmul, random_sphere, random_unit_quaternion
from pullgeom.cli import main
from pullgeom.experiments import (
    aflat_kernel, degenerate, fiber_geodesy, flat_rigidity, graph_metric_agreement,
    hopf_fatness, radial_projection, sp2_biinvariant, stability_probe,
)
from pullgeom.geometry import linear_slice, sphere
from pullgeom.mapzoo import sp2_random
from pullgeom.obstruction import FAIL_FLOOR, PASS_TOL


def record(n: int, ok: bool, detail: str, t0: float, budget: float) -> None:
    elapsed = time.perf_counter() - t0
    status = "PASS" if ok else "FAIL"
    line = f"criterion {n:2d}: {status}  {detail}  [{elapsed:.1f}s of {budget:.0f}s]"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def test_criterion_01_algebra_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {"quat": 0.0, "oct": 0.0, "hopf": 0.0, "sp2": 0.0}
    for _ in range(1000):
        p, q = random_unit_quaternion(rng), random_unit_quaternion(rng)
        worst["quat"] = max(worst["quat"], abs(np.linalg.norm(qmul(p, q)) - 1.0))
        a, b = random_sphere(rng, 8), random_sphere(rng, 8)
        worst["oct"] = max(worst["oct"], abs(np.linalg.norm(omul(a, b)) - 1.0))
        ar = np.concatenate([qmul(a[:4], p), qmul(a[4:], p)])
        al = np.concatenate([qmul(p, a[:4]), qmul(p, a[4:])])
        worst["hopf"] = max(worst["hopf"], np.linalg.norm(hopf(ar) - hopf(a)),
                            np.linalg.norm(dual_hopf(al) - dual_hopf(a)))
        g = sp2_random(rng)
        worst["sp2"] = max(worst["sp2"], np.linalg.norm(hopf(g.second_column) + hopf(g.first_column)))
    ok = max(worst.values()) < 1e-12
    record(1, ok, "max residuals " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()), t0, 1)


def test_criterion_02_curvature_engine():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    err_a = err_fd = sym = 0.0
    for n in (2, 3, 4, 7):
        for analytic in (True, False):
            M = sphere(n, analytic=analytic)
            for _ in range(5):
                x = random_sphere(rng, n + 1)
                E = M.tangent_basis(x)
                X, Y, Z, W = (E @ rng.standard_normal(n) for _ in range(4))
                e = abs(M.sectional_curvature(x, X, Y) - 1.0)
                if analytic:
                    err_a = max(err_a, e)
                    R = M.curvature_tensor
                    sym = max(sym, abs(R(x, X, Y, Z, W) + R(x, Y, X, Z, W)),
                              abs(R(x, X, Y, Z, W) - R(x, Z, W, X, Y)),
                              abs(R(x, X, Y, Z, W) + R(x, Y, Z, X, W) + R(x, Z, X, Y, W)))
                else:
                    err_fd = max(err_fd, e)
    lat = 0.0
    for theta in np.linspace(0.2, 2.9, 10):
        S = linear_slice(sphere(2), np.array([[0.0, 0.0, 1.0]]), [-np.cos(theta)])
        x = np.array([np.sin(theta), 0.0, np.cos(theta)])
        X = np.array([0.0, 1.0, 0.0])
        ii = np.linalg.norm(S.relative_second_fundamental_form(x, X, X))
        lat = max(lat, abs(ii - abs(latitude_ii(theta))))
    ok = err_a < 1e-8 and err_fd < 1e-5 and lat < 1e-6 and sym < 1e-9
    record(2, ok, f"K-1 analytic {err_a:.1e}, fd {err_fd:.1e}; |II|-cot {lat:.1e}; "
                  f"symmetries {sym:.1e}", t0, 10)


def test_criterion_03_sp2_biinvariance():
    t0 = time.perf_counter()
    out = sp2_biinvariant(seed=3, samples=100, geodesics=10)
    m = out.measures
    ok = out.verdict == "pass"
    record(3, ok, f"isometry {m['isometry_residual']:.1e}, membership "
                  f"{m['membership_residual']:.1e}, geodesic vs exp {m['geodesic_subgroup_error']:.1e}",
           t0, 30)


def test_criterion_04_oneill_machinery():
    t0 = time.perf_counter()
    out = hopf_fatness(seed=4, samples=100)
    m = out.measures
    record(4, out.verdict == "pass",
           f"evaluators hopf {m['evaluator_disagreement_hopf']:.1e} sp2 "
           f"{m['evaluator_disagreement_sp2']:.1e}; vertizontal-1 {m['vertizontal_error']:.1e}; "
           f"kernel dim {m['aflat_kernel_max_dim']}", t0, 60)


def test_criterion_05_aflat_pipeline():
    t0 = time.perf_counter()
    out = aflat_kernel(seed=5, samples=20, leaves=2, field_points=5)
    m = out.measures
    record(5, out.verdict == "pass",
           f"kernel dims {m['kernel_dims']}, angle {m['max_principal_angle']:.1e}, leaf |II| "
           f"{m['leaf_max_ii']:.1e}, accel {m['acceleration_a_norm']:.1e}, bracket "
           f"{m['bracket_a_norm']:.1e}", t0, 120)


def test_criterion_06_flat_rigidity():
    t0 = time.perf_counter()
    out = flat_rigidity(seed=6, samples=100)
    m = out.measures
    record(6, out.verdict == "pass",
           f"max K {m['max_sectional_curvature']:.1e}, max |R(X,U)X| "
           f"{m['max_rigidity_residual']:.1e}, min sweep {m['min_sweep']:.1e}", t0, 60)


def _margin_ok(measures, expect):
    vals = (measures["max_ii"], measures["geodesic_deviation"])
    if expect == "pass":
        return all(v < PASS_TOL / 10 for v in vals)
    return all(v > 10 * FAIL_FLOOR for v in vals)


def test_criterion_07_example_verdicts():
    t0 = time.perf_counter()
    cases = [
        ("hopf", dict(map="sp2"), "pass"),
        ("wilhelm", dict(map="wilhelm", param=2), "pass"),
        ("rigas-regular", dict(map="rigas", param=2), "pass"),
        ("rigas-meridian", dict(map="rigas", param=2, which="meridian"), "fail"),
    ]
    parts, ok = [], True
    for label, kw, expect in cases:
        out = fiber_geodesy(seed=7, samples=60, **kw)
        good = out.verdict == expect and _margin_ok(out.measures, expect)
        ok &= good
        parts.append(f"{label} {out.verdict} (|II| {out.measures['max_ii']:.2g}, expected {expect})")
    record(7, ok, "; ".join(parts), t0, 300)


def test_criterion_08_cayley_degeneration():
    t0 = time.perf_counter()
    theta_end = float(np.arccos(-0.9999))
    out = degenerate(param=2, theta_start=3.0, theta_end=theta_end, steps=10, seed=8,
                     samples=200, scan_samples=300)
    m = out.measures
    ok = m["bound_ok"] and m["shrinks"] and m["singular_clusters_at_south_pole"]
    record(8, ok, f"bound holds {m['bound_ok']} (min eta {m['eta_min']:.3g}); max|b|^2 at "
                  f"cos=-0.9999 is {m['final_max_b_sq']:.4f} (needs < 1e-3); singular images only "
                  f"at (-1,0) {m['singular_clusters_at_south_pole']}", t0, 180)


def test_criterion_09_exotic_8_sphere():
    t0 = time.perf_counter()
    out = radial_projection(seed=9, samples=30, scan_samples=1000)
    m = out.measures
    ok = (m["rank_histogram"] == {"4": 1000} and m["singular_clusters_at_south_pole"]
          and m["fiber_dim"] == 4 and m["target_dim"] == 3 and not m["immersion"]
          and "dimension" in m["reason"])
    record(9, ok, f"ranks {m['rank_histogram']}, singular images at (-1,0) "
                  f"{m['singular_clusters_at_south_pole']}, {m['fiber_dim']}-vs-{m['target_dim']} "
                  f"obstruction reported", t0, 120)


def test_criterion_10_stability_probe():
    t0 = time.perf_counter()
    out = stability_probe(seed=10)
    m = out.measures
    record(10, out.verdict == "pass",
           f"fitted c_min {m['c_min']:.3f} (>= 0.2), Hessian margin {m['hessian_margin_min']:.3g}",
           t0, 120)


def test_criterion_11_graph_metric_agreement():
    t0 = time.perf_counter()
    out = graph_metric_agreement(seed=11)
    cases = out.measures["cases"]
    record(11, out.verdict == "pass",
           "; ".join(f"k={c['k']} round {c['round_verdict']} graph {c['graph_verdict']}"
                     for c in cases), t0, 120)


SMALL_RUNS = [
    ["sp2-biinvariant", "--samples", "5"],
    ["hopf-fatness", "--samples", "5"],
    ["aflat-kernel", "--samples", "2"],
    ["flat-rigidity", "--samples", "5"],
    ["fiber-geodesy", "--map", "kervaire", "--n", "1", "--samples", "12"],
    ["degenerate", "--steps", "2", "--samples", "20"],
    ["radial-projection", "--samples", "5"],
    ["stability-probe", "--deltas", "0.1"],
    ["graph-metric-agreement", "--samples", "8"],
]


def test_criterion_12_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    differing = []
    for args in SMALL_RUNS:
        for d in ("a", "b"):
            assert main(args + ["--format", "both", "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    for name in files:
        if (tmp_path / "a" / name).read_bytes() != (tmp_path / "b" / name).read_bytes():
            differing.append(name)
    record(12, not differing and len(files) >= len(SMALL_RUNS),
           f"{len(files)} report files from {len(SMALL_RUNS)} experiments, "
           f"{len(differing)} differ", t0, 600)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
