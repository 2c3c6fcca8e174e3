import numpy as np
import pytest

from oracles import great_circle_chordal
from pullgeom.algebra import random_sphere
from pullgeom.errors import PreconditionError
from pullgeom.geometry import closest_point, linear_slice, sphere
from pullgeom.mapzoo import (
    cayley_map, fiber_sample, rigas_map, rigas_meridian_map, sp2_map, wilhelm_map,
)
from pullgeom.obstruction import (
    FAIL_FLOOR, PASS_TOL, aflat_leaf_geodesy, classify, degeneration_trace, great_circle_eta,
    great_circle_s3, radial_projection_immersion_test, stability_bound_probe,
    totally_geodesic_test,
)
from pullgeom.submersion import PullbackBundle, TrivialBundle, sp2_pullback_bundle

# |II| of the rigas meridian preimage, measured with the finite-difference-free
# Gauss formula on 40 points (seed 0) and cross-checked by geodesic shooting
MERIDIAN_II = 0.974


def test_classify_bands():
    assert classify([1e-6, 1e-7]) == "pass"
    assert classify([1e-6, 0.5]) == "fail"
    assert classify([1e-3]) == "indeterminate"
    assert PASS_TOL == 1e-4 and FAIL_FLOOR == 1e-2


def test_hopf_fibers_totally_geodesic():
    z = sp2_map()
    fs = fiber_sample(z, np.array([0.0, 0.6, 0.0, 0.8, 0.0]), count=30, seed=0)
    v = totally_geodesic_test(z.domain, fs, pairs=10)
    assert v.verdict == "pass" and v.max_ii < 1e-5 and v.measures_agree


def test_rigas_regular_pass_and_meridian_fail():
    z = rigas_map(2)
    b = np.concatenate([[0.0], np.array([0, 1, 0, 1]) / np.sqrt(2)])
    v = totally_geodesic_test(z.domain, fiber_sample(z, b, count=30, seed=0), pairs=10)
    assert v.verdict == "pass" and v.max_ii < PASS_TOL / 10
    zm = rigas_meridian_map()
    fs = fiber_sample(zm, np.zeros(2), count=40, seed=0)
    v = totally_geodesic_test(zm.domain, fs, pairs=20)
    assert v.verdict == "fail" and v.max_ii > 10 * FAIL_FLOOR
    assert abs(v.max_ii - MERIDIAN_II) < 0.01
    assert v.geodesic_deviation > 10 * FAIL_FLOOR


def test_wilhelm_fibers_real_targets_pass():
    z = wilhelm_map(2)
    for b in (np.eye(5)[0], np.eye(5)[1]):
        fs = fiber_sample(z, b, count=20, seed=0)
        assert totally_geodesic_test(z.domain, fs, pairs=5).verdict == "pass"


def test_singular_fiber_is_indeterminate():
    z = sp2_map()
    fs = fiber_sample(z, np.eye(5)[1], count=5, seed=0)
    fs.singular[0] = True
    assert totally_geodesic_test(z.domain, fs).verdict == "indeterminate"


def test_degeneration_trace_identity():
    z = cayley_map(2)
    tr = degeneration_trace(z, [2.5, 3.0], count=40, seed=0)
    assert tr.eta_min == 0.0
    assert np.all(np.isinf(tr.bound)) and tr.bound_ok()
    assert np.max(tr.identity_residual) < 1e-10
    rows = list(tr.rows())
    assert set(rows[0]) >= {"theta", "max_b_sq", "bound", "min_dist_singular"}
    with pytest.raises(PreconditionError):
        degeneration_trace(rigas_map(2), [3.0])


def test_degeneration_n1_follows_constant_eta():
    """For n = 1, eta is identically 2, so |b|^2 = (1 + cos theta) / 2 on the whole fiber."""
    tr = degeneration_trace(cayley_map(1), [3.1], count=30, seed=0)
    assert tr.eta_min == 2.0
    assert abs(tr.max_b_sq[0] - (1 + np.cos(3.1)) / 2) < 1e-10
    assert tr.bound_ok()


def test_radial_projection_dimension_obstruction():
    z = sp2_map()
    fs = fiber_sample(z, np.eye(5)[1], count=5, seed=0)
    S = linear_slice(sphere(7), np.eye(8)[4:6])
    out = radial_projection_immersion_test(S, fs)
    assert S.dim == 5 and out["fiber_dim"] == 3
    core = linear_slice(sphere(7), np.eye(8)[2:])
    out = radial_projection_immersion_test(core, fs)
    assert not out["immersion"] and "dimension" in out["reason"]


def test_radial_projection_parallel_hopf_fibers():
    z = sp2_map()
    S = fiber_sample(z, np.array([0.0, 1.0, 0, 0, 0]), count=3, seed=0).manifold
    near = np.array([0.1, np.sqrt(0.99), 0, 0, 0])
    L = fiber_sample(z, near, count=20, seed=1)
    out = radial_projection_immersion_test(S, L, max_points=10)
    assert out["immersion"] and out["rank_profile"] == {3: out["evaluated_points"]}


def test_aflat_leaves_sp2_and_trivial(rng):
    v = aflat_leaf_geodesy(sp2_pullback_bundle(), random_sphere(rng, 8), directions=2, steps=10)
    assert v.verdict == "pass" and v.max_ii < 1e-5
    B = TrivialBundle(sphere(2), lambda r: random_sphere(r, 3))
    v = aflat_leaf_geodesy(B, np.array([1.0, 0, 0]), directions=2, steps=6, pairs=2)
    assert v.verdict == "pass"


def test_aflat_leaf_on_singular_stratum_fails():
    z = rigas_map(2)
    B = PullbackBundle(sphere(7), z.F, M_sampler=lambda r: random_sphere(r, 8))
    fs = fiber_sample(rigas_meridian_map(), np.zeros(2), count=3, seed=0)
    v = aflat_leaf_geodesy(B, fs.points[0], stratum=fs.manifold, directions=2, steps=10, pairs=3)
    assert v.verdict == "fail"


def test_great_circle_eta_oracle(rng):
    S = great_circle_s3()
    for _ in range(10):
        x = random_sphere(rng, 4)
        if np.hypot(x[0], x[1]) < 0.2:
            continue
        d = closest_point(S, x).distance
        assert abs(d - great_circle_chordal(x)) < 1e-10
        assert abs(0.5 * d**2 - great_circle_eta(x)) < 1e-10


def test_stability_probe_small_delta():
    out = stability_bound_probe(great_circle_s3(), [0.1], n_base=2, n_dirs=2, seed=3)
    assert out["c_ok"] and out["c_min"] >= 0.2
    assert out["hessian_ok"]
