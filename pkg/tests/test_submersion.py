import numpy as np
import pytest

from pullgeom.algebra import qmul, random_sphere
from pullgeom.errors import PreconditionError
from pullgeom.geometry import flat_torus, product, sphere
from pullgeom.mapzoo import rigas_map, sp2_identity
from pullgeom.smooth import linear_map
from pullgeom.submersion import (
    HopfBundle, PullbackBundle, TrivialBundle, a_flat_acceleration_check, a_flat_bracket_check,
    a_flat_kernel, a_flat_rank_scan, a_operator_norm, flat_section_rigidity_check,
    graph_metric_inner, hopf_section, principal_angles, sp2_pullback_bundle,
    vertizontal_curvature,
)


@pytest.fixture(scope="module")
def hopf():
    return HopfBundle()


@pytest.fixture(scope="module")
def sp2():
    return sp2_pullback_bundle()


def _unit(v):
    return v / np.linalg.norm(v)


def test_hopf_vertical_and_isometry(hopf, rng):
    p = hopf.random_point(rng)
    V = hopf.vertical_space(p)
    assert V.shape == (8, 3)
    assert np.max(np.abs(hopf.dpi(p) @ V)) < 1e-10
    H = hopf.horizontal_space(p)
    D = hopf.dpi(p) @ H
    assert np.allclose(D.T @ D, np.eye(4), atol=1e-8)


def test_hopf_section(rng):
    for _ in range(20):
        b = random_sphere(rng, 5)
        p = hopf_section(b)
        assert np.isclose(np.linalg.norm(p), 1.0)
        assert np.allclose(HopfBundle().projection(p), b / 2)


def test_sp2_vertical_at_identity(sp2):
    e = sp2_identity().to_array()
    V = sp2.vertical_space(e)
    assert V.shape == (16, 3)
    # the action moves only the second column
    assert np.max(np.abs(V[:8])) < 1e-14


def test_sp2_pullback_isometry_with_graph_metric(sp2, rng):
    p = sp2.random_point(rng)
    H = sp2.horizontal_space(p)
    m = p[:8]
    for i in range(H.shape[1]):
        for j in range(H.shape[1]):
            X, Y = sp2.dpi(p) @ H[:, i], sp2.dpi(p) @ H[:, j]
            assert abs(graph_metric_inner(sp2.f, m, X, Y, 0.5) - H[:, i] @ H[:, j]) < 1e-8


def test_trivial_bundle_a_vanishes(rng):
    B = TrivialBundle(sphere(2), lambda r: random_sphere(r, 3))
    p = B.random_point(rng)
    H = B.horizontal_space(p)
    X, Y = H[:, 0], H[:, 1]
    assert np.linalg.norm(B.a_tensor(p, X, Y, "projection")) < 1e-8
    assert np.linalg.norm(B.a_tensor(p, X, Y, "curvature_form")) < 1e-8
    assert vertizontal_curvature(B, p, X, B.vertical_space(p)[:, 0]) == 0.0


def test_a_tensor_evaluators_agree(hopf, sp2, rng):
    for B in (hopf, sp2):
        for _ in range(5):
            p = B.random_point(rng)
            H = B.horizontal_space(p)
            X, Y = H @ rng.standard_normal(H.shape[1]), H @ rng.standard_normal(H.shape[1])
            closed = B.a_tensor(p, X, Y)
            assert np.linalg.norm(B.a_tensor(p, X, Y, "projection") - closed) < 1e-5
            assert np.linalg.norm(B.a_tensor(p, X, Y, "curvature_form") - closed) < 1e-5


def test_a_tensor_antisymmetric(hopf, rng):
    p = hopf.random_point(rng)
    F = hopf.a_tensor_frame(p, "projection")
    assert F.antisymmetry_residual() < 1e-6
    with pytest.raises(ValueError):
        hopf.a_tensor(p, F.horizontal[:, 0], F.horizontal[:, 1], "nope")


def test_pullback_curvature_form_is_pulled_back(sp2, hopf, rng):
    q = sp2.random_point(rng)
    m, p = q[:8], q[8:]
    H = sp2.horizontal_space(q)
    X, Y = H[:, 0], H[:, 2]
    lhs = sp2.a_tensor(q, X, Y, "curvature_form")[8:]
    Xh = hopf.lift(p, 0.5 * sp2.f.jacobian(m) @ X[:8])
    Yh = hopf.lift(p, 0.5 * sp2.f.jacobian(m) @ Y[:8])
    rhs = hopf.a_tensor(p, Xh, Yh, "curvature_form")
    assert np.linalg.norm(lhs - rhs) < 1e-5


def test_hopf_vertizontal_curvature(hopf, rng):
    for _ in range(10):
        p = hopf.random_point(rng)
        X = _unit(hopf.horizontal_space(p) @ rng.standard_normal(4))
        U = _unit(hopf.vertical_space(p) @ rng.standard_normal(3))
        assert abs(vertizontal_curvature(hopf, p, X, U) - 1.0) < 1e-4
        assert abs(hopf.total.sectional_curvature(p, X, U) - 1.0) < 1e-8


def test_hopf_kernel_trivial(hopf, rng):
    assert a_flat_rank_scan(hopf, 10, seed=1)["histogram"] == {0: 10}
    p = hopf.random_point(rng)
    assert a_flat_kernel(hopf, p).dim == 0
    assert a_operator_norm(hopf, p, hopf.base.tangent_basis(hopf.projection(p))[:, 0]) > 0.5


def test_sp2_kernel_is_kernel_of_df(sp2, rng):
    for _ in range(5):
        q = sp2.random_point(rng)
        D = a_flat_kernel(sp2, q)
        assert D.dim == 3
        m = q[:8]
        E = sp2.base.tangent_basis(m)
        _, s, Vt = np.linalg.svd(sp2.f.jacobian(m) @ E)
        K = E @ Vt[4:].T
        assert np.max(principal_angles(D.basis, K)) < 1e-4
        U = sp2.vertical_space(q)[:, 1]
        assert vertizontal_curvature(sp2, q, sp2.lift(q, D.basis[:, 0]), U) < 1e-5
    assert a_flat_rank_scan(sp2, 6, seed=2)["histogram"] == {3: 6}


def test_rigas_rank_scan():
    z = rigas_map(2)
    B = PullbackBundle(sphere(7), z.F, M_sampler=lambda r: random_sphere(r, 8))
    scan = a_flat_rank_scan(B, 5, seed=3)
    assert scan["generic_rank"] == 3


def test_flat_section_rigidity_sp2(sp2, rng):
    q = sp2.random_point(rng)
    D = a_flat_kernel(sp2, q)
    X = _unit(sp2.lift(q, D.basis[:, 0]))
    U = _unit(sp2.vertical_space(q)[:, 0])
    out = flat_section_rigidity_check(sp2.total, q, X, U)
    assert out["rigidity_ok"] and out["sweep_ok"]
    assert out["rigidity_residual"] < 1e-4


def test_flat_section_commuting_fields_on_s3xs3(rng):
    P = product(sphere(3), sphere(3))
    g, h = random_sphere(rng, 4), random_sphere(rng, 4)
    x = np.concatenate([g, h])
    i = np.array([0, 1.0, 0, 0])
    X = np.concatenate([qmul(g, i), np.zeros(4)])
    U = np.concatenate([np.zeros(4), qmul(h, i)])
    out = flat_section_rigidity_check(P, x, X, U)
    assert out["rigidity_residual"] < 1e-10


def test_flat_section_precondition_on_sphere(rng):
    M = sphere(3)
    x = random_sphere(rng, 4)
    E = M.tangent_basis(x)
    with pytest.raises(PreconditionError):
        flat_section_rigidity_check(M, x, E[:, 0], E[:, 1])


def test_acceleration_and_bracket_sp2(sp2, rng):
    def field(w):
        def X(m):
            D = a_flat_kernel(sp2, sp2.point_over(m))
            return D.basis @ (D.basis.T @ w)
        return X

    pts = [random_sphere(rng, 8) for _ in range(2)]
    w1, w2 = rng.standard_normal(8), rng.standard_normal(8)
    assert a_flat_acceleration_check(sp2, pts, field(w1))["ok"]
    assert a_flat_bracket_check(sp2, pts, field(w1), field(w2))["ok"]


def test_acceleration_trivial_bundle(rng):
    T = flat_torus(2)
    B = TrivialBundle(T)
    w = np.array([0.0, 1.0, 0.0, 0.0])
    pts = [np.array([1.0, 0, 0, 1.0])]
    out = a_flat_acceleration_check(B, pts, lambda m: T.tangent_project(m, w))
    assert out["acceleration_a_norm"] == 0.0


def test_graph_metric_inner(sp2, rng):
    m = random_sphere(rng, 8)
    D = a_flat_kernel(sp2, sp2.point_over(m))
    X = D.basis[:, 0]
    assert np.isclose(graph_metric_inner(sp2.f, m, X, X), X @ X)
    ident = linear_map(np.eye(8))
    Y = sphere(7).tangent_project(m, rng.standard_normal(8))
    assert np.isclose(graph_metric_inner(ident, m, X, Y), 2 * X @ Y)
