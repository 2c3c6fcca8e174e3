import numpy as np

from pullgeom.algebra import hopf
from pullgeom.smooth import (
    QuadraticMap, SmoothMap, compose, fd_jacobian, fd_second, linear_map, restrict_input, stack,
)


def _cubic():
    return SmoothMap(lambda x: np.array([x[0] ** 3 + x[1] * x[2], np.sin(x[0])]), 3, 2, name="cubic")


def test_quadratic_from_function_recovers_hopf(rng):
    Q = QuadraticMap.from_function(lambda p: hopf(p, check=False), 8)
    for _ in range(5):
        x = rng.standard_normal(8)
        assert np.allclose(Q(x), hopf(x, check=False), atol=1e-13)
        assert np.allclose(Q.jacobian(x), fd_jacobian(Q, x), atol=1e-7)


def test_quadratic_second_derivative_is_constant(rng):
    Q = QuadraticMap(rng.standard_normal((2, 3, 3)), rng.standard_normal((2, 3)), [1.0, 2.0])
    u, v = rng.standard_normal(3), rng.standard_normal(3)
    assert np.allclose(Q.second(rng.standard_normal(3), u, v), Q.second(np.zeros(3), u, v))
    assert np.allclose(Q.second(np.zeros(3), u, v), fd_second(Q, np.zeros(3), u, v), atol=1e-5)


def test_then_linear(rng):
    Q = QuadraticMap(rng.standard_normal((2, 3, 3)), rng.standard_normal((2, 3)), [1.0, 2.0])
    L = rng.standard_normal((4, 2))
    x = rng.standard_normal(3)
    assert np.allclose(Q.then_linear(L, np.ones(4))(x), L @ Q(x) + 1)


def test_fd_fallbacks(rng):
    f = _cubic()
    x = rng.standard_normal(3)
    J = np.array([[3 * x[0] ** 2, x[2], x[1]], [np.cos(x[0]), 0, 0]])
    assert np.allclose(f.jacobian(x), J, atol=1e-7)
    u = np.eye(3)[0]
    assert np.allclose(f.second(x, u, u), [6 * x[0], -np.sin(x[0])], atol=1e-4)
    assert not f.analytic_jacobian


def test_composition_chain_rule(rng):
    f = _cubic()
    g = QuadraticMap(rng.standard_normal((1, 2, 2)), rng.standard_normal((1, 2)), [0.0])
    h = compose(g, f)
    x, u, v = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3)
    assert np.allclose(h.jacobian(x), fd_jacobian(h, x), atol=1e-6)
    assert np.allclose(h.second(x, u, v), fd_second(h, x, u, v), atol=1e-4)


def test_stack_and_restrict(rng):
    L = linear_map(np.array([[1.0, 2.0, 3.0]]), [1.0])
    s = stack([L, _cubic()])
    x = rng.standard_normal(3)
    assert s(x).shape == (3,) and s.jacobian(x).shape == (3, 3)
    r = restrict_input(L, [0, 2, 4], 5)
    assert np.isclose(r(np.arange(5.0)), 1 + 0 + 2 * 2 + 3 * 4)
