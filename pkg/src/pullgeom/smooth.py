"""Smooth maps between Euclidean spaces with first and second derivatives.

Every map carries an optional analytic Jacobian and an optional analytic
directional derivative of the Jacobian (``djac(x, u) = d/dt J(x + t u)``).
Missing derivatives fall back to central finite differences: step
``eps**(1/3)`` for first derivatives and ``eps**(1/4)`` for the four-point
second difference.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

EPS = np.finfo(float).eps
H_FIRST = EPS ** (1.0 / 3.0)
H_SECOND = EPS ** (1.0 / 4.0)


def fd_jacobian(func: Callable, x: np.ndarray, h: float = H_FIRST) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x))))
    step = h * scale
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * step))
    return np.stack(cols, axis=-1)


def fd_second(func: Callable, x: np.ndarray, u: np.ndarray, v: np.ndarray,
              h: float = H_SECOND) -> np.ndarray:
    """Four-point central estimate of ``d^2 F_x(u, v)``."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return np.zeros_like(np.asarray(func(x), dtype=float))
    u1, v1 = u / nu, v / nv
    val = (
        np.asarray(func(x + h * (u1 + v1)))
        - np.asarray(func(x + h * (u1 - v1)))
        - np.asarray(func(x - h * (u1 - v1)))
        + np.asarray(func(x - h * (u1 + v1)))
    ) / (4 * h * h)
    return val * nu * nv


class SmoothMap:
    """A map ``R^in_dim -> R^out_dim`` with Jacobian and second-derivative access."""

    def __init__(
        self,
        func: Callable,
        in_dim: int,
        out_dim: int,
        jac: Optional[Callable] = None,
        djac: Optional[Callable] = None,
        name: str = "",
    ):
        self.func = func
        self.in_dim = in_dim
        self.out_dim = out_dim
        self._jac = jac
        self._djac = djac
        self.name = name

    @property
    def analytic_jacobian(self) -> bool:
        return self._jac is not None

    @property
    def analytic_second(self) -> bool:
        return self._djac is not None

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._jac is not None:
            return np.asarray(self._jac(x), dtype=float).reshape(self.out_dim, self.in_dim)
        return fd_jacobian(self, x).reshape(self.out_dim, self.in_dim)

    def djac(self, x, u) -> np.ndarray:
        """``d/dt J(x + t u)`` at ``t = 0``, shape ``(out_dim, in_dim)``."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self._djac is not None:
            return np.asarray(self._djac(x, u), dtype=float).reshape(self.out_dim, self.in_dim)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return np.zeros((self.out_dim, self.in_dim))
        if self._jac is not None:
            h = H_FIRST
            u1 = u / nu
            return (self.jacobian(x + h * u1) - self.jacobian(x - h * u1)) / (2 * h) * nu
        cols = [fd_second(self, x, u, e) for e in np.eye(self.in_dim)]
        return np.stack(cols, axis=-1)

    def second(self, x, u, v) -> np.ndarray:
        """Symmetric bilinear second derivative ``d^2 F_x(u, v)``."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self._djac is not None:
            return self.djac(x, u) @ v
        if self._jac is not None:
            return 0.5 * (self.djac(x, u) @ v + self.djac(x, v) @ u)
        return fd_second(self, x, u, v)


class QuadraticMap(SmoothMap):
    """``F_i(x) = x^T A_i x + B_i x + c_i`` with exact derivatives."""

    def __init__(self, A, B, c, name: str = ""):
        self.A = np.asarray(A, dtype=float)
        self.A = 0.5 * (self.A + np.swapaxes(self.A, 1, 2))
        self.B = np.asarray(B, dtype=float)
        self.c = np.asarray(c, dtype=float)
        m, n, _ = self.A.shape
        super().__init__(self._eval, n, m, jac=self._jacobian, djac=self._dj, name=name)

    def _eval(self, x):
        return np.einsum("mij,i,j->m", self.A, x, x) + self.B @ x + self.c

    def _jacobian(self, x):
        return 2.0 * np.einsum("mij,j->mi", self.A, x) + self.B

    def _dj(self, x, u):
        return 2.0 * np.einsum("mij,j->mi", self.A, u)

    @classmethod
    def from_function(cls, func: Callable, in_dim: int, name: str = "") -> "QuadraticMap":
        """Recover the coefficients of a polynomial map of degree <= 2 by polarization."""
        zero = np.zeros(in_dim)
        c = np.asarray(func(zero), dtype=float)
        E = np.eye(in_dim)
        fp = [np.asarray(func(E[j]), dtype=float) for j in range(in_dim)]
        fm = [np.asarray(func(-E[j]), dtype=float) for j in range(in_dim)]
        m = c.size
        B = np.zeros((m, in_dim))
        A = np.zeros((m, in_dim, in_dim))
        for j in range(in_dim):
            B[:, j] = (fp[j] - fm[j]) / 2
            A[:, j, j] = (fp[j] + fm[j]) / 2 - c
        for j in range(in_dim):
            for k in range(j + 1, in_dim):
                fjk = np.asarray(func(E[j] + E[k]), dtype=float)
                val = (fjk - c - B[:, j] - B[:, k] - A[:, j, j] - A[:, k, k]) / 2
                A[:, j, k] = val
                A[:, k, j] = val
        return cls(A, B, c, name=name)

    def then_linear(self, L, offset=None, name: str = "") -> "QuadraticMap":
        """``L @ F(x) + offset`` (still quadratic)."""
        L = np.asarray(L, dtype=float)
        off = np.zeros(L.shape[0]) if offset is None else np.asarray(offset, dtype=float)
        return QuadraticMap(
            np.einsum("km,mij->kij", L, self.A), L @ self.B, L @ self.c + off, name=name
        )


class ComposedMap(SmoothMap):
    """``g o f``; derivatives always by the chain rule on the factors."""

    def __init__(self, g: SmoothMap, f: SmoothMap, name: str = ""):
        self.g = g
        self.f = f
        super().__init__(lambda x: g(f(x)), f.in_dim, g.out_dim, name=name or f"{g.name}o{f.name}")

    @property
    def analytic_jacobian(self) -> bool:
        return self.f.analytic_jacobian and self.g.analytic_jacobian

    @property
    def analytic_second(self) -> bool:
        return self.f.analytic_second and self.g.analytic_second

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return self.g.jacobian(self.f(x)) @ self.f.jacobian(x)

    def djac(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        y = self.f(x)
        Jf = self.f.jacobian(x)
        return self.g.djac(y, Jf @ u) @ Jf + self.g.jacobian(y) @ self.f.djac(x, u)

    def second(self, x, u, v):
        x = np.asarray(x, dtype=float)
        y = self.f(x)
        Jf = self.f.jacobian(x)
        return self.g.jacobian(y) @ self.f.second(x, u, v) + self.g.second(y, Jf @ u, Jf @ v)


def compose(g: SmoothMap, f: SmoothMap, name: str = "") -> SmoothMap:
    return ComposedMap(g, f, name=name)


class StackedMap(SmoothMap):
    """Concatenation of the outputs of maps sharing a domain."""

    def __init__(self, maps: Sequence[SmoothMap], name: str = ""):
        self.maps = list(maps)
        n = self.maps[0].in_dim
        m = sum(mp.out_dim for mp in self.maps)
        super().__init__(lambda x: np.concatenate([mp(x) for mp in self.maps]), n, m, name=name)

    @property
    def analytic_jacobian(self) -> bool:
        return all(mp.analytic_jacobian for mp in self.maps)

    @property
    def analytic_second(self) -> bool:
        return all(mp.analytic_second for mp in self.maps)

    def jacobian(self, x):
        return np.vstack([mp.jacobian(x) for mp in self.maps])

    def djac(self, x, u):
        return np.vstack([mp.djac(x, u) for mp in self.maps])

    def second(self, x, u, v):
        return np.concatenate([mp.second(x, u, v) for mp in self.maps])


def stack(maps: Sequence[SmoothMap], name: str = "") -> SmoothMap:
    return StackedMap(maps, name=name)


def linear_map(L, offset=None, name: str = "") -> SmoothMap:
    L = np.asarray(L, dtype=float)
    off = np.zeros(L.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    return SmoothMap(
        lambda x: L @ x + off,
        L.shape[1],
        L.shape[0],
        jac=lambda x: L,
        djac=lambda x, u: np.zeros_like(L),
        name=name,
    )


def restrict_input(f: SmoothMap, indices, in_dim: int, name: str = "") -> SmoothMap:
    """Precompose ``f`` with the coordinate selection ``x -> x[indices]``."""
    sel = np.zeros((len(indices), in_dim))
    sel[np.arange(len(indices)), list(indices)] = 1.0
    return compose(f, linear_map(sel), name=name or f.name)
