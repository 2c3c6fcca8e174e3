"""Quaternion and octonion arithmetic and the explicit sphere maps.

Quaternions are stored as float arrays whose last axis has length 4, in the
order ``(w, x, y, z)`` for ``w + x i + y j + z k``.  Octonions are Cayley-Dickson
pairs ``(a, b)`` of quaternions stored as length-8 arrays ``[a, b]``.  All
array functions broadcast over leading axes.

Sphere models used throughout:

* ``S^4 ⊂ R x H`` as length-5 arrays ``[x, y0, y1, y2, y3]``
* ``S^7 ⊂ H x H`` as length-8 arrays ``[a, b]``
* ``S^8 ⊂ H x R x H`` as length-9 arrays ``[x, lam, y]``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

UNIT_TOL = 1e-10

_CONJ = np.array([1.0, -1.0, -1.0, -1.0])


def qmul(p, q):
    """Hamilton product of quaternion arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    a2, b2, c2, d2 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def qconj(q):
    return np.asarray(q, dtype=float) * _CONJ


def qnorm(q):
    return np.linalg.norm(q, axis=-1)


def qinv(q):
    q = np.asarray(q, dtype=float)
    return qconj(q) / np.sum(q * q, axis=-1, keepdims=True)


def qpow(y, k: int):
    """Integer power of a quaternion (negative ``k`` uses the inverse)."""
    y = np.asarray(y, dtype=float)
    if k < 0:
        y, k = qinv(y), -k
    out = np.zeros_like(y)
    out[..., 0] = 1.0
    base = y
    while k:
        if k & 1:
            out = qmul(out, base)
        base = qmul(base, base)
        k >>= 1
    return out


def omul(p, q):
    """Cayley-Dickson product ``(a,b)(c,d) = (ac - conj(d) b, d a + b conj(c))``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a, b = p[..., :4], p[..., 4:]
    c, d = q[..., :4], q[..., 4:]
    return np.concatenate(
        [qmul(a, c) - qmul(qconj(d), b), qmul(d, a) + qmul(b, qconj(c))], axis=-1
    )


def oconj(q):
    q = np.asarray(q, dtype=float)
    return np.concatenate([qconj(q[..., :4]), -q[..., 4:]], axis=-1)


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        w, x, y, z = (float(v) for v in np.asarray(arr, dtype=float))
        return cls(w, x, y, z)

    def __array__(self, dtype=None, copy=None):
        return np.array([self.w, self.x, self.y, self.z], dtype=dtype or float)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(np.asarray(self), np.asarray(other)))
        return Quaternion.from_array(np.asarray(self) * float(other))

    def __rmul__(self, other):
        return Quaternion.from_array(np.asarray(self) * float(other))

    def __add__(self, other):
        return Quaternion.from_array(np.asarray(self) + np.asarray(other))

    def __sub__(self, other):
        return Quaternion.from_array(np.asarray(self) - np.asarray(other))

    def __neg__(self):
        return Quaternion.from_array(-np.asarray(self))

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self)))


@dataclass(frozen=True)
class Octonion:
    a: Quaternion = Quaternion()
    b: Quaternion = Quaternion()

    @classmethod
    def from_array(cls, arr) -> "Octonion":
        arr = np.asarray(arr, dtype=float)
        return cls(Quaternion.from_array(arr[:4]), Quaternion.from_array(arr[4:]))

    def __array__(self, dtype=None, copy=None):
        return np.concatenate([np.asarray(self.a), np.asarray(self.b)]).astype(
            dtype or float
        )

    def __mul__(self, other):
        if isinstance(other, Octonion):
            return Octonion.from_array(omul(np.asarray(self), np.asarray(other)))
        return Octonion.from_array(np.asarray(self) * float(other))

    def __add__(self, other):
        return Octonion.from_array(np.asarray(self) + np.asarray(other))

    def __sub__(self, other):
        return Octonion.from_array(np.asarray(self) - np.asarray(other))

    def conj(self) -> "Octonion":
        return Octonion.from_array(oconj(np.asarray(self)))

    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self)))


def quat_mul(p, q):
    """Hamilton product; accepts :class:`Quaternion` or arrays."""
    if isinstance(p, Quaternion) and isinstance(q, Quaternion):
        return p * q
    return qmul(p, q)


def oct_mul(p, q):
    if isinstance(p, Octonion) and isinstance(q, Octonion):
        return p * q
    return omul(p, q)


def _check_unit(v, what: str, tol: float = UNIT_TOL) -> None:
    n = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(n - 1.0) > tol):
        raise DomainError(f"{what} must have unit norm, got {np.max(np.abs(n - 1.0)):.3g} off")


def hopf(p, check: bool = True):
    """Hopf map ``S^7 -> S^4``, ``(a,b) -> (|a|^2-|b|^2, 2 a conj(b))``.

    Invariant under the right action ``(a,b) -> (aq, bq)``.  With
    ``check=False`` the quadratic formula is evaluated on all of ``R^8``.
    """
    p = np.asarray(p, dtype=float)
    if check:
        _check_unit(p, "Hopf map input")
    a, b = p[..., :4], p[..., 4:]
    first = np.sum(a * a, axis=-1) - np.sum(b * b, axis=-1)
    return np.concatenate([first[..., None], 2.0 * qmul(a, qconj(b))], axis=-1)


def dual_hopf(p, check: bool = True):
    """Dual Hopf map ``(a,b) -> (|a|^2-|b|^2, 2 conj(a) b)``, left-action invariant."""
    p = np.asarray(p, dtype=float)
    if check:
        _check_unit(p, "dual Hopf map input")
    a, b = p[..., :4], p[..., 4:]
    first = np.sum(a * a, axis=-1) - np.sum(b * b, axis=-1)
    return np.concatenate([first[..., None], 2.0 * qmul(qconj(a), b)], axis=-1)


def hopf_s7_s4(a, b):
    return hopf(np.concatenate([np.asarray(a, float), np.asarray(b, float)], axis=-1))


def dual_hopf_s7_s4(a, b):
    return dual_hopf(np.concatenate([np.asarray(a, float), np.asarray(b, float)], axis=-1))


_I = np.array([0.0, 1.0, 0.0, 0.0])


def hopf_s3_s2(y):
    """``y -> y i conj(y)`` on all of H; purely imaginary with norm ``|y|^2``."""
    y = np.asarray(y, dtype=float)
    return qmul(qmul(y, _I), qconj(y))


def quat_pow_suspension(k: int, x, y, check: bool = True):
    """Suspended power map ``(x, y) -> (x, y^k) / sqrt(x^2 + |y|^(2k))`` on ``S^4``."""
    if k == 0:
        raise DomainError("power 0 gives a degenerate suspension")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if check:
        _check_unit(np.concatenate([x[..., None], y], axis=-1), "suspension input")
    yk = qpow(y, k)
    out = np.concatenate([x[..., None], yk], axis=-1)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def suspension_power(k: int, z, check: bool = True):
    """:func:`quat_pow_suspension` on packed ``[x, y]`` arrays."""
    z = np.asarray(z, dtype=float)
    return quat_pow_suspension(k, z[..., 0], z[..., 1:], check=check)


AXIS_TOL = 1e-14


def cayley_pow(n: int, q):
    """n-th power of a unit octonion through its angle/axis form.

    ``q = cos t + alpha sin t`` with ``t = atan2(|Im q|, Re q)`` in ``[0, pi]``;
    the result is ``cos(nt) + alpha sin(nt)``.  When ``|Im q| < 1e-14`` the axis
    is unset and ``cos(nt)`` is returned exactly.
    """
    q = np.asarray(q, dtype=float)
    re = q[..., 0]
    im = q[..., 1:]
    r = np.linalg.norm(im, axis=-1)
    t = np.arctan2(r, re)
    out = np.zeros(q.shape[:-1] + (8,))
    out[..., 0] = np.cos(n * t)
    safe = r >= AXIS_TOL
    scale = np.where(safe, np.sin(n * t) / np.where(safe, r, 1.0), 0.0)
    out[..., 1:] = im * scale[..., None]
    return out


def octonion_angle(q):
    """Angle ``t`` in ``[0, pi]`` of ``q = cos t + alpha sin t``."""
    q = np.asarray(q, dtype=float)
    return np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), q[..., 0])


def antipodal(p):
    return -np.asarray(p, dtype=float)


# Quaternionic 2x2 matrices: arrays of shape (..., 2, 2, 4), entry [row, col].


def qmat_mul(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return qmul(A[..., :, :, None, :], B[..., None, :, :, :]).sum(axis=-3)


def qmat_adjoint(A):
    A = np.asarray(A, dtype=float)
    return qconj(np.swapaxes(A, -3, -2))


def qmat_from_columns(p):
    """Sp(2)-style packing: ``[a, b, c, d]`` (length 16) -> columns (a,b), (c,d)."""
    p = np.asarray(p, dtype=float)
    a, b, c, d = p[..., 0:4], p[..., 4:8], p[..., 8:12], p[..., 12:16]
    row0 = np.stack([a, c], axis=-2)
    row1 = np.stack([b, d], axis=-2)
    return np.stack([row0, row1], axis=-3)


def qmat_to_columns(A):
    A = np.asarray(A, dtype=float)
    return np.concatenate([A[..., 0, 0, :], A[..., 1, 0, :], A[..., 0, 1, :], A[..., 1, 1, :]], axis=-1)


def random_sphere(rng: np.random.Generator, ambient_dim: int, size=None):
    """Uniform samples on the unit sphere of ``R^ambient_dim``."""
    shape = (ambient_dim,) if size is None else (size, ambient_dim)
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_unit_quaternion(rng: np.random.Generator, size=None):
    return random_sphere(rng, 4, size)
