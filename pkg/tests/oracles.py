"""Reference computations written independently of the package internals."""
import numpy as np


def quat_to_complex(q):
    """``w + xi + yj + zk`` as the 2x2 complex matrix ``[[w+xi, y+zi], [-y+zi, w-xi]]``."""
    w, x, y, z = q
    return np.array([[w + 1j * x, y + 1j * z], [-y + 1j * z, w - 1j * x]])


def complex_to_quat(M):
    return np.array([M[0, 0].real, M[0, 0].imag, M[0, 1].real, M[0, 1].imag])


def quat_product(p, q):
    return complex_to_quat(quat_to_complex(p) @ quat_to_complex(q))


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def oct_product(p, q):
    """Cayley-Dickson doubling ``(a,b)(c,d) = (ac - conj(d) b, da + b conj(c))`` via the matrix oracle."""
    a, b, c, d = p[:4], p[4:], q[:4], q[4:]
    first = quat_product(a, c) - quat_product(quat_conj(d), b)
    second = quat_product(d, a) + quat_product(b, quat_conj(c))
    return np.concatenate([first, second])


def oct_table():
    """Structure constants ``T[i, j] = e_i e_j``."""
    E = np.eye(8)
    return np.array([[oct_product(E[i], E[j]) for j in range(8)] for i in range(8)])


def hopf_map(p):
    a, b = p[:4], p[4:]
    return np.concatenate([[a @ a - b @ b], 2 * quat_product(a, quat_conj(b))])


def cayley_eta_closed(t):
    """``2 sin^2(2t) / sin^2(t) = 8 cos^2 t``."""
    return 8.0 * np.cos(t) ** 2


def latitude_ii(theta):
    """Geodesic curvature of the latitude circle at polar angle ``theta`` on the unit S^2."""
    return 1.0 / np.tan(theta)


def great_circle_chordal(x):
    """Chordal distance from unit ``x`` in S^3 to ``{(cos s, sin s, 0, 0)}``."""
    r = np.hypot(x[0], x[1])
    return np.sqrt(2.0 - 2.0 * r)


def closest_on_equator_param(x, grid=200001):
    """Brute-force 1-parameter minimization over ``(cos s, sin s, 0)``."""
    s = np.linspace(-np.pi, np.pi, grid)
    d = (np.cos(s) - x[0]) ** 2 + (np.sin(s) - x[1]) ** 2 + x[2] ** 2
    i = np.argmin(d)
    return np.array([np.cos(s[i]), np.sin(s[i]), 0.0]), np.sqrt(d[i])


def quat_matrix_real(A):
    """Real 8x8 matrix of a quaternionic 2x2 matrix acting on columns by left multiplication."""
    def L(q):
        out = np.zeros((4, 4))
        for k in range(4):
            e = np.eye(4)[k]
            out[:, k] = quat_product(q, e)
        return out
    return np.block([[L(A[i][j]) for j in range(2)] for i in range(2)])


def biinvariant_curvature(X, Y):
    """``|[X,Y]|^2 / 4`` for bi-invariant Frobenius metrics, via real matrices.

    The real 8x8 representation scales Frobenius norms by 4, so the bracket norm
    is divided by it.
    """
    RX, RY = quat_matrix_real(X), quat_matrix_real(Y)
    br = RX @ RY - RY @ RX
    num = 0.25 * np.sum(br * br) / 4.0
    nx, ny = np.sum(RX * RX) / 4.0, np.sum(RY * RY) / 4.0
    xy = np.sum(RX * RY) / 4.0
    return num / (nx * ny - xy**2)
