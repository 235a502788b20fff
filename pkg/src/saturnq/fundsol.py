"""Fundamental solutions of the adjoint operator D*.

``D*(F^{mn}) = delta_0 e^{mn}`` is solved in Fourier space with the 6x6
symbol matrix; the real-space kernels are homogeneous of degree -1 and of
the form ``P(x, y, z) / (32 pi (2+k)(3+2k) r^5)`` with ``P`` a quartic.

Tensors follow the Vec6 ordering ``(11, 22, 33, 12, 13, 23)``.  Index pairs
``(m, n)`` are 1-based with ``m <= n`` (``(n, m)`` is accepted and means the
same kernel).
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from .qtensor import VEC6_PAIRS

PAIRS = ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3))


def _check_k(k: float) -> None:
    if not k > -1.0:
        raise ValueError(f"elastic ratio k must satisfy k > -1, got {k}")


def pair_index(m: int, n: int) -> int:
    """Position of ``(m, n)`` in the Vec6 ordering."""
    m, n = sorted((int(m), int(n)))
    try:
        return PAIRS.index((m, n))
    except ValueError:
        raise ValueError(f"invalid index pair ({m}, {n})") from None


def unit_vec6(m: int, n: int) -> np.ndarray:
    e = np.zeros(6)
    e[pair_index(m, n)] = 1.0
    return e


def unit_matrix(m: int, n: int) -> np.ndarray:
    """Symmetric matrix with ones in slots (m, n) and (n, m)."""
    E = np.zeros((3, 3))
    E[m - 1, n - 1] = 1.0
    E[n - 1, m - 1] = 1.0
    return E


# ---------------------------------------------------------------------------
# Fourier side
# ---------------------------------------------------------------------------

def symbol_matrix(xi, k: float) -> np.ndarray:
    """Fourier symbol ``N(xi; k)`` of D* acting on Vec6 components."""
    x1, x2, x3 = np.asarray(xi, dtype=float)
    s = x1 * x1 + x2 * x2 + x3 * x3
    a, h, t = k / 3.0, k / 2.0, k / 6.0
    return np.array(
        [
            [s + 2 * a * x1**2, -a * x1**2, -a * x1**2, k * x1 * x2, k * x1 * x3, 0.0],
            [-a * x2**2, s + 2 * a * x2**2, -a * x2**2, k * x1 * x2, 0.0, k * x2 * x3],
            [-a * x3**2, -a * x3**2, s + 2 * a * x3**2, 0.0, k * x1 * x3, k * x2 * x3],
            [t * x1 * x2, t * x1 * x2, -a * x1 * x2, s + h * (x1**2 + x2**2), h * x2 * x3, h * x1 * x3],
            [t * x1 * x3, -a * x1 * x3, t * x1 * x3, h * x2 * x3, s + h * (x1**2 + x3**2), h * x1 * x2],
            [-a * x2 * x3, t * x2 * x3, t * x2 * x3, h * x1 * x3, h * x1 * x2, s + h * (x2**2 + x3**2)],
        ]
    )


def fhat11_numerator(xi, k: float) -> np.ndarray:
    """Quartic numerator of ``F^11`` hat (without the ``(2+k)(3+2k)|xi|^6`` factor)."""
    x1, x2, x3 = np.asarray(xi, dtype=float)
    t = x2 * x2 + x3 * x3
    return np.array(
        [
            3 * (2 + k) * x1**4 + (12 + k * (10 + k)) * x1**2 * t + (2 + k) * (3 + 2 * k) * t**2,
            k * x2**2 * (2 * (1 + k) * x1**2 + (2 + k) * t),
            k * x3**2 * (2 * (1 + k) * x1**2 + (2 + k) * t),
            -k * x1 * x2 * (x1**2 + (1 + k) * t),
            -k * x1 * x3 * (x1**2 + (1 + k) * t),
            k * x2 * x3 * (2 * (1 + k) * x1**2 + (2 + k) * t),
        ]
    )


def fhat11(xi, k: float) -> np.ndarray:
    """Closed-form Fourier transform of ``F^11`` at frequency ``xi != 0``."""
    xi = np.asarray(xi, dtype=float)
    s = float(xi @ xi)
    if s == 0.0:
        raise ValueError("fhat11 is singular at xi = 0")
    return fhat11_numerator(xi, k) / ((2 + k) * (3 + 2 * k) * s**3)


def fhat(m: int, n: int, xi, k: float) -> np.ndarray:
    """``N(xi; k)^{-1} e^{mn}`` by a dense solve (any pair)."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise ValueError("fhat is singular at xi = 0")
    return np.linalg.solve(symbol_matrix(xi, k), unit_vec6(m, n))


# ---------------------------------------------------------------------------
# inverse transforms of xi^alpha / |xi|^6 for quartic monomials
# ---------------------------------------------------------------------------
# Base kernels, times 32 pi r^5.  Every quartic monomial is an axis
# permutation of one of these four exponent patterns.

def _k4000(x, y, z):  # xi1^4
    return 3.0 * (y * y + z * z) ** 2


def _k3100(x, y, z):  # xi1^3 xi2
    return -3.0 * x * y * (y * y + z * z)


def _k2200(x, y, z):  # xi1^2 xi2^2
    r2 = x * x + y * y + z * z
    return 3.0 * x * x * y * y + r2 * z * z


def _k2110(x, y, z):  # xi1^2 xi2 xi3
    return y * z * (2.0 * x * x - y * y - z * z)


INVERSE_TRANSFORM_KERNELS = {
    (4, 0, 0): _k4000,
    (3, 1, 0): _k3100,
    (2, 2, 0): _k2200,
    (2, 1, 1): _k2110,
}


def quartic_inverse_transform(alpha, p) -> np.ndarray:
    """Real-space kernel of ``xi^alpha / |xi|^6`` for ``sum(alpha) == 4``."""
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) != 4 or min(alpha) < 0:
        raise ValueError("alpha must be a quartic exponent pattern")
    p = np.asarray(p, dtype=float)
    coords = [p[..., 0], p[..., 1], p[..., 2]]
    for perm in permutations(range(3)):
        base = tuple(alpha[i] for i in perm)
        if base in INVERSE_TRANSFORM_KERNELS:
            r = np.sqrt(coords[0] ** 2 + coords[1] ** 2 + coords[2] ** 2)
            val = INVERSE_TRANSFORM_KERNELS[base](*(coords[i] for i in perm))
            return val / (32.0 * np.pi * r**5)
    raise AssertionError("unreachable")


QUARTIC_MONOMIALS = tuple(
    (a, b, 4 - a - b) for a in range(4, -1, -1) for b in range(4 - a, -1, -1)
)


def _quartic_coefficients(poly) -> np.ndarray:
    """Monomial coefficients of a quartic given as a callable of xi.

    Solves the 15x15 interpolation system at fixed generic nodes; rows of
    the result follow :data:`QUARTIC_MONOMIALS`.
    """
    rng = np.random.default_rng(12345)
    nodes = rng.normal(size=(15, 3))
    V = np.array([[np.prod(xi**np.array(a)) for a in QUARTIC_MONOMIALS] for xi in nodes])
    vals = np.array([poly(xi) for xi in nodes])
    return np.linalg.solve(V, vals)


def fundamental_via_fourier(m: int, n: int, p, k: float, numerator=None) -> np.ndarray:
    """Assemble ``F^{mn}(p)`` term by term from its Fourier numerator.

    The numerator is recovered from the symbol matrix (or taken from
    ``numerator`` when given, e.g. :func:`fhat11_numerator`), expanded in
    quartic monomials and each monomial mapped through
    :func:`quartic_inverse_transform`.  Independent of the transcribed
    real-space table in :func:`fundamental`.
    """
    _check_k(k)
    scale = (2 + k) * (3 + 2 * k)
    if numerator is None:
        def numerator(xi):
            return fhat(m, n, xi, k) * scale * float(xi @ xi) ** 3
    else:
        num_fn = numerator

        def numerator(xi):
            return num_fn(xi, k)

    coeffs = _quartic_coefficients(numerator)  # (15, 6)
    p = np.asarray(p, dtype=float)
    kern = np.stack([quartic_inverse_transform(a, p) for a in QUARTIC_MONOMIALS], axis=-1)
    vec = kern @ coeffs / scale
    out = np.empty(p.shape[:-1] + (3, 3))
    for c, (i, j) in enumerate(VEC6_PAIRS):
        out[..., i, j] = vec[..., c]
        out[..., j, i] = vec[..., c]
    return out


# ---------------------------------------------------------------------------
# real-space table
# ---------------------------------------------------------------------------
# Numerators P^{mn}_{ij} in the r^2 form; common factor
# 1 / (32 pi (2+k)(3+2k) r^5).  Arguments: coordinates, r^2, k.

def _F11(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * r2 * (48 + 40 * k + 4 * k2) + r2 * x * x * (16 * k + 12 * k2) + 3 * k2 * (y * y + z * z) ** 2,
        r2 * (x * x * (8 * k + 4 * k2) + z * z * (8 * k + 5 * k2)) + 3 * k2 * x * x * y * y,
        r2 * (x * x * (8 * k + 4 * k2) + y * y * (8 * k + 5 * k2)) + 3 * k2 * x * x * z * z,
        r2 * x * y * (4 * k + k2) + 3 * k2 * x**3 * y,
        r2 * x * z * (4 * k + k2) + 3 * k2 * x**3 * z,
        r2 * y * z * (-8 * k - 5 * k2) + 3 * k2 * x * x * y * z,
    )


def _F22(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * (y * y * (8 * k + 4 * k2) + z * z * (8 * k + 5 * k2)) + 3 * k2 * x * x * y * y,
        r2 * r2 * (48 + 40 * k + 4 * k2) + r2 * y * y * (16 * k + 12 * k2) + 3 * k2 * (x * x + z * z) ** 2,
        r2 * (y * y * (8 * k + 4 * k2) + x * x * (8 * k + 5 * k2)) + 3 * k2 * y * y * z * z,
        r2 * x * y * (4 * k + k2) + 3 * k2 * x * y**3,
        r2 * x * z * (-8 * k - 5 * k2) + 3 * k2 * x * y * y * z,
        r2 * y * z * (4 * k + k2) + 3 * k2 * y**3 * z,
    )


def _F33(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * (z * z * (8 * k + 4 * k2) + y * y * (8 * k + 5 * k2)) + 3 * k2 * x * x * z * z,
        r2 * (z * z * (8 * k + 4 * k2) + x * x * (8 * k + 5 * k2)) + 3 * k2 * y * y * z * z,
        r2 * r2 * (48 + 40 * k + 4 * k2) + r2 * z * z * (16 * k + 12 * k2) + 3 * k2 * (x * x + y * y) ** 2,
        r2 * x * y * (-8 * k - 5 * k2) + 3 * k2 * x * y * z * z,
        r2 * x * z * (4 * k + k2) + 3 * k2 * x * z**3,
        r2 * y * z * (4 * k + k2) + 3 * k2 * y * z**3,
    )


def _F12(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * x * y * (24 * k + 10 * k2) + 6 * k2 * x**3 * y,
        r2 * x * y * (24 * k + 10 * k2) + 6 * k2 * x * y**3,
        r2 * x * y * (-2 * k2) + 6 * k2 * x * y * z * z,
        r2 * r2 * (48 + 44 * k + 8 * k2) + r2 * z * z * (-12 * k - 6 * k2) + 6 * k2 * x * x * y * y,
        r2 * y * z * (12 * k + 6 * k2) + 6 * k2 * x * x * y * z,
        r2 * x * z * (12 * k + 6 * k2) + 6 * k2 * x * y * y * z,
    )


def _F13(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * x * z * (24 * k + 10 * k2) + 6 * k2 * x**3 * z,
        r2 * x * z * (-2 * k2) + 6 * k2 * x * y * y * z,
        r2 * x * z * (24 * k + 10 * k2) + 6 * k2 * x * z**3,
        r2 * y * z * (12 * k + 6 * k2) + 6 * k2 * x * x * y * z,
        r2 * r2 * (48 + 44 * k + 8 * k2) + r2 * y * y * (-12 * k - 6 * k2) + 6 * k2 * x * x * z * z,
        r2 * x * y * (12 * k + 6 * k2) + 6 * k2 * x * y * z * z,
    )


def _F23(x, y, z, r2, k):
    k2 = k * k
    return (
        r2 * y * z * (-2 * k2) + 6 * k2 * x * x * y * z,
        r2 * y * z * (24 * k + 10 * k2) + 6 * k2 * y**3 * z,
        r2 * y * z * (24 * k + 10 * k2) + 6 * k2 * y * z**3,
        r2 * x * z * (12 * k + 6 * k2) + 6 * k2 * x * y * y * z,
        r2 * x * y * (12 * k + 6 * k2) + 6 * k2 * x * y * z * z,
        r2 * r2 * (48 + 44 * k + 8 * k2) + r2 * x * x * (-12 * k - 6 * k2) + 6 * k2 * y * y * z * z,
    )


_TABLE = {(1, 1): _F11, (2, 2): _F22, (3, 3): _F33, (1, 2): _F12, (1, 3): _F13, (2, 3): _F23}


def fundamental_vec6(m: int, n: int, p, k: float) -> np.ndarray:
    """``F^{mn}(p; k)`` in Vec6 form, shape ``(..., 6)``.

    Works for complex ``p`` as well, which :func:`fundamental_gradient`
    relies on.
    """
    _check_k(k)
    key = tuple(sorted((int(m), int(n))))
    if key not in _TABLE:
        raise ValueError(f"invalid index pair ({m}, {n})")
    p = np.asarray(p)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y + z * z
    if np.any(np.abs(r2) == 0.0):
        raise ZeroDivisionError("fundamental solution is singular at the source point")
    scale = 1.0 / (32.0 * np.pi * (2 + k) * (3 + 2 * k) * r2**2.5)
    comps = _TABLE[key](x, y, z, r2, k)
    return np.stack([c * scale for c in comps], axis=-1)


def fundamental(m: int, n: int, p, k: float) -> np.ndarray:
    """Symmetric matrix value of ``F^{mn}(p; k)``, shape ``(..., 3, 3)``."""
    v = fundamental_vec6(m, n, p, k)
    out = np.empty(v.shape[:-1] + (3, 3), dtype=v.dtype)
    for c, (i, j) in enumerate(VEC6_PAIRS):
        out[..., i, j] = v[..., c]
        out[..., j, i] = v[..., c]
    return out


def fundamental_translated(m: int, n: int, p, source, k: float) -> np.ndarray:
    """``F^{mn}`` centred at ``source`` and evaluated at ``p``."""
    return fundamental(m, n, np.asarray(p, dtype=float) - np.asarray(source, dtype=float), k)


_CSTEP = 1e-30


def fundamental_gradient(m: int, n: int, p, k: float) -> np.ndarray:
    """``G[..., i, j, l] = d F^{mn}_{ij} / d x_l`` by complex-step differentiation.

    The kernel is a real-analytic rational function of the coordinates away
    from the origin, so the complex step is exact to rounding.
    """
    p = np.asarray(p, dtype=float)
    grads = []
    for l in range(3):
        pc = p.astype(complex)
        pc[..., l] += 1j * _CSTEP
        grads.append(fundamental(m, n, pc, k).imag / _CSTEP)
    return np.stack(grads, axis=-1)
