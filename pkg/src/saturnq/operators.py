"""Differential and boundary operators on tensor fields.

Fields are callables ``f(p) -> (3, 3)`` array (symmetric).  Derivatives are
taken by central differences with step ``h``; the algebra that turns a
gradient or Hessian into ``D``, ``D*``, ``L`` or ``N`` is exposed separately
so that callers holding exact derivatives (the fundamental solutions) can
reuse it.

Index conventions: ``G[i, j, l] = d_l f_ij`` and
``H[i, j, a, b] = d_a d_b f_ij``.  Row divergence ``(Div f)_i = sum_l d_l f_il``.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import fundsol
from .quadrature import build_quadrature

TensorFieldFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_H = 1e-3
_I3 = np.eye(3)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def fd_gradient(f: TensorFieldFn, p, h: float = DEFAULT_H) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    G = np.empty((3, 3, 3))
    for l in range(3):
        e = h * _I3[l]
        G[:, :, l] = (np.asarray(f(p + e)) - np.asarray(f(p - e))) / (2.0 * h)
    return G


def fd_hessian(f: TensorFieldFn, p, h: float = DEFAULT_H) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    f0 = np.asarray(f(p), dtype=float)
    H = np.empty((3, 3, 3, 3))
    for a in range(3):
        ea = h * _I3[a]
        H[:, :, a, a] = (np.asarray(f(p + ea)) - 2.0 * f0 + np.asarray(f(p - ea))) / (h * h)
        for b in range(a + 1, 3):
            eb = h * _I3[b]
            v = (
                np.asarray(f(p + ea + eb)) - np.asarray(f(p + ea - eb))
                - np.asarray(f(p - ea + eb)) + np.asarray(f(p - ea - eb))
            ) / (4.0 * h * h)
            H[:, :, a, b] = v
            H[:, :, b, a] = v
    return H


# ---------------------------------------------------------------------------
# operator algebra
# ---------------------------------------------------------------------------

def D_from_hessian(H: np.ndarray, k: float) -> np.ndarray:
    """``-Lap Q_ij - k/2 (d_j Div Q_i + d_i Div Q_j - 2/3 div Div Q delta_ij)``."""
    lap = np.einsum("ijaa->ij", H)
    grad_div = np.einsum("illj->ij", H)  # d_j (Div Q)_i
    divdiv = np.einsum("illi->", H)
    return -lap - 0.5 * k * (grad_div + grad_div.T - (2.0 / 3.0) * divdiv * _I3)


def Dstar_from_hessian(H: np.ndarray, k: float) -> np.ndarray:
    """``-Lap phi_ij - k/2 (d_j Div phi_i + d_i Div phi_j) + k/3 d_i d_j tr phi``."""
    lap = np.einsum("ijaa->ij", H)
    grad_div = np.einsum("illj->ij", H)
    hess_tr = np.einsum("llij->ij", H)
    return -lap - 0.5 * k * (grad_div + grad_div.T) + (k / 3.0) * hess_tr


def L_from_gradient(G: np.ndarray, nu, k: float) -> np.ndarray:
    """``d phi_ij/d nu + k/2 (Div phi_i nu_j + Div phi_j nu_i) - k/3 d_j tr phi nu_i``.

    Broadcasts over leading axes of ``G`` (``(..., 3, 3, 3)``) and ``nu``.
    The result is not symmetric in general.
    """
    nu = np.asarray(nu, dtype=float)
    dnu = np.einsum("...ijl,...l->...ij", G, nu)
    div = np.einsum("...ill->...i", G)
    grad_tr = np.einsum("...llj->...j", G)
    sym = np.einsum("...i,...j->...ij", div, nu)
    return (
        dnu
        + 0.5 * k * (sym + np.swapaxes(sym, -1, -2))
        - (k / 3.0) * np.einsum("...j,...i->...ij", grad_tr, nu)
    )


def N_from_gradient(G: np.ndarray, nu, k: float) -> np.ndarray:
    """``-d Q_ij/d nu - k/2 (Div Q_i nu_j + Div Q_j nu_i) + k/3 (Div Q . nu) delta_ij``."""
    nu = np.asarray(nu, dtype=float)
    dnu = np.einsum("...ijl,...l->...ij", G, nu)
    div = np.einsum("...ill->...i", G)
    sym = np.einsum("...i,...j->...ij", div, nu)
    flux = np.einsum("...i,...i->...", div, nu)
    return (
        -dnu
        - 0.5 * k * (sym + np.swapaxes(sym, -1, -2))
        + (k / 3.0) * flux[..., None, None] * _I3
    )


# ---------------------------------------------------------------------------
# operators on callables
# ---------------------------------------------------------------------------

def apply_D(f: TensorFieldFn, p, k: float, h: float = DEFAULT_H) -> np.ndarray:
    return D_from_hessian(fd_hessian(f, p, h), k)


def apply_Dstar(f: TensorFieldFn, p, k: float, h: float = DEFAULT_H) -> np.ndarray:
    return Dstar_from_hessian(fd_hessian(f, p, h), k)


def boundary_L(f: TensorFieldFn, p, nu, k: float, h: float = DEFAULT_H) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
        raise ValueError("nu must be a unit vector")
    return L_from_gradient(fd_gradient(f, p, h), nu, k)


def boundary_N(f: TensorFieldFn, p, nu, k: float, h: float = DEFAULT_H) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
        raise ValueError("nu must be a unit vector")
    return N_from_gradient(fd_gradient(f, p, h), nu, k)


def refinement_pair(op, *args, h: float = DEFAULT_H, **kwargs):
    """Evaluate ``op(*args, h=h)`` and ``op(*args, h=h/2)``.

    Returns ``(value_h, value_h2, observed_order)`` where the order is
    measured against the exact value ``kwargs['exact']`` if given, else
    ``None``.
    """
    exact = kwargs.pop("exact", None)
    v1 = op(*args, h=h, **kwargs)
    v2 = op(*args, h=h / 2.0, **kwargs)
    order = None
    if exact is not None:
        e1 = np.max(np.abs(v1 - exact))
        e2 = np.max(np.abs(v2 - exact))
        order = float(np.log2(e1 / e2)) if e2 > 0 else np.inf
    return v1, v2, order


# ---------------------------------------------------------------------------
# sphere integrals
# ---------------------------------------------------------------------------

def sphere_monomial_integral(p1: int, p2: int, p3: int, eps: float = 1.0,
                             center=(0.0, 0.0, 0.0), n_theta: int = 64,
                             n_phi: int = 128) -> float:
    """Quadrature of ``x^p1 y^p2 z^p3 / r^6`` over the sphere of radius ``eps``.

    Coordinates are relative to ``center``.  For ``p1 + p2 + p3 == 4`` the
    value does not depend on ``eps``.
    """
    if min(p1, p2, p3) < 0 or p1 + p2 + p3 != 4:
        raise ValueError("exponents must be non-negative and sum to 4")
    quad = build_quadrature(n_theta, n_phi)
    c = np.asarray(center, dtype=float)
    pts, w = quad.scaled(eps, c)
    d = pts - c
    r2 = np.einsum("ni,ni->n", d, d)
    vals = d[:, 0] ** p1 * d[:, 1] ** p2 * d[:, 2] ** p3 / r2**3
    return float(w @ vals)


def c_constant(m: int, n: int, i: int, j: int, k: float, eps: float = 1.0,
               center=(0.0, 0.0, 0.0), n_theta: int = 64, n_phi: int = 128,
               method: str = "exact", h: float | None = None) -> float:
    """``int_{dB_eps(c)} L(F^{mn}_c)_{ij} dS`` with ``nu`` pointing at ``c``.

    ``nu`` is the outward normal of the punctured domain, i.e. towards the
    source.  ``method="exact"`` differentiates the kernel by complex step;
    ``method="fd"`` uses central differences with step ``h``
    (default ``1e-3 * eps``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    quad = build_quadrature(n_theta, n_phi)
    c = np.asarray(center, dtype=float)
    pts, w = quad.scaled(eps, c)
    nu = -(pts - c) / eps
    if method == "exact":
        G = fundsol.fundamental_gradient(m, n, pts - c, k)
    elif method == "fd":
        step = 1e-3 * eps if h is None else h
        G = np.stack([fd_gradient(lambda q: fundsol.fundamental(m, n, q - c, k), x, step) for x in pts])
    else:
        raise ValueError(f"unknown method {method!r}")
    L = L_from_gradient(G, nu, k)
    return float(w @ L[:, i - 1, j - 1])
