"""Analytic audit suite behind ``saturnq verify``.

Every check returns :class:`Check` records (name, k, measured value,
tolerance, pass flag).  ``fault`` injects a known defect so the negative
control can be exercised: ``"f11-scale"`` multiplies F^11 by 1.01 in the
checks that use it.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import fundsol
from .operators import apply_Dstar, c_constant, fd_hessian, sphere_monomial_integral

K_SWEEP = (-0.9, 0.0, 1.0, 5.0, 20.0)
FAULTS = ("f11-scale",)
SEED = 20240601


@dataclass
class Check:
    name: str
    k: float | None
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _rand_dirs(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class _Kernels:
    """Kernel access with optional fault injection."""

    def __init__(self, fault: str | None):
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}")
        self.scale11 = 1.01 if fault == "f11-scale" else 1.0

    def fundamental(self, m, n, p, k):
        F = fundsol.fundamental(m, n, p, k)
        return F * self.scale11 if (m, n) == (1, 1) else F

    def fhat11(self, xi, k):
        return fundsol.fhat11(xi, k) * self.scale11


def check_laplace(kern: _Kernels, rng, n_points: int = 100, tol: float = 1e-12) -> list[Check]:
    p = _rand_dirs(rng, n_points) * rng.uniform(0.1, 10.0, size=(n_points, 1))
    r = np.linalg.norm(p, axis=1)
    out = []
    for m, n in fundsol.PAIRS:
        expect = fundsol.unit_matrix(m, n)[None] / (4.0 * np.pi * r[:, None, None])
        got = kern.fundamental(m, n, p, 0.0)
        err = float(np.max(np.abs(got - expect) * r[:, None, None]))  # relative to 1/r scale
        out.append(Check(f"laplace_collapse_F{m}{n}", 0.0, err, tol, err <= tol))
    return out


def check_fourier(kern: _Kernels, rng, k: float, n_points: int = 100, tol: float = 1e-10) -> Check:
    e11 = fundsol.unit_vec6(1, 1)
    worst = 0.0
    for _ in range(n_points):
        xi = rng.normal(size=3) * rng.uniform(0.2, 5.0)
        worst = max(worst, float(np.max(np.abs(fundsol.symbol_matrix(xi, k) @ kern.fhat11(xi, k) - e11))))
    return Check("fourier_consistency", k, worst, tol, worst <= tol)


def check_inverse_table(kern: _Kernels, rng, k: float, n_points: int = 20, tol: float = 1e-10) -> Check:
    p = _rand_dirs(rng, n_points) * rng.uniform(0.5, 3.0, size=(n_points, 1))
    a = kern.fundamental(1, 1, p, k)
    b = fundsol.fundamental_via_fourier(1, 1, p, k, numerator=fundsol.fhat11_numerator)
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return Check("inverse_transform_table_F11", k, err, tol, err <= tol)


def check_homogeneity(kern: _Kernels, rng, k: float, tol: float = 1e-12) -> Check:
    p = _rand_dirs(rng, 20) * rng.uniform(0.5, 3.0, size=(20, 1))
    worst = 0.0
    for m, n in fundsol.PAIRS:
        for t in (0.5, 2.0, 7.0):
            a = kern.fundamental(m, n, t * p, k) * t
            b = kern.fundamental(m, n, p, k)
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    return Check("homogeneity", k, worst, tol, worst <= tol)


def check_adjoint(kern: _Kernels, rng, k: float, n_points: int = 20, h: float = 5e-4,
                  min_order: float = 1.8, rel_tol: float = 1e-5) -> list[Check]:
    """FD ``D*`` applied to each kernel away from the source.

    Residuals are divided by the local kernel scale ``(1 + |k|) max|d2 F|``
    at the point, the size of the terms that cancel in ``D* F``.  The order
    compares the worst scaled residual over all points at ``2h`` and ``h``
    for each kernel; single points far from the source sit at rounding
    level and give no usable order on their own.
    """
    p = _rand_dirs(rng, n_points) * rng.uniform(0.5, 3.0, size=(n_points, 1))
    worst_res, worst_order = 0.0, np.inf
    for m, n in fundsol.PAIRS:
        def f(x, m=m, n=n):
            return kern.fundamental(m, n, x, k)

        e_coarse, e_fine = 0.0, 0.0
        for x in p:
            scale = (1.0 + abs(k)) * float(np.max(np.abs(fd_hessian(f, x, h))))
            e_coarse = max(e_coarse, float(np.max(np.abs(apply_Dstar(f, x, k, h=2.0 * h)))) / scale)
            e_fine = max(e_fine, float(np.max(np.abs(apply_Dstar(f, x, k, h=h)))) / scale)
        worst_res = max(worst_res, e_fine)
        worst_order = min(worst_order, float(np.log2(e_coarse / e_fine)) if e_fine > 0 else np.inf)
    return [
        Check("adjoint_annihilation_residual", k, worst_res, rel_tol, worst_res <= rel_tol),
        Check("adjoint_annihilation_order", k, worst_order, min_order, worst_order >= min_order,
              "value is the smallest observed order; tolerance is the minimum"),
    ]


def monomial_exact(p1: int, p2: int, p3: int) -> float:
    e = sorted((p1, p2, p3), reverse=True)
    if any(v % 2 for v in e):
        return 0.0
    if e[0] == 4:
        return 4.0 * np.pi / 5.0
    return 4.0 * np.pi / 15.0


def check_monomials(tol: float = 1e-8) -> list[Check]:
    out = []
    for eps in (1.0, 0.05):
        worst = 0.0
        for p1 in range(5):
            for p2 in range(5 - p1):
                p3 = 4 - p1 - p2
                got = sphere_monomial_integral(p1, p2, p3, eps=eps, center=(0.3, -0.2, 0.7))
                worst = max(worst, abs(got - monomial_exact(p1, p2, p3)))
        out.append(Check(f"sphere_monomials_eps={eps:g}", None, worst, tol, worst <= tol))
    return out


def check_c_constants(k: float, tol: float = 1e-6, eps: float = 1.0) -> Check:
    worst = 0.0
    for m, n in fundsol.PAIRS:
        for i in range(1, 4):
            for j in range(1, 4):
                expect = 1.0 if (i, j) in ((m, n), (n, m)) else 0.0
                worst = max(worst, abs(c_constant(m, n, i, j, k, eps=eps, n_theta=16, n_phi=32) - expect))
    return Check("c_constant_indicator", k, worst, tol, worst <= tol)


def run_audit(ks=K_SWEEP, fault: str | None = None, seed: int = SEED,
              c_ks=(0.5, 5.0), include_adjoint: bool = True) -> list[Check]:
    """The full audit in a fixed order (deterministic given ``seed``)."""
    kern = _Kernels(fault)
    rng = np.random.default_rng(seed)
    checks = check_laplace(kern, rng)
    for k in ks:
        checks.append(check_fourier(kern, rng, k))
        checks.append(check_inverse_table(kern, rng, k))
        checks.append(check_homogeneity(kern, rng, k))
        if include_adjoint:
            checks.extend(check_adjoint(kern, rng, k))
    checks.extend(check_monomials())
    for k in c_ks:
        checks.append(check_c_constants(k))
    return checks
