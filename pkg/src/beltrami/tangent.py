"""Tangent data of the field: directional derivatives in ``a`` and their R-linear equation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWronskianError
from .field import FieldSample, solve_for_a
from .grid import ComplexGrid, SpectralOperators
from .solver import LinearSolveProblem, _bound, solve_rlinear
from .structure import StructureFunction

__all__ = [
    "DirectionalDerivative",
    "TangentData",
    "LinearizationReport",
    "NondegeneracyReport",
    "default_step",
    "directional_derivative",
    "linearized_coefficients",
    "linear_residual",
    "verify_linearization",
    "wronskian_coefficients",
    "tangent_data",
    "nondegeneracy_report",
    "rlinear_tangent",
]


def default_step(a: complex) -> float:
    return 1e-3 * max(1.0, abs(a))


@dataclass(frozen=True, eq=False)
class DirectionalDerivative:
    """Difference quotient ``eta`` of the field at ``a`` in direction ``e``, with its Wirtinger grids."""

    a: complex
    e: complex
    t: float
    value: ComplexGrid
    dz: ComplexGrid
    dzbar: ComplexGrid
    central: bool = True

    @property
    def spec(self):
        return self.value.spec

    def __add__(self, other):
        return DirectionalDerivative(self.a, self.e + other.e, self.t, self.value + other.value, self.dz + other.dz, self.dzbar + other.dzbar, self.central)

    def scaled(self, c: float):
        c = float(c)
        return DirectionalDerivative(self.a, c * self.e, self.t, self.value * c, self.dz * c, self.dzbar * c, self.central)


def _solve_near(H, a, ops, base: FieldSample | None, **kw) -> FieldSample:
    if base is None or base.jacobian is None or a == 0 or base.a == 0:
        return solve_for_a(H, a, ops, **kw)
    d = a - base.a
    dw = np.linalg.solve(base.jacobian, np.array([d.real, d.imag]))
    return solve_for_a(H, a, ops, w0=base.w + complex(dw[0], dw[1]), jac0=base.jacobian, omega0=base.solution.omega, **kw)


def _quotient(plus: FieldSample, minus: FieldSample, denom: float):
    vp, vm = plus.value_grid(), minus.value_grid()
    return (
        (vp - vm) / denom,
        (plus.solution.dz_f - minus.solution.dz_f) / denom,
        (plus.solution.dzbar_f - minus.solution.dzbar_f) / denom,
    )


def directional_derivative(
    H: StructureFunction,
    a: complex,
    e: complex,
    ops: SpectralOperators,
    t: float | None = None,
    central: bool = True,
    base: FieldSample | None = None,
    tol: float = 1e-12,
    solver_tol: float = 1e-13,
) -> DirectionalDerivative:
    """``(phi_{a+te} - phi_{a-te}) / 2t`` (or the one-sided ``(phi_{a+te} - phi_a) / t``)."""
    a, e = complex(a), complex(e)
    t = default_step(a) if t is None else float(t)
    if not t > 0:
        raise ValueError("t must be positive")
    kw = dict(tol=tol, solver_tol=solver_tol)
    if base is None:
        base = solve_for_a(H, a, ops, **kw)
    plus = _solve_near(H, a + t * e, ops, base, **kw)
    if central:
        minus = _solve_near(H, a - t * e, ops, base, **kw)
        v, d, db = _quotient(plus, minus, 2 * t)
    else:
        v, d, db = _quotient(plus, base, t)
    return DirectionalDerivative(a, e, t, v, d, db, central)


def linearized_coefficients(H: StructureFunction, phi: FieldSample, floor_rel: float = 1e-8):
    """``(mu_a, nu_a, undefined)`` from the w-gradient of ``H`` along ``d_z phi_a``.

    For structure functions not differentiable at ``w = 0`` the gradient is
    only taken where ``|d_z phi_a|`` exceeds ``floor_rel * max|d_z phi_a|``;
    the remaining support samples are returned in the ``undefined`` mask
    (coefficients set to 0 there).
    """
    spec = phi.spec
    grad = phi.solution.dz_f.values if phi.a != 0 else np.zeros((spec.n, spec.n), complex)
    bound = _bound(H, spec)
    undefined = np.zeros(grad.shape, dtype=bool)
    if H.nondifferentiable_at_zero:
        fl = floor_rel * max(float(np.max(np.abs(grad))), 1e-300)
        undefined = bound.active & (np.abs(grad) <= fl)
        safe = np.where(undefined, 1.0, grad)
        mu, nu = bound.gradient(safe)
        mu[undefined] = 0
        nu[undefined] = 0
    else:
        mu, nu = bound.gradient(grad)
    return ComplexGrid(spec, mu), ComplexGrid(spec, nu), undefined


def linear_residual(eta: DirectionalDerivative, mu: ComplexGrid, nu: ComplexGrid, R: float | None = None) -> float:
    """``L2(D(0,R))`` norm of ``d_zbar eta - mu d_z eta - nu conj(d_z eta)``."""
    spec = eta.spec
    R = spec.support_radius if R is None else R
    d = eta.dz.values
    r = eta.dzbar.values - mu.values * d - nu.values * np.conj(d)
    m = spec.disk_mask(R)
    return math.sqrt(spec.cell_area * float(np.sum(np.abs(r[m]) ** 2)))


def _w12_diff(e1: DirectionalDerivative, e2: DirectionalDerivative, R: float) -> float:
    spec = e1.spec
    m = spec.disk_mask(R)
    d = np.abs(e1.dz.values - e2.dz.values) + np.abs(e1.dzbar.values - e2.dzbar.values)
    return math.sqrt(spec.cell_area * float(np.sum(d[m] ** 2)))


def rlinear_tangent(mu: ComplexGrid, nu: ComplexGrid, e: complex, ops: SpectralOperators, tol: float = 1e-13):
    """Solution of the R-linear equation fixing 0 and mapping 1 to ``e``, built from the
    principal solutions with slopes 1 and i.  Returns ``(values, dz, dzbar)`` grids."""
    p1 = solve_rlinear(LinearSolveProblem(mu, nu, 1.0), ops, tol=tol)
    pi = solve_rlinear(LinearSolveProblem(mu, nu, 1j), ops, tol=tol)
    spec = ops.spec

    def normalized(p):
        return p.w_infinity * spec.z + p.f_values.values - p.value(0j)

    g1, gi = normalized(p1), normalized(pi)
    v1, vi = p1.value(1.0 + 0j) - p1.value(0j), pi.value(1.0 + 0j) - pi.value(0j)
    M = np.array([[v1.real, vi.real], [v1.imag, vi.imag]])
    alpha, beta = np.linalg.solve(M, np.array([complex(e).real, complex(e).imag]))
    return (
        ComplexGrid(spec, alpha * g1 + beta * gi),
        ComplexGrid(spec, alpha * p1.dz_f.values + beta * pi.dz_f.values),
        ComplexGrid(spec, alpha * p1.dzbar_f.values + beta * pi.dzbar_f.values),
    )


@dataclass
class LinearizationReport:
    a: complex
    e: complex
    t_ladder: list
    residuals: list
    ratios: list
    w12_differences: list
    cross_route_gap: float
    grid_error: float
    gap_bound: float
    solver_tol: float

    @property
    def decreasing(self) -> bool:
        return all(r2 < r1 for r1, r2 in zip(self.residuals, self.residuals[1:]))

    def ok(self, max_ratio: float = 0.75) -> bool:
        return all(q <= max_ratio for q in self.ratios) and self.cross_route_gap <= self.gap_bound

    def as_dict(self):
        return {
            "a": [self.a.real, self.a.imag],
            "e": [self.e.real, self.e.imag],
            "t_ladder": self.t_ladder,
            "residuals": self.residuals,
            "ratios": self.ratios,
            "w12_differences": self.w12_differences,
            "cross_route_gap": self.cross_route_gap,
            "grid_error": self.grid_error,
            "gap_bound": self.gap_bound,
        }


def verify_linearization(
    H: StructureFunction,
    a: complex,
    e: complex,
    ops: SpectralOperators,
    t: float | None = None,
    halvings: int = 2,
    central: bool = True,
    base: FieldSample | None = None,
    tol: float = 1e-12,
    solver_tol: float = 1e-13,
) -> LinearizationReport:
    """Residual ladder ``r(t), r(t/2), ...`` of the linearized equation plus the cross-route gap.

    The cross route solves the R-linear equation with coefficients
    ``mu_a, nu_a`` directly and normalizes it to fix 0 and map 1 to ``e``;
    its sup distance to the finest difference quotient on ``|z| <= rho`` is
    compared with ``5 * max(t^2, h^2)`` (``t`` the finest step, ``h`` the mesh
    width standing in for the grid error).
    """
    a, e = complex(a), complex(e)
    spec = ops.spec
    if base is None:
        base = solve_for_a(H, a, ops, tol=tol, solver_tol=solver_tol)
    t = 20 * default_step(a) if t is None else float(t)
    mu, nu, _ = linearized_coefficients(H, base)
    ts = [t / 2**j for j in range(halvings + 1)]
    etas = [directional_derivative(H, a, e, ops, s, central, base, tol, solver_tol) for s in ts]
    res = [linear_residual(x, mu, nu) for x in etas]
    ratios = [r2 / r1 if r1 > 0 else 0.0 for r1, r2 in zip(res, res[1:])]
    w12 = [_w12_diff(x, y, spec.support_radius) for x, y in zip(etas, etas[1:])]
    g, _, _ = rlinear_tangent(mu, nu, e, ops)
    m = spec.disk_mask(spec.support_radius)
    gap = float(np.max(np.abs(etas[-1].value.values - g.values)[m]))
    grid_error = spec.h**2
    return LinearizationReport(
        a, e, ts, res, ratios, w12, gap, grid_error, 5 * max(ts[-1] ** 2, grid_error), solver_tol
    )


def wronskian_coefficients(eta_1, eta_i, floor_rel: float = 1e-6, raise_on_degenerate: bool = True, R: float | None = None):
    """Coefficients ``(mu, nu)`` of the R-linear equation solved by a tangent pair.

    Accepts :class:`DirectionalDerivative` objects or ``(dz, dzbar)`` pairs of
    arrays.  Samples with ``|Im(d eta_1 conj(d eta_i))|`` below ``floor_rel``
    times its grid maximum are degenerate; they raise
    :class:`DegenerateWronskianError` (or are set to NaN).
    """
    def parts(x):
        if isinstance(x, DirectionalDerivative):
            return x.dz.values, x.dzbar.values
        d, db = x
        return (getattr(d, "values", d), getattr(db, "values", db))

    p1, q1 = parts(eta_1)
    pi, qi = parts(eta_i)
    p1, q1, pi, qi = (np.asarray(v, dtype=np.complex128) for v in (p1, q1, pi, qi))
    im = np.imag(p1 * np.conj(pi))
    scale = float(np.max(np.abs(im))) if im.size else 0.0
    bad = np.abs(im) < floor_rel * scale if scale > 0 else np.ones(im.shape, bool)
    if R is not None and isinstance(eta_1, DirectionalDerivative):
        inside = eta_1.spec.disk_mask(R)
    else:
        inside = np.ones(im.shape, bool)
    if raise_on_degenerate and np.any(bad & inside):
        pts = eta_1.spec.z[bad & inside] if isinstance(eta_1, DirectionalDerivative) else np.argwhere(bad & inside)
        raise DegenerateWronskianError(f"{int(np.sum(bad & inside))} degenerate Wronskian samples", points=pts)
    den = 2j * np.where(bad, np.nan, im)
    with np.errstate(invalid="ignore"):
        mu = (q1 * np.conj(pi) - qi * np.conj(p1)) / den
        nu = (p1 * qi - pi * q1) / den
    return mu, nu


@dataclass(frozen=True, eq=False)
class TangentData:
    a: complex
    eta_1: DirectionalDerivative
    eta_i: DirectionalDerivative
    mu_a: ComplexGrid
    nu_a: ComplexGrid
    det_grid: np.ndarray
    t: float
    base: FieldSample
    undefined: np.ndarray


def tangent_data(
    H: StructureFunction,
    a: complex,
    ops: SpectralOperators,
    t: float | None = None,
    base: FieldSample | None = None,
    tol: float = 1e-12,
    solver_tol: float = 1e-13,
) -> TangentData:
    a = complex(a)
    if base is None:
        base = solve_for_a(H, a, ops, tol=tol, solver_tol=solver_tol)
    t = default_step(a) if t is None else float(t)
    e1 = directional_derivative(H, a, 1.0, ops, t, True, base, tol, solver_tol)
    ei = directional_derivative(H, a, 1j, ops, t, True, base, tol, solver_tol)
    mu, nu, undefined = linearized_coefficients(H, base)
    det = np.imag(e1.dz.values * np.conj(ei.dz.values))
    return TangentData(a, e1, ei, mu, nu, det, t, base, undefined)


@dataclass
class NondegeneracyReport:
    a: complex
    t: float
    det_min: float
    det_max: float
    det_sign: int
    det_min_abs: float
    slope_ratio_min: float
    slope_ratio_max: float
    coeff_gap_sup: float
    coeff_bound_excess: float

    def as_dict(self):
        d = dict(self.__dict__)
        d["a"] = [self.a.real, self.a.imag]
        d["slope_ratio_minmax"] = [d.pop("slope_ratio_min"), d.pop("slope_ratio_max")]
        return d


def nondegeneracy_report(
    H: StructureFunction,
    a: complex,
    ops: SpectralOperators,
    t: float | None = None,
    R: float | None = None,
    data: TangentData | None = None,
) -> NondegeneracyReport:
    """Sign and size of ``Im(d eta_1 conj(d eta_i))`` on ``|z| <= rho``, the slope ratio
    ``|d_z phi_a| / |a|`` on ``|z| <= R``, and the gap between the Wronskian and
    gradient routes to ``(mu_a, nu_a)``."""
    if data is None:
        data = tangent_data(H, a, ops, t)
    spec = ops.spec
    R = spec.support_radius if R is None else R
    m = spec.disk_mask(spec.support_radius)
    det = data.det_grid[m]
    lo, hi = float(det.min()), float(det.max())
    sign = 1 if lo > 0 else (-1 if hi < 0 else 0)
    slope = np.abs(data.base.solution.dz_f.values[spec.disk_mask(R)]) / abs(data.a)
    mu_w, nu_w = wronskian_coefficients(data.eta_1, data.eta_i, raise_on_degenerate=False)
    ok = m & ~data.undefined & np.isfinite(mu_w)
    gap = max(
        float(np.max(np.abs(mu_w - data.mu_a.values)[ok])),
        float(np.max(np.abs(nu_w - data.nu_a.values)[ok])),
    )
    excess = float(np.max(np.abs(data.mu_a.values) + np.abs(data.nu_a.values))) - H.k_bound
    return NondegeneracyReport(
        data.a, data.t, lo, hi, sign, float(np.min(np.abs(det))), float(slope.min()), float(slope.max()), gap, excess
    )
