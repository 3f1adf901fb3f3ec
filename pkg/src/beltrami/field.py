"""The field of normalized solutions ``phi_a`` (``phi_a(0) = 0``, ``phi_a(1) = a``).

Solutions are parametrized internally by their slope ``w`` at infinity; the
``a``-parametrization is obtained by Newton iteration on the period map
``A(w) = f^w(1) - f^w(0)``.  Only translations preserve solutions of a general
nonlinear equation, so the normalization has to be solved for.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BeltramiError, NewtonStallError
from .grid import ComplexGrid, SpectralOperators
from .solver import PrincipalSolution, solve_nonlinear, zero_solution
from .structure import StructureFunction

__all__ = [
    "FieldSample",
    "PeriodMap",
    "SweepResult",
    "BiLipReport",
    "period",
    "solve_for_a",
    "field_sweep",
    "iter_field",
    "bilip_report",
    "bilip_from_samples",
    "calibrate_eta",
    "eta_shape",
    "distortion_K",
]


def distortion_K(k: float) -> float:
    return (1 + k) / (1 - k)


def eta_shape(t, K: float):
    """``max(t^K, t^(1/K))``; the quasisymmetry modulus up to its constant."""
    t = np.asarray(t, dtype=float)
    return np.maximum(t**K, t ** (1.0 / K))


@dataclass(frozen=True, eq=False)
class FieldSample:
    """A field member ``phi_a = f^w - f^w(0)`` with ``A(w) = a``."""

    a: complex
    w: complex
    solution: PrincipalSolution
    newton_iterations: int = 0
    jacobian: np.ndarray | None = field(default=None, repr=False)

    @property
    def spec(self):
        return self.solution.spec

    @property
    def offset(self) -> complex:
        return self.solution.value(0j)

    def value(self, z):
        return self.solution.value(z) - self.offset

    def dz(self, z):
        return self.solution.dz(z)

    def dzbar(self, z):
        return self.solution.dzbar(z)

    def value_grid(self) -> ComplexGrid:
        spec = self.spec
        return ComplexGrid(spec, self.w * spec.z + self.solution.f_values.values - self.offset)

    @property
    def residual(self) -> float:
        return self.solution.residual


@dataclass
class PeriodMap:
    """Sampled pairs ``(w, A(w))`` plus the current Newton state."""

    samples: list = field(default_factory=list)
    w: complex = 0j
    jacobian: np.ndarray | None = None

    def add(self, w, A):
        self.samples.append((complex(w), complex(A)))

    def injectivity_violations(self, tol: float = 1e-9):
        """Pairs of distinct slopes mapped to the same period within ``tol``."""
        bad = []
        s = self.samples
        for i in range(len(s)):
            for j in range(i + 1, len(s)):
                if abs(s[i][0] - s[j][0]) > tol and abs(s[i][1] - s[j][1]) <= tol:
                    bad.append((s[i], s[j]))
        return bad


def _vec(c: complex):
    return np.array([c.real, c.imag])


def _cx(v) -> complex:
    return complex(v[0], v[1])


def _period_of(sol: PrincipalSolution) -> complex:
    return sol.value(1.0 + 0j) - sol.value(0j)


def period(H: StructureFunction, w: complex, ops: SpectralOperators, tol: float = 1e-12, **kw) -> complex:
    """``A(w) = f^w(1) - f^w(0)`` for the principal solution with slope ``w``."""
    if w == 0:
        return 0j
    return _period_of(solve_nonlinear(H, w, ops, tol=tol, **kw))


class _Evaluator:
    def __init__(self, H, ops, solver_tol, max_iter, pmap):
        self.H, self.ops, self.tol, self.max_iter, self.pmap = H, ops, solver_tol, max_iter, pmap
        self.solves = 0

    def __call__(self, w, omega0=None):
        sol = solve_nonlinear(self.H, w, self.ops, tol=self.tol, max_iter=self.max_iter, omega0=omega0)
        self.solves += 1
        A = _period_of(sol)
        if self.pmap is not None:
            self.pmap.add(w, A)
        return sol, A


def _fd_jacobian(ev: _Evaluator, w: complex, omega0, rel_step: float) -> np.ndarray:
    d = rel_step * max(1.0, abs(w))
    cols = []
    for e in (1.0, 1j):
        _, Ap = ev(w + d * e, omega0)
        _, Am = ev(w - d * e, omega0)
        cols.append(_vec((Ap - Am) / (2 * d)))
    return np.column_stack(cols)


def _check_jacobian(J, w):
    det = float(np.linalg.det(J))
    scale = float(np.sum(J * J))
    if not math.isfinite(det) or abs(det) <= 1e-12 * max(scale, 1e-300):
        raise NewtonStallError(f"period-map Jacobian is singular near w={w:.6g} (det={det:.3e})", w=w)


def solve_for_a(
    H: StructureFunction,
    a: complex,
    ops: SpectralOperators,
    tol: float = 1e-10,
    max_newton: int = 30,
    w0: complex | None = None,
    jac0: np.ndarray | None = None,
    omega0=None,
    solver_tol: float = 1e-12,
    max_iter: int = 1000,
    fd_step: float = 1e-5,
    period_map: PeriodMap | None = None,
) -> FieldSample:
    """Field member ``phi_a``: Newton on ``w -> A(w) - a`` seeded at ``w0`` (default ``a``).

    The 2x2 real Jacobian starts from ``jac0`` or central differences with
    step ``fd_step * max(1, |w|)`` and is refreshed by Broyden updates; steps
    are halved while ``|A - a|`` grows.  Convergence means
    ``|A(w) - a| <= tol * max(1, |a|)``.

    Raises
    ------
    NewtonStallError
        Singular Jacobian or no progress.
    NonConvergenceError
        From the underlying fixed-point solver.
    """
    a = complex(a)
    if a == 0:
        return FieldSample(0j, 0j, zero_solution(ops.spec), 0, None)
    ev = _Evaluator(H, ops, solver_tol, max_iter, period_map)
    target = tol * max(1.0, abs(a))
    w = complex(a if w0 is None else w0)
    sol, A = ev(w, omega0)
    r = A - a
    J = None if jac0 is None else np.array(jac0, dtype=float)
    steps = 0
    slow = 0
    while abs(r) > target:
        if steps >= max_newton:
            raise NewtonStallError(f"Newton did not reach |A - a| <= {target:.2e} in {max_newton} steps (|A - a| = {abs(r):.3e})", w=w)
        if J is None:
            J = _fd_jacobian(ev, w, sol.omega, fd_step)
        _check_jacobian(J, w)
        dx = -np.linalg.solve(J, _vec(r))
        lam = 1.0
        while True:
            w_new = w + lam * _cx(dx)
            sol_new, A_new = ev(w_new, sol.omega)
            r_new = A_new - a
            if abs(r_new) < abs(r) or lam < 1.0 / 64:
                break
            lam *= 0.5
        steps += 1
        s = _vec(w_new - w)
        y = _vec(r_new - r)
        ss = float(s @ s)
        if ss > 0:
            J = J + np.outer(y - J @ s, s) / ss
        if abs(r_new) > 0.5 * abs(r):
            slow += 1
            if slow >= 2:
                J = None
                slow = 0
        else:
            slow = 0
        if abs(r_new) >= abs(r) and lam < 1.0 / 64:
            raise NewtonStallError(f"Newton made no progress near w={w_new:.6g} (|A - a| = {abs(r_new):.3e})", w=w_new)
        w, sol, r = w_new, sol_new, r_new
    if period_map is not None:
        period_map.w = w
        period_map.jacobian = J
    return FieldSample(a, w, sol, steps, J)


@dataclass
class SweepResult:
    samples: list
    failures: list
    newton_iterations: int
    solves: int = 0

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def iter_field(
    H: StructureFunction,
    a_set,
    ops: SpectralOperators,
    tol: float = 1e-10,
    warm: bool = True,
    **kw,
):
    """Yield ``(a, FieldSample | BeltramiError)`` along ``a_set`` in order.

    With ``warm`` each Newton solve is seeded by a secant prediction from the
    previous sample (slope, Jacobian and omega all reused).
    """
    prev = None
    for a in a_set:
        a = complex(a)
        try:
            if warm and prev is not None and prev.a != 0 and prev.jacobian is not None:
                J = prev.jacobian
                dw = np.linalg.solve(J, _vec(a - prev.a))
                sample = solve_for_a(H, a, ops, tol=tol, w0=prev.w + _cx(dw), jac0=J, omega0=prev.solution.omega, **kw)
            elif warm and prev is not None and prev.a != 0:
                sample = solve_for_a(H, a, ops, tol=tol, w0=prev.w * a / prev.a, omega0=prev.solution.omega, **kw)
            else:
                sample = solve_for_a(H, a, ops, tol=tol, **kw)
        except BeltramiError as exc:
            yield a, exc
            continue
        if sample.a != 0:
            prev = sample
        yield a, sample


def field_sweep(
    H: StructureFunction,
    a_set,
    ops: SpectralOperators,
    tol: float = 1e-10,
    warm: bool = True,
    workers: int = 1,
    **kw,
) -> SweepResult:
    """Solve for every ``a`` in ``a_set``; failures are collected, not raised.

    Cold-start sweeps (``warm=False``) may fan out over ``workers`` threads;
    output order always follows ``a_set``.
    """
    a_list = [complex(a) for a in a_set]
    if not a_list:
        raise ValueError("a_set must be nonempty")
    samples, failures = [], []
    if not warm and workers > 1:
        def one(a):
            try:
                return a, solve_for_a(H, a, ops, tol=tol, **kw)
            except BeltramiError as exc:
                return a, exc

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, a_list))
    else:
        results = list(iter_field(H, a_list, ops, tol=tol, warm=warm, **kw))
    its = 0
    for a, res in results:
        if isinstance(res, FieldSample):
            samples.append(res)
            its += res.newton_iterations
        else:
            failures.append((a, f"{type(res).__name__}: {res}"))
    return SweepResult(samples, failures, its)


@dataclass
class BiLipReport:
    a: complex
    b: complex
    R: float
    K: float
    min_ratio: float
    max_ratio: float
    l2_ratio: float
    envelope_constant: float
    eta_upper: float
    eta_lower: float
    difference_min_jacobian: float

    def as_dict(self):
        d = dict(self.__dict__)
        d["a"] = [self.a.real, self.a.imag]
        d["b"] = [self.b.real, self.b.imag]
        return d


def bilip_from_samples(
    pa: FieldSample,
    pb: FieldSample,
    R: float,
    K: float,
    C: float | None = None,
) -> BiLipReport:
    """Bi-Lipschitz quotients of ``a -> phi_a`` from two solved field members.

    ``min_ratio`` is taken over ``|z| >= 1/R`` inside the support disk (NaN
    when that set is empty), ``max_ratio`` over ``|z| <= R``.  ``l2_ratio`` uses the
    operator norm ``|d_z g| + |d_zbar g|`` of the differential.  The envelope
    constant is the smallest ``C`` for which every sampled ratio lies between
    ``1 / (C s(1/|z|))`` and ``C s(|z|)``, ``s(t) = max(t^K, t^(1/K))``.
    """
    spec = pa.spec
    if spec != pb.spec:
        raise ValueError("samples live on different grids")
    if pa.a == pb.a:
        raise ValueError("a and b must differ")
    if R > spec.support_radius * (1 + 1e-12):
        raise ValueError("R exceeds the grid support radius")
    dab = abs(pa.a - pb.a)
    diff = (pa.value_grid().values - pb.value_grid().values)
    ratio = np.abs(diff) / dab
    r = spec.radius
    inner = spec.disk_mask(R)
    ann = (r >= (1 - 1e-12) / R) & spec.disk_mask(spec.support_radius)
    d_dz = pa.solution.dz_f.values - pb.solution.dz_f.values
    d_dzb = pa.solution.dzbar_f.values - pb.solution.dzbar_f.values
    dnorm = np.abs(d_dz) + np.abs(d_dzb)
    l2 = math.sqrt(spec.cell_area * float(np.sum(dnorm[inner] ** 2))) / dab
    nz = inner & (r > 0)
    rr = r[nz]
    q = ratio[nz]
    with np.errstate(divide="ignore"):
        c_up = q / eta_shape(rr, K)
        c_lo = 1.0 / (q * eta_shape(1.0 / rr, K))
    C_pair = float(max(np.max(c_up), np.max(c_lo)))
    C_use = C_pair if C is None else C
    jac = np.abs(d_dz) ** 2 - np.abs(d_dzb) ** 2
    return BiLipReport(
        a=pa.a,
        b=pb.a,
        R=R,
        K=K,
        min_ratio=float(ratio[ann].min()) if ann.any() else math.nan,
        max_ratio=float(ratio[inner].max()),
        l2_ratio=l2,
        envelope_constant=C_pair,
        eta_upper=float(C_use * eta_shape(R, K)),
        eta_lower=float(1.0 / (C_use * eta_shape(1.0 / R, K))),
        difference_min_jacobian=float(jac[spec.disk_mask(spec.support_radius)].min()),
    )


def bilip_report(
    H: StructureFunction,
    a: complex,
    b: complex,
    R: float,
    ops: SpectralOperators,
    C: float | None = None,
    **kw,
) -> BiLipReport:
    """Solve ``phi_a``, ``phi_b`` and measure their bi-Lipschitz quotients."""
    if a == b:
        raise ValueError("a and b must differ")
    pa = solve_for_a(H, a, ops, **kw)
    pb = solve_for_a(H, b, ops, **kw)
    return bilip_from_samples(pa, pb, R, distortion_K(H.k_bound), C)


def calibrate_eta(reports) -> float:
    """Smallest envelope constant valid for every report (used on linear members, then frozen)."""
    return float(max(r.envelope_constant for r in reports))
