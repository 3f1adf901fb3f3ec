"""Executable property checks shared by ``beltrami verify`` and the test suite.

Each check returns a :class:`CheckResult` carrying the measured quantities
that decided it.  Nothing here reads wall-clock time, so reports are
reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BeltramiError
from .field import bilip_from_samples, distortion_K, field_sweep, solve_for_a
from .grid import SpectralOperators
from .reconstruction import chart_a_set, default_z_probes, gradient_charts, round_trip
from .solver import min_jacobian, solve_nonlinear
from .structure import StructureFunction
from .tangent import nondegeneracy_report, tangent_data, verify_linearization

__all__ = [
    "CheckResult",
    "VerifyReport",
    "check_contraction",
    "check_normalization",
    "check_bilipschitz",
    "check_linearization",
    "check_jacobian",
    "check_nondegeneracy",
    "check_homeomorphism",
    "check_round_trip",
    "spread",
    "run_suite",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "measured": self.measured, "detail": self.detail}


@dataclass
class VerifyReport:
    structure: str
    spec: dict
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"structure": self.structure, "spec": self.spec, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'check'.ljust(width)}  result"]
        for c in self.checks:
            lines.append(f"{c.name.ljust(width)}  {'PASS' if c.passed else 'FAIL'}  {c.detail}")
        return "\n".join(lines)


def spread(values) -> float:
    """``max / min`` of positive values (``inf`` if any is nonpositive)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan
    lo = float(v.min())
    return float(v.max()) / lo if lo > 0 else math.inf


def _failure(name, exc):
    return CheckResult(name, False, {"error": f"{type(exc).__name__}: {exc}"}, f"error: {exc}")


def check_contraction(H: StructureFunction, ops: SpectralOperators, ws=(1.0, 1 + 1j, 2 - 0.5j), slack: float = 0.02, tol: float = 1e-12):
    """Observed iterate-distance ratio stays within ``k_bound + slack``."""
    ratios = []
    try:
        for w in ws:
            ratios.append(solve_nonlinear(H, w, ops, tol=tol).contraction_ratio)
    except BeltramiError as exc:
        return _failure("contraction", exc)
    worst = max(ratios)
    ok = worst <= H.k_bound + slack
    return CheckResult("contraction", ok, {"ratios": ratios, "k_bound": H.k_bound}, f"max ratio {worst:.4f} vs k {H.k_bound:.4f}")


def check_normalization(samples, tol: float = 1e-8):
    worst = 0.0
    for s in samples:
        scale = max(1.0, abs(s.a))
        worst = max(worst, abs(s.value(0j)) / scale, abs(s.value(1.0 + 0j) - s.a) / scale)
    return CheckResult("normalization", worst <= tol, {"max_error": worst, "samples": len(samples)}, f"max |phi(0)|, |phi(1)-a| = {worst:.2e}")


def check_bilipschitz(
    H: StructureFunction,
    ops: SpectralOperators,
    pairs: int = 50,
    R: float = 2.0,
    a_radius: float = 2.0,
    seed: int = 0,
    factor: float = 2.0,
    samples=None,
):
    """Pair-independence of the ratio spreads of ``|phi_a - phi_b| / |a - b|``.

    For every pair the maximum over ``|z| <= R``, the minimum over
    ``|z| >= 1/R`` and the ``L2(D(0,R))`` derivative quotient are recorded;
    each of the three must vary across pairs by at most ``factor``.  The
    difference ``phi_a - phi_b`` must also have positive Jacobian.
    """
    rng = np.random.default_rng(seed)
    n_pts = 2 * pairs
    r = a_radius * np.sqrt(rng.random(n_pts))
    th = 2 * np.pi * rng.random(n_pts)
    pts = r * np.exp(1j * th)
    try:
        if samples is None:
            samples = field_sweep(H, pts, ops).samples
        by_a = {complex(s.a): s for s in samples}
        K = distortion_K(H.k_bound)
        reps = [bilip_from_samples(by_a[complex(pts[2 * i])], by_a[complex(pts[2 * i + 1])], R, K) for i in range(pairs)]
    except (BeltramiError, KeyError) as exc:
        return _failure("bi-lipschitz", exc)
    M = [x.max_ratio for x in reps]
    m = [x.min_ratio for x in reps]
    D = [x.l2_ratio for x in reps]
    J = min(x.difference_min_jacobian for x in reps)
    s = {"max_ratio": spread(M), "min_ratio": spread(m), "l2_ratio": spread(D)}
    ok = all(v <= factor for v in s.values()) and J > 0
    meas = {
        "pairs": pairs,
        "spreads": s,
        "max_ratio_range": [min(M), max(M)],
        "min_ratio_range": [min(m), max(m)],
        "l2_ratio_range": [min(D), max(D)],
        "difference_min_jacobian": J,
        "envelope_constant": max(x.envelope_constant for x in reps),
        "K": K,
    }
    return CheckResult("bi-lipschitz", ok, meas, "spreads " + ", ".join(f"{k} {v:.3f}" for k, v in s.items()) + f"; min J(phi_a-phi_b) {J:.3e}")


def check_linearization(
    H: StructureFunction,
    ops: SpectralOperators,
    bases=(1.0,),
    directions=(1.0, 1j),
    t: float | None = None,
    max_ratio: float = 0.75,
    solver_tol: float = 1e-13,
):
    """Residual ladder of the linearized equation and the cross-route gap.

    A rung counts as converged when its residual is below the difference
    quotient noise floor ``100 * solver_tol / t``.
    """
    reports = []
    ok = True
    try:
        for a in bases:
            base = solve_for_a(H, a, ops, tol=1e-12, solver_tol=solver_tol)
            for e in directions:
                r = verify_linearization(H, a, e, ops, t=t, base=base, solver_tol=solver_tol)
                floors = [100 * solver_tol / s for s in r.t_ladder]
                for (r1, r2), q, fl in zip(zip(r.residuals, r.residuals[1:]), r.ratios, floors[1:]):
                    if not (r2 <= fl or q <= max_ratio):
                        ok = False
                if r.cross_route_gap > r.gap_bound:
                    ok = False
                reports.append(r.as_dict())
    except BeltramiError as exc:
        return _failure("linearization", exc)
    worst_ratio = max((q for d in reports for q in d["ratios"]), default=0.0)
    worst_gap = max(d["cross_route_gap"] / d["gap_bound"] for d in reports)
    return CheckResult("linearization", ok, {"reports": reports}, f"worst ladder ratio {worst_ratio:.3f}; worst gap/bound {worst_gap:.2e}")


def check_jacobian(samples, R: float | None = None):
    vals = [min_jacobian(s.solution, R) for s in samples if s.a != 0]
    worst = min(vals) if vals else math.inf
    return CheckResult("jacobian-positivity", worst > 0, {"min_jacobian": worst, "samples": len(vals)}, f"min J(z, phi_a) {worst:.3e}")


def check_nondegeneracy(H: StructureFunction, ops: SpectralOperators, a_sweep=None, t: float | None = None):
    """Constant sign of ``Im(d eta_1 conj(d eta_i))`` over z and over the a-sweep,
    Wronskian and gradient routes to ``(mu_a, nu_a)`` in agreement, and
    ``|mu_a| + |nu_a| <= k_bound``."""
    if a_sweep is None:
        a_sweep = list(1.5 * np.exp(2j * np.pi * np.arange(8) / 8))
    reps = []
    try:
        for a in a_sweep:
            data = tangent_data(H, a, ops, t)
            reps.append(nondegeneracy_report(H, a, ops, data=data))
    except BeltramiError as exc:
        return _failure("non-degeneracy", exc)
    signs = {r.det_sign for r in reps}
    min_abs = min(r.det_min_abs for r in reps)
    gap_ok = all(r.coeff_gap_sup <= max(2 * r.t, 1e-4) for r in reps)
    excess = max(r.coeff_bound_excess for r in reps)
    ok = len(signs) == 1 and 0 not in signs and min_abs > 0 and gap_ok and excess <= 1e-9
    meas = {
        "signs": sorted(signs),
        "det_min_abs": min_abs,
        "coeff_gap_sup": max(r.coeff_gap_sup for r in reps),
        "coeff_bound_excess": excess,
        "slope_ratio_minmax": [min(r.slope_ratio_min for r in reps), max(r.slope_ratio_max for r in reps)],
        "reports": [r.as_dict() for r in reps],
    }
    return CheckResult("non-degeneracy", ok, meas, f"det sign {sorted(signs)}, min |det| {min_abs:.3e}, coeff gap {meas['coeff_gap_sup']:.2e}")


def check_homeomorphism(
    H: StructureFunction,
    ops: SpectralOperators,
    z_probes=(0.2 + 0.1j, -0.5 + 0.3j, 0.1 - 0.7j, 1.3 + 0.4j),
    radii=(0.5, 1.0, 2.0),
    n_circle: int = 64,
    c_max: float = 10.0,
    charts=None,
):
    """Winding ``+-1`` of ``a -> d_z phi_a(z)`` on every circle, discrete injectivity,
    and ``1/c <= |d_z phi_a(z)|/|a| <= c`` with ``c <= c_max``."""
    try:
        if charts is None:
            charts = gradient_charts(H, z_probes, chart_a_set(radii, n_circle), ops)
    except BeltramiError as exc:
        return _failure("gradient-homeomorphism", exc)
    windings = sorted({k for c in charts for k in c.windings.values()})
    viol = sum(len(c.injectivity_violations) for c in charts)
    fails = sum(len(c.failures) for c in charts)
    c = max(ch.c for ch in charts)
    ok = set(windings) <= {1, -1} and len(windings) == 1 and viol == 0 and fails == 0 and c <= c_max
    meas = {"windings": windings, "injectivity_violations": viol, "failures": fails, "c": c, "charts": [ch.summary() for ch in charts]}
    return CheckResult("gradient-homeomorphism", ok, meas, f"windings {windings}, violations {viol}, c {c:.3f}")


def check_round_trip(
    H: StructureFunction,
    ops: SpectralOperators,
    z_probes=None,
    w_probes=None,
    n_circle: int = 32,
    rel_tol: float = 0.05,
    lip_slack: float = 1e-6,
):
    """Reconstruction ``H_F`` against ``H``: relative error, Lipschitz bound in w, ``H_F(z,0) = 0``."""
    zs = default_z_probes(4) if z_probes is None else z_probes
    try:
        rep = round_trip(H, zs, w_probes, ops, a_set=chart_a_set((0.5, 1.0, 2.0), n_circle))
    except BeltramiError as exc:
        return _failure("round-trip", exc)
    ok = (
        not rep.failures
        and rep.sup_relative <= rel_tol
        and rep.lipschitz_max <= H.k_bound + lip_slack
        and rep.zero_value == 0.0
    )
    return CheckResult(
        "round-trip",
        ok,
        rep.as_dict(),
        f"sup rel err {rep.sup_relative:.2e} over {rep.count} probes, Lipschitz {rep.lipschitz_max:.3f}",
    )


def run_suite(H: StructureFunction, ops: SpectralOperators, seed: int = 0, quick: bool = True) -> VerifyReport:
    """The property suite behind ``beltrami verify``.

    ``quick`` trims sample counts (10 bi-Lipschitz pairs, 2 chart probes with
    32-sample circles, 4 x 16 round-trip probes) for interactive use.
    """
    checks = [check_contraction(H, ops)]
    rng = np.random.default_rng(seed)
    n_a = 8 if quick else 50
    pts = list(2.0 * np.sqrt(rng.random(n_a)) * np.exp(2j * np.pi * rng.random(n_a)))
    sweep = field_sweep(H, pts, ops)
    checks.append(check_normalization(sweep.samples))
    if sweep.failures:
        checks[-1].passed = False
        checks[-1].measured["failures"] = sweep.failures
    checks.append(check_bilipschitz(H, ops, pairs=10 if quick else 50, seed=seed))
    checks.append(check_linearization(H, ops, bases=(1.0,) if quick else (1.0, 1.5 + 1j, -1 + 0.5j, 0.5 - 1.5j)))
    checks.append(check_jacobian(sweep.samples))
    checks.append(check_nondegeneracy(H, ops, a_sweep=None))
    probes = (0.2 + 0.1j, -0.5 + 0.3j) if quick else (0.2 + 0.1j, -0.5 + 0.3j, 0.1 - 0.7j, 1.3 + 0.4j)
    checks.append(check_homeomorphism(H, ops, z_probes=probes, n_circle=32 if quick else 64))
    checks.append(check_round_trip(H, ops, z_probes=default_z_probes(4 if quick else 16)))
    return VerifyReport(H.ident, ops.spec.as_dict(), checks)
