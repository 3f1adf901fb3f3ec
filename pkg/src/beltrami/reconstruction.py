"""Recovering the structure function from its field.

For a probe point ``z`` the gradient map ``F_z(a) = d_z phi_a(z)`` is sampled
over a set of parameters (a *chart*), inverted by Newton iteration, and the
reconstructed value is ``H_F(z, w) = d_zbar phi_a(z)`` at ``a = F_z^{-1}(w)``.

Since ``phi_a`` and the principal solution ``f^s`` with ``A(s) = a`` differ
by a constant, ``F_z(a) = d_z f^s(z)``.  The inversion therefore iterates on
the slope ``s`` directly, one field solve per step, and reads ``a`` off the
period map at the end.  The generating ``H`` is touched only by the solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BeltramiError, NewtonStallError, OutsideChartError
from .field import iter_field
from .grid import SpectralOperators
from .solver import PrincipalSolution, solve_nonlinear
from .structure import StructureFunction

__all__ = [
    "GradientChart",
    "Inversion",
    "RoundTripReport",
    "chart_a_set",
    "winding_number",
    "gradient_chart",
    "gradient_charts",
    "invert_gradient",
    "reconstruct_H",
    "round_trip",
    "default_z_probes",
    "default_w_probes",
]


def chart_a_set(radii=(0.5, 1.0, 2.0), n_circle: int = 64, interior: int = 0):
    """Concentric circles of ``n_circle`` samples, the origin, and an optional
    ``interior x interior`` square grid strictly inside the smallest circle."""
    pts = [0j]
    if interior:
        r0 = min(radii) / math.sqrt(2)
        g = np.linspace(-r0, r0, interior + 2)[1:-1]
        pts += [complex(x, y) for y in g for x in g if abs(complex(x, y)) > 0]
    ang = 2 * np.pi * np.arange(n_circle) / n_circle
    for r in sorted(radii):
        pts += list(r * np.exp(1j * ang))
    return pts


def winding_number(curve, point: complex = 0j) -> int:
    """Winding number of the closed polygon ``curve`` around ``point``."""
    c = np.asarray(curve, dtype=np.complex128) - point
    if np.any(c == 0):
        return 0
    turns = np.angle(np.roll(c, -1) / c).sum() / (2 * np.pi)
    return int(round(float(turns)))


def _circles(a):
    """Indices of samples grouped into circles ``|a| = r`` (>= 8 members), sorted by angle."""
    groups = {}
    for i, x in enumerate(a):
        if x != 0:
            groups.setdefault(round(abs(x), 9), []).append(i)
    out = {}
    for r, idx in sorted(groups.items()):
        if len(idx) >= 8:
            out[r] = sorted(idx, key=lambda i: np.angle(a[i]) % (2 * np.pi))
    return out


@dataclass(eq=False)
class GradientChart:
    """Samples ``(a, F_z(a), d_zbar phi_a(z))`` at a fixed probe point."""

    z_probe: complex
    a: np.ndarray
    F: np.ndarray
    D: np.ndarray
    slopes: np.ndarray
    failures: list
    injectivity_tol: float = 1e-6
    H: StructureFunction | None = field(default=None, repr=False)
    ops: SpectralOperators | None = field(default=None, repr=False)
    solver_tol: float = 1e-12

    def __post_init__(self):
        self.circles = _circles(self.a)
        self.windings = {r: winding_number(self.F[idx]) for r, idx in self.circles.items()}
        nz = self.a != 0
        q = np.abs(self.F[nz]) / np.abs(self.a[nz])
        self.ratio_min = float(q.min()) if q.size else math.nan
        self.ratio_max = float(q.max()) if q.size else math.nan
        self.injectivity_violations = self._injectivity()

    def __len__(self):
        return len(self.a)

    @property
    def c(self) -> float:
        """Smallest ``c`` with ``1/c <= |F_z(a)|/|a| <= c`` on the chart."""
        return max(self.ratio_max, 1.0 / self.ratio_min)

    @property
    def outer_radius(self) -> float:
        return max(self.circles) if self.circles else 0.0

    def boundary(self):
        return self.F[self.circles[self.outer_radius]]

    def _injectivity(self):
        tol = self.injectivity_tol
        dF = np.abs(self.F[:, None] - self.F[None, :])
        da = np.abs(self.a[:, None] - self.a[None, :])
        bad = np.argwhere(np.triu((dF < tol) & (da > tol), 1))
        return [(complex(self.a[i]), complex(self.a[j])) for i, j in bad]

    def covers(self, w: complex) -> bool:
        return bool(self.circles) and winding_number(self.boundary(), w) != 0

    def inner_image_radius(self) -> float:
        """Radius of the largest disk about 0 inside the image of the outer circle."""
        return float(np.min(np.abs(self.boundary())))

    def summary(self):
        return {
            "z_probe": [self.z_probe.real, self.z_probe.imag],
            "samples": len(self),
            "windings": {f"{r:g}": k for r, k in self.windings.items()},
            "injectivity_violations": len(self.injectivity_violations),
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "c": self.c,
            "failures": len(self.failures),
        }


def gradient_charts(
    H: StructureFunction,
    z_probes,
    a_set,
    ops: SpectralOperators,
    tol: float = 1e-10,
    injectivity_tol: float = 1e-6,
    solver_tol: float = 1e-12,
):
    """Charts for several probe points from one warm-started field sweep."""
    zs = [complex(z) for z in z_probes]
    rows = {z: ([], [], [], []) for z in zs}
    failures = []
    for a, s in iter_field(H, a_set, ops, tol=tol, solver_tol=solver_tol):
        if isinstance(s, BeltramiError):
            failures.append((a, f"{type(s).__name__}: {s}"))
            continue
        sol = s.solution
        for z in zs:
            r = rows[z]
            r[0].append(a)
            r[1].append(0j if a == 0 else sol.dz(z))
            r[2].append(0j if a == 0 else sol.dzbar(z))
            r[3].append(s.w)
    return [
        GradientChart(z, *(np.array(v, dtype=np.complex128) for v in rows[z]), list(failures), injectivity_tol, H, ops, solver_tol)
        for z in zs
    ]


def gradient_chart(H: StructureFunction, z_probe: complex, a_set, ops: SpectralOperators, **kw) -> GradientChart:
    return gradient_charts(H, [z_probe], a_set, ops, **kw)[0]


@dataclass(eq=False)
class Inversion:
    w: complex
    a: complex
    slope: complex
    dzbar: complex
    residual: float
    newton_steps: int
    solution: PrincipalSolution | None = field(default=None, repr=False)


def _affine_seed(chart: GradientChart, w: complex, k: int = 8):
    """Local least-squares fit ``slope ~ s0 + M (F - w)`` over the ``k`` nearest samples."""
    d = np.abs(chart.F - w)
    idx = np.argsort(d, kind="stable")[: max(3, k)]
    F = chart.F[idx] - w
    X = np.column_stack([np.ones(len(idx)), F.real, F.imag])
    S = np.column_stack([chart.slopes[idx].real, chart.slopes[idx].imag])
    coef, *_ = np.linalg.lstsq(X, S, rcond=None)
    s0 = complex(coef[0, 0], coef[0, 1])
    M = coef[1:].T  # d slope / d F as a real 2x2 matrix
    return s0, M


def invert_gradient(
    chart: GradientChart,
    w: complex,
    tol: float = 1e-8,
    max_newton: int = 30,
    warm: Inversion | None = None,
    use_samples: bool = True,
) -> Inversion:
    """Solve ``F_z(a) = w`` for ``a``; ``|F_z(a) - w| <= tol * max(1, |w|)``.

    A chart sample already within tolerance is returned without any solve.
    Otherwise the slope is seeded from a local affine fit of the chart and
    refined by Broyden-updated Newton steps, each a fresh field solve.

    Raises
    ------
    OutsideChartError
        ``w`` is not enclosed by the image of the outermost chart circle.
    NewtonStallError
        Singular Jacobian or no progress.
    """
    w = complex(w)
    z = chart.z_probe
    target = tol * max(1.0, abs(w))
    if not chart.covers(w):
        raise OutsideChartError(f"w={w:.6g} lies outside the chart image at z={z:.6g}")
    i = int(np.argmin(np.abs(chart.F - w)))
    if use_samples and abs(chart.F[i] - w) <= target:
        return Inversion(w, complex(chart.a[i]), complex(chart.slopes[i]), complex(chart.D[i]), float(abs(chart.F[i] - w)), 0)
    if chart.H is None or chart.ops is None:
        raise BeltramiError("chart carries no solver context for Newton refinement")
    s, M = _affine_seed(chart, w)
    try:
        J = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        J = np.eye(2)

    omega0 = warm.solution.omega if warm is not None and warm.solution is not None else None

    def G(slope, om):
        sol = solve_nonlinear(chart.H, slope, chart.ops, tol=chart.solver_tol, omega0=om)
        return sol, sol.dz(z)

    sol, g = G(s, omega0)
    r = g - w
    steps = 0
    while abs(r) > target:
        if steps >= max_newton:
            raise NewtonStallError(f"gradient inversion did not converge at z={z:.6g}, w={w:.6g}", w=s)
        det = np.linalg.det(J)
        if not np.isfinite(det) or abs(det) < 1e-12 * max(float(np.sum(J * J)), 1e-300):
            raise NewtonStallError(f"singular gradient Jacobian at z={z:.6g}", w=s)
        dx = -np.linalg.solve(J, np.array([r.real, r.imag]))
        lam = 1.0
        while True:
            s_new = s + lam * complex(dx[0], dx[1])
            sol_new, g_new = G(s_new, sol.omega)
            r_new = g_new - w
            if abs(r_new) < abs(r) or lam < 1.0 / 64:
                break
            lam *= 0.5
        if abs(r_new) >= abs(r):
            raise NewtonStallError(f"gradient inversion made no progress at z={z:.6g}, w={w:.6g}", w=s_new)
        step = np.array([(s_new - s).real, (s_new - s).imag])
        y = np.array([(r_new - r).real, (r_new - r).imag])
        J = J + np.outer(y - J @ step, step) / float(step @ step)
        s, sol, r = s_new, sol_new, r_new
        steps += 1
    a = sol.value(1.0 + 0j) - sol.value(0j)
    return Inversion(w, a, s, sol.dzbar(z), float(abs(r)), steps, sol)


def reconstruct_H(
    H_source: StructureFunction,
    z_probe: complex,
    w: complex,
    ops: SpectralOperators,
    chart: GradientChart | None = None,
    a_set=None,
    tol: float = 1e-8,
) -> complex:
    """``H_F(z, w) = d_zbar phi_a(z)`` at ``a = F_z^{-1}(w)``.

    ``H_source`` only generates the field; its values are never read here.
    """
    if chart is None:
        chart = gradient_chart(H_source, z_probe, chart_a_set() if a_set is None else a_set, ops)
    elif complex(chart.z_probe) != complex(z_probe):
        raise ValueError("chart belongs to a different probe point")
    return invert_gradient(chart, w, tol=tol).dzbar


def default_z_probes(count: int = 16, r_max: float = 0.85):
    """Probe points spread over ``|z| <= r_max`` on a sunflower spiral (never grid nodes)."""
    k = np.arange(count) + 0.5
    r = r_max * np.sqrt(k / count)
    th = k * math.pi * (3 - math.sqrt(5)) + 0.1
    return list(r * np.exp(1j * th))


def default_w_probes(radius: float, count: int = 16, include_zero: bool = False):
    """``count`` gradient probes on a sunflower spiral in ``|w| <= radius``."""
    pts = default_z_probes(count - int(include_zero), radius)
    return ([0j] if include_zero else []) + pts


@dataclass
class RoundTripReport:
    rows: list
    failures: list
    sup_error: float
    mean_error: float
    sup_relative: float
    lipschitz_max: float
    zero_value: float
    holder_exponent: float | None
    holder_sup: float
    holder_sup_source: float
    chart_summaries: list
    k_bound: float

    @property
    def count(self) -> int:
        return len(self.rows)

    def as_dict(self):
        return {
            "count": self.count,
            "failures": [[[a.real, a.imag] if isinstance(a, complex) else a, m] for a, m in self.failures],
            "sup_error": self.sup_error,
            "mean_error": self.mean_error,
            "sup_relative": self.sup_relative,
            "lipschitz_max": self.lipschitz_max,
            "k_bound": self.k_bound,
            "zero_value": self.zero_value,
            "holder_exponent": self.holder_exponent,
            "holder_sup": self.holder_sup,
            "holder_sup_source": self.holder_sup_source,
            "charts": self.chart_summaries,
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["re_z", "im_z", "re_w", "im_w", "abs_err", "rel_err"])
            for r in self.rows:
                z, w, err = r["z"], r["w"], r["abs_err"]
                wr.writerow([repr(z.real), repr(z.imag), repr(w.real), repr(w.imag), repr(err), repr(err / abs(w) if w else 0.0)])


def round_trip(
    H: StructureFunction,
    z_probes,
    w_probes,
    ops: SpectralOperators,
    a_set=None,
    tol: float = 1e-8,
    charts=None,
    w_scale: float | None = None,
) -> RoundTripReport:
    """Reconstruct ``H_F`` on every ``(z, w)`` pair and compare with ``H``.

    ``w_probes`` is shared by all probe points.  ``None`` means
    :func:`default_w_probes` (16 points including ``w = 0``) in the disk of
    radius ``w_scale`` times the smallest inner image radius over the charts,
    which keeps every probe inside every chart.  Failures are recorded per
    probe.
    """
    zs = [complex(z) for z in z_probes]
    if charts is None:
        charts = gradient_charts(H, zs, chart_a_set() if a_set is None else a_set, ops)
    if w_probes is None:
        radius = (0.8 if w_scale is None else w_scale) * min(c.inner_image_radius() for c in charts)
        ws = default_w_probes(radius, 16, include_zero=True)
    else:
        ws = [complex(w) for w in w_probes]
    rows, failures = [], []
    for chart in charts:
        z = chart.z_probe
        prev = None
        for w in ws:
            try:
                inv = invert_gradient(chart, w, tol=tol, warm=prev)
            except BeltramiError as exc:
                failures.append(((z, w), f"{type(exc).__name__}: {exc}"))
                continue
            if inv.solution is not None:
                prev = inv
            h = complex(H.evaluate(z, w))
            rows.append({"z": z, "w": w, "a": inv.a, "H_F": inv.dzbar, "H": h, "abs_err": abs(inv.dzbar - h), "newton_steps": inv.newton_steps})
    err = np.array([r["abs_err"] for r in rows]) if rows else np.zeros(0)
    rel = np.array([r["abs_err"] / abs(r["w"]) for r in rows if r["w"] != 0])
    lip, zero = 0.0, 0.0
    by_z = {}
    for r in rows:
        by_z.setdefault(r["z"], []).append(r)
        if r["w"] == 0:
            zero = max(zero, abs(r["H_F"]))
    for rs in by_z.values():
        for i in range(len(rs)):
            for j in range(i + 1, len(rs)):
                dw = abs(rs[i]["w"] - rs[j]["w"])
                if dw > 0:
                    lip = max(lip, abs(rs[i]["H_F"] - rs[j]["H_F"]) / dw)
    s = H.holder_alpha
    hq = hq_src = 0.0
    if s:
        by_w = {}
        for r in rows:
            by_w.setdefault(r["w"], []).append(r)
        for w, rs in by_w.items():
            if w == 0:
                continue
            for i in range(len(rs)):
                for j in range(i + 1, len(rs)):
                    d = abs(rs[i]["z"] - rs[j]["z"]) ** s * abs(w)
                    hq = max(hq, abs(rs[i]["H_F"] - rs[j]["H_F"]) / d)
                    hq_src = max(hq_src, abs(rs[i]["H"] - rs[j]["H"]) / d)
    return RoundTripReport(
        rows,
        failures,
        float(err.max()) if err.size else math.nan,
        float(err.mean()) if err.size else math.nan,
        float(rel.max()) if rel.size else math.nan,
        lip,
        zero,
        s,
        hq,
        hq_src,
        [c.summary() for c in charts],
        H.k_bound,
    )
