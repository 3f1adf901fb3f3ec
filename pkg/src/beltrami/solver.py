"""Principal solutions of nonlinear and R-linear Beltrami equations.

The unknown is ``omega = d_zbar f``.  With ``f = w z + C(omega)`` one has
``d_z f = w + S omega``, so the equation ``d_zbar f = H(z, d_z f)`` becomes
the fixed-point problem

    omega = H(z, w + S omega),

a contraction with constant ``k_bound`` because the discrete Beurling
transform is an L2 isometry (it also drops the zero mode, which only helps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityError, NonConvergenceError
from .grid import ComplexGrid, GridSpec, SpectralOperators, bilinear, make_operators
from .structure import StructureFunction

__all__ = [
    "PrincipalSolution",
    "LinearSolveProblem",
    "solve_nonlinear",
    "solve_rlinear",
    "residual",
    "rlinear_residual",
    "distortion_check",
    "distortion_flags",
    "jacobian",
    "min_jacobian",
    "contraction_ratio",
    "holder_quotient",
    "zero_solution",
]


@dataclass(frozen=True, eq=False)
class PrincipalSolution:
    """A solved ``f^w(z) = w z + correction(z)``.

    ``f_values`` holds the correction ``C_per(omega) + mean(omega) * conj(z)``;
    the second term restores ``d_zbar f = omega`` exactly, since the periodic
    Cauchy transform only inverts ``d_zbar`` on mean-zero data.  The additive
    constant of ``f`` is not determined by the periodic model; field members
    are normalized by subtracting ``f(0)``.
    """

    w_infinity: complex
    omega: ComplexGrid
    f_values: ComplexGrid
    dz_f: ComplexGrid
    dzbar_f: ComplexGrid
    residual: float
    iterations: int
    k_bound: float
    omega_mean: complex = 0j
    distances: tuple = ()
    periodic_correction: np.ndarray = field(default=None, repr=False)

    @property
    def spec(self) -> GridSpec:
        return self.omega.spec

    @property
    def contraction_ratio(self) -> float:
        return contraction_ratio(self.distances, floor=1e-11 * max(1.0, abs(self.w_infinity)))

    def correction(self, z):
        """Interpolated ``f(z) - w z``; the non-periodic part is evaluated exactly."""
        z = np.asarray(z, dtype=np.complex128)
        per = self.periodic_correction
        if per is None:
            per = self.f_values.values - self.omega_mean * np.conj(self.spec.z)
        out = bilinear(self.spec, per, z) + self.omega_mean * np.conj(z)
        return complex(out) if out.ndim == 0 else out

    def value(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = self.w_infinity * z + self.correction(z)
        return complex(out) if np.ndim(out) == 0 else out

    def dz(self, z):
        return bilinear(self.spec, self.dz_f.values, z)

    def dzbar(self, z):
        return bilinear(self.spec, self.dzbar_f.values, z)


@dataclass(frozen=True, eq=False)
class LinearSolveProblem:
    """Data for ``d_zbar g = mu d_z g + nu conj(d_z g) [+ source]``, slope ``e`` at infinity."""

    mu: ComplexGrid
    nu: ComplexGrid
    slope: complex = 1.0
    source: ComplexGrid | None = None
    k_max: float = 1.0 - 1e-9

    def __post_init__(self):
        if self.mu.spec != self.nu.spec:
            raise ValueError("mu and nu live on different grids")
        if self.source is not None and self.source.spec != self.mu.spec:
            raise ValueError("source lives on a different grid")
        k = self.k_bound
        if not k < 1.0 or k > self.k_max:
            raise EllipticityError(f"|mu| + |nu| reaches {k:.6g}; need < 1")

    @property
    def k_bound(self) -> float:
        return float(np.max(np.abs(self.mu.values) + np.abs(self.nu.values)))


def contraction_ratio(distances, floor: float = 1e-11) -> float:
    """Largest ratio of successive iterate distances above a round-off floor."""
    d = np.asarray(distances, dtype=float)
    if d.size < 2:
        return 0.0
    ok = (d[1:] > floor) & (d[:-1] > 0)
    if not ok.any():
        return 0.0
    return float(np.max(d[1:][ok] / d[:-1][ok]))


def _l2(spec, a):
    return math.sqrt(spec.cell_area * float(np.vdot(a, a).real))


def support_block(mask: np.ndarray):
    """Smallest ``(rows, cols)`` slice pair covering ``mask``; ``None`` if it is empty."""
    r = np.flatnonzero(mask.any(axis=1))
    c = np.flatnonzero(mask.any(axis=0))
    if r.size == 0:
        return None
    return slice(int(r[0]), int(r[-1]) + 1), slice(int(c[0]), int(c[-1]) + 1)


def _iterate(apply_map, w, ops: SpectralOperators, tol, max_iter, omega0, k_bound, block, source=None):
    """Fixed-point loop on the support block; returns the full ``omega`` grid.

    ``apply_map`` and ``source`` act on block-shaped arrays.
    """
    spec = ops.spec
    n = spec.n
    full = np.zeros((n, n), dtype=np.complex128)
    if block is None:
        return full, 1, (0.0,)
    rows, cols = block
    if omega0 is None:
        omega = np.zeros((rows.stop - rows.start, cols.stop - cols.start), dtype=np.complex128)
    else:
        omega = np.array((omega0.values if isinstance(omega0, ComplexGrid) else omega0)[rows, cols], dtype=np.complex128)
    scale = max(1.0, abs(w))
    distances = []
    mult = ops.beurling_mult
    for m in range(1, max_iter + 1):
        grad = w + ops.apply_block(mult, omega, rows, cols)
        new = apply_map(grad)
        bound_vals = new if source is None else new - source
        excess = np.abs(bound_vals) - k_bound * np.abs(grad) * (1 + 1e-9)
        if np.max(excess) > 1e-12 * scale:
            j, k = np.unravel_index(int(np.argmax(excess)), excess.shape)
            raise EllipticityError(
                f"|H(z, w)| exceeds k_bound * |w| at z={spec.z[rows, cols][j, k]:.4g} (iteration {m})"
            )
        diff = new - omega
        d = _l2(spec, diff)
        distances.append(d)
        omega = new
        if d <= tol * scale:
            full[rows, cols] = omega
            return full, m, tuple(distances)
    ratio = distances[-1] / distances[-2] if len(distances) > 1 and distances[-2] > 0 else float("nan")
    raise NonConvergenceError(
        f"no convergence after {max_iter} iterations (last distance {distances[-1]:.3e}, ratio {ratio:.4f})",
        iterations=max_iter,
        last_ratio=ratio,
        last_distance=distances[-1],
    )


def _assemble(w, omega, ops: SpectralOperators, apply_map, iterations, k_bound, distances, support_radius):
    spec = ops.spec
    F = ops.fft(omega)
    dz = w + ops.ifft(ops.beurling_mult * F)
    periodic = ops.ifft(ops.cauchy_mult * F)
    m = complex(omega.mean())
    corr = periodic + m * np.conj(spec.z)
    res_grid = np.abs(omega - apply_map(dz))
    mask = spec.disk_mask(max(support_radius, spec.support_radius))
    res = float(res_grid[mask].max()) if mask.any() else 0.0
    return PrincipalSolution(
        w_infinity=complex(w),
        omega=ComplexGrid(spec, omega),
        f_values=ComplexGrid(spec, corr),
        dz_f=ComplexGrid(spec, dz),
        dzbar_f=ComplexGrid(spec, omega),
        residual=res,
        iterations=iterations,
        k_bound=float(k_bound),
        omega_mean=m,
        distances=distances,
        periodic_correction=periodic,
    )


def _bound(H: StructureFunction, spec: GridSpec):
    cache = H.__dict__.setdefault("_bound_cache", {})
    b = cache.get(spec)
    if b is None:
        b = cache[spec] = H.bind(spec.z)
    return b


def _bound_block(H: StructureFunction, spec: GridSpec):
    """``(block, bound structure on the block)`` for the support of ``H``."""
    cache = H.__dict__.setdefault("_bound_cache", {})
    key = (spec, "block")
    if key not in cache:
        block = support_block(_bound(H, spec).active)
        cache[key] = (block, None if block is None else H.bind(spec.z[block]))
    return cache[key]


def solve_nonlinear(
    H: StructureFunction,
    w: complex,
    ops: SpectralOperators,
    tol: float = 1e-12,
    max_iter: int = 1000,
    omega0=None,
) -> PrincipalSolution:
    """Principal solution of ``d_zbar f = H(z, d_z f)`` with ``d_z f -> w`` at infinity.

    Iterates ``omega <- H(z, w + S omega)`` from ``omega0`` (default 0) until
    the L2 distance of successive iterates drops below ``tol * max(1, |w|)``.

    Raises
    ------
    NonConvergenceError
        ``max_iter`` reached.
    EllipticityError
        ``|H(z, v)| > k_bound |v|`` observed on an iterate.
    """
    if not H.k_bound < 1:
        raise EllipticityError(f"k_bound={H.k_bound} >= 1")
    w = complex(w)
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        raise ValueError("slope w must be finite")
    spec = ops.spec
    if H.support_radius > spec.support_radius * (1 + 1e-12):
        raise ValueError(
            f"structure function support {H.support_radius} exceeds grid support radius {spec.support_radius}"
        )
    block, bound_b = _bound_block(H, spec)
    omega, its, dist = _iterate(bound_b, w, ops, tol, max_iter, omega0, H.k_bound, block)
    return _assemble(w, omega, ops, _bound(H, spec), its, H.k_bound, dist, H.support_radius)


def solve_rlinear(
    p: LinearSolveProblem,
    ops: SpectralOperators,
    tol: float = 1e-12,
    max_iter: int = 1000,
    omega0=None,
) -> PrincipalSolution:
    """Principal solution of the R-linear equation in ``p`` with slope ``p.slope``."""
    if p.mu.spec != ops.spec:
        raise ValueError("problem grid does not match operators")
    mu, nu = p.mu.values, p.nu.values
    src = None if p.source is None else p.source.values

    if src is None:
        def apply_map(g):
            return mu * g + nu * np.conj(g)
    else:
        def apply_map(g):
            return mu * g + nu * np.conj(g) + src

    k = p.k_bound
    active = (mu != 0) | (nu != 0)
    if src is not None:
        active |= src != 0
    block = support_block(active)
    if block is None:
        apply_b, src_b = None, None
    else:
        mu_b, nu_b = mu[block], nu[block]
        src_b = None if src is None else src[block]
        if src_b is None:
            def apply_b(g):
                return mu_b * g + nu_b * np.conj(g)
        else:
            def apply_b(g):
                return mu_b * g + nu_b * np.conj(g) + src_b
    omega, its, dist = _iterate(apply_b, complex(p.slope), ops, tol, max_iter, omega0, k, block, source=src_b)
    return _assemble(complex(p.slope), omega, ops, apply_map, its, k, dist, ops.spec.support_radius)


def zero_solution(spec: GridSpec) -> PrincipalSolution:
    """The trivial solution ``f = 0`` (slope 0)."""
    z = np.zeros((spec.n, spec.n), dtype=np.complex128)
    g = ComplexGrid(spec, z)
    return PrincipalSolution(0j, g, g, g, g, 0.0, 0, 0.0, 0j, (), z)


def residual(H: StructureFunction, sol: PrincipalSolution, ops: SpectralOperators | None = None) -> float:
    """Sup over ``|z| <= rho`` of ``|omega - H(z, w + S omega)|``, recomputed from ``omega``."""
    spec = sol.spec
    ops = ops or make_operators(spec)
    grad = sol.w_infinity + ops.apply(ops.beurling_mult, sol.omega.values)
    r = np.abs(sol.omega.values - _bound(H, spec)(grad))
    return float(r[spec.disk_mask(spec.support_radius)].max())


def rlinear_residual(p: LinearSolveProblem, sol: PrincipalSolution, ops: SpectralOperators | None = None) -> float:
    spec = sol.spec
    ops = ops or make_operators(spec)
    grad = sol.w_infinity + ops.apply(ops.beurling_mult, sol.omega.values)
    rhs = p.mu.values * grad + p.nu.values * np.conj(grad)
    if p.source is not None:
        rhs = rhs + p.source.values
    r = np.abs(sol.omega.values - rhs)
    return float(r[spec.disk_mask(spec.support_radius)].max())


def _floor(sol):
    return 1e-8 * float(np.max(np.abs(sol.dz_f.values)))


def distortion_check(sol: PrincipalSolution) -> float:
    """Max of ``|d_zbar f| / |d_z f|`` over samples with ``|d_z f|`` above the floor."""
    a = np.abs(sol.dz_f.values)
    b = np.abs(sol.dzbar_f.values)
    ok = a >= _floor(sol)
    if not ok.any():
        return 0.0
    return float(np.max(b[ok] / a[ok]))


def distortion_flags(sol: PrincipalSolution) -> np.ndarray:
    """Grid points where ``d_z f`` vanishes (below the floor) but ``d_zbar f`` does not."""
    a = np.abs(sol.dz_f.values)
    b = np.abs(sol.dzbar_f.values)
    fl = _floor(sol)
    bad = (a < fl) & (b >= fl)
    return sol.spec.z[bad]


def jacobian(sol: PrincipalSolution) -> np.ndarray:
    """``J = |d_z f|^2 - |d_zbar f|^2`` on the grid."""
    return np.abs(sol.dz_f.values) ** 2 - np.abs(sol.dzbar_f.values) ** 2


def min_jacobian(sol: PrincipalSolution, R: float | None = None) -> float:
    spec = sol.spec
    R = spec.support_radius if R is None else R
    return float(jacobian(sol)[spec.disk_mask(R)].min())


def holder_quotient(values: np.ndarray, spec: GridSpec, R: float, gamma: float, offsets=None) -> float:
    """Sup of ``|g(z1) - g(z2)| / |z1 - z2|^gamma`` over sample pairs in ``D(0, R)``.

    ``offsets`` are physical displacement vectors (complex); they are rounded
    to whole grid steps.  The default uses every lattice offset of length up
    to ``R / 2`` on a coarse 1/16 lattice plus the nearest-neighbour offsets
    of this grid, so the same physical pairs are probed at every resolution.
    """
    if offsets is None:
        base = np.arange(-8, 9) / 16.0
        offs = (base[None, :] + 1j * base[:, None]).ravel()
        offs = offs[(np.abs(offs) > 0) & (np.abs(offs) <= R / 2)]
        offs = np.concatenate([offs, spec.h * np.array([1, 1j, 1 + 1j, 1 - 1j])])
    else:
        offs = np.asarray(offsets, dtype=np.complex128)
    mask = spec.disk_mask(R)
    best = 0.0
    for d in offs:
        dk = int(round(d.real / spec.h))
        dj = int(round(d.imag / spec.h))
        if dk == 0 and dj == 0:
            continue
        shifted = np.roll(values, (-dj, -dk), axis=(0, 1))
        mshift = np.roll(mask, (-dj, -dk), axis=(0, 1))
        both = mask & mshift
        if not both.any():
            continue
        dist = spec.h * math.hypot(dk, dj)
        q = float(np.max(np.abs(shifted[both] - values[both]))) / dist**gamma
        best = max(best, q)
    return best
