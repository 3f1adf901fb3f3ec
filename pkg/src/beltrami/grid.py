"""Periodic planar grids and Fourier-space Wirtinger/Cauchy/Beurling operators.

A :class:`GridSpec` describes the square ``[-L, L)^2`` sampled at ``n x n``
points ``z[j, k] = -L + h * (k + 1j * j)`` with ``h = 2L / n``; axis 0 is the
imaginary direction, axis 1 the real one.  Every planar function used by the
solver lives on such a grid as a :class:`ComplexGrid`.

FFT conventions are fixed: forward transform unnormalized, inverse divided by
``n**2`` (numpy/scipy default), frequencies laid out by ``fftfreq`` so the
Nyquist mode sits on the negative side.  All transforms discard the zero
frequency.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridSpecError, SpecMismatchError

__all__ = [
    "GridSpec",
    "ComplexGrid",
    "SpectralOperators",
    "Samples",
    "DiscardedMeanWarning",
    "make_operators",
    "d_z",
    "d_zbar",
    "cauchy",
    "beurling",
    "restrict",
    "l2_norm",
]


class DiscardedMeanWarning(UserWarning):
    """A transform dropped a zero-frequency component that was not small."""


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a periodic square grid.

    Parameters
    ----------
    n : int
        Samples per side; a power of two, at least 16.
    half_width : float
        The grid covers ``[-half_width, half_width)^2``.
    support_radius : float
        Radius of the disk outside which every coefficient vanishes.  Must not
        exceed ``half_width / 2`` so that a coefficient-free collar absorbs the
        periodic wrap-around.
    """

    n: int
    half_width: float = 4.0
    support_radius: float = 2.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 16:
            raise GridSpecError(f"n must be a power of two >= 16, got {self.n!r}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise GridSpecError(f"half_width must be positive, got {self.half_width!r}")
        if not (0 < self.support_radius <= self.half_width / 2):
            raise GridSpecError(
                f"support_radius must satisfy 0 < rho <= L/2 = {self.half_width / 2}, got {self.support_radius!r}"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "support_radius", float(self.support_radius))

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @functools.cached_property
    def z(self) -> np.ndarray:
        """Complex sample coordinates, shape ``(n, n)`` (read-only)."""
        x = -self.half_width + self.h * np.arange(self.n)
        zz = x[None, :] + 1j * x[:, None]
        zz.flags.writeable = False
        return zz

    @functools.cached_property
    def radius(self) -> np.ndarray:
        r = np.abs(self.z)
        r.flags.writeable = False
        return r

    def disk_mask(self, R: float) -> np.ndarray:
        """Boolean mask of samples with ``|z| <= R`` (small slack for round-off)."""
        return self.radius <= R * (1 + 1e-12) + 1e-12

    def index_of(self, z: complex):
        """Row/column index of the sample nearest to ``z``."""
        k = int(round((z.real + self.half_width) / self.h)) % self.n
        j = int(round((z.imag + self.half_width) / self.h)) % self.n
        return j, k

    def is_node(self, z: complex, tol: float = 1e-9) -> bool:
        j, k = self.index_of(z)
        return abs(self.z[j, k] - z) <= tol * self.h

    def as_dict(self):
        return {"n": self.n, "L": self.half_width, "rho": self.support_radius}


class ComplexGrid:
    """An ``n x n`` raster of complex samples tied to a :class:`GridSpec`."""

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values, check_finite: bool = True):
        arr = np.asarray(values, dtype=np.complex128)
        if arr.ndim == 0:
            arr = np.full((spec.n, spec.n), arr, dtype=np.complex128)
        if arr.shape != (spec.n, spec.n):
            raise SpecMismatchError(f"values shape {arr.shape} does not match n={spec.n}")
        if check_finite and not np.all(np.isfinite(arr)):
            raise ValueError("grid samples must be finite")
        self.spec = spec
        self.values = arr

    @classmethod
    def from_function(cls, spec: GridSpec, fn):
        return cls(spec, fn(spec.z))

    @classmethod
    def zeros(cls, spec: GridSpec):
        return cls(spec, np.zeros((spec.n, spec.n), dtype=np.complex128))

    def _other(self, other):
        if isinstance(other, ComplexGrid):
            if other.spec != self.spec:
                raise SpecMismatchError("grids have different GridSpecs")
            return other.values
        return other

    def __add__(self, other):
        return ComplexGrid(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexGrid(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return ComplexGrid(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return ComplexGrid(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ComplexGrid(self.spec, self.values / self._other(other))

    def __neg__(self):
        return ComplexGrid(self.spec, -self.values)

    def conj(self):
        return ComplexGrid(self.spec, np.conj(self.values))

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def mean(self) -> complex:
        return complex(self.values.mean())

    def copy(self):
        return ComplexGrid(self.spec, self.values.copy())

    def __repr__(self):
        return f"ComplexGrid(n={self.spec.n}, L={self.spec.half_width}, max|g|={np.abs(self.values).max():.3g})"

    def interp(self, z):
        """Bilinear interpolation at arbitrary points (periodic wrap)."""
        return bilinear(self.spec, self.values, z)


def bilinear(spec: GridSpec, values: np.ndarray, z):
    """Periodic bilinear interpolation of a sampled array at points ``z``."""
    zz = np.asarray(z, dtype=np.complex128)
    x = (zz.real + spec.half_width) / spec.h
    y = (zz.imag + spec.half_width) / spec.h
    # snap near-integers so node evaluations are exact
    xr, yr = np.round(x), np.round(y)
    x = np.where(np.abs(x - xr) < 1e-9, xr, x)
    y = np.where(np.abs(y - yr) < 1e-9, yr, y)
    k0 = np.floor(x).astype(np.int64)
    j0 = np.floor(y).astype(np.int64)
    tx = x - k0
    ty = y - j0
    n = spec.n
    k0m, k1m = k0 % n, (k0 + 1) % n
    j0m, j1m = j0 % n, (j0 + 1) % n
    out = (
        values[j0m, k0m] * (1 - tx) * (1 - ty)
        + values[j0m, k1m] * tx * (1 - ty)
        + values[j1m, k0m] * (1 - tx) * ty
        + values[j1m, k1m] * tx * ty
    )
    if np.ndim(z) == 0:
        return complex(out)
    return out


def _readonly(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralOperators:
    """Fourier multiplier tables for one grid geometry.

    Instances are immutable and may be shared between threads.  ``workers``
    is forwarded to :mod:`scipy.fft`; pocketfft splits work over independent
    1-D transforms, so results do not depend on the thread count.
    """

    spec: GridSpec
    dz_mult: np.ndarray = field(repr=False)
    dzbar_mult: np.ndarray = field(repr=False)
    cauchy_mult: np.ndarray = field(repr=False)
    beurling_mult: np.ndarray = field(repr=False)
    workers: int = 1

    def _check(self, g: ComplexGrid):
        if g.spec != self.spec:
            raise SpecMismatchError("grid spec does not match operator spec")

    def fft(self, a):
        return sfft.fft2(a, workers=self.workers)

    def ifft(self, a):
        return sfft.ifft2(a, workers=self.workers)

    def apply(self, mult: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.ifft(mult * self.fft(a))

    def apply_block(self, mult: np.ndarray, block: np.ndarray, rows: slice, cols: slice) -> np.ndarray:
        """``apply(mult, a)[rows, cols]`` for an ``a`` that vanishes outside ``[rows, cols]``.

        Row transforms of identically zero rows are skipped on the way in,
        and only the requested rows are transformed on the way out.
        """
        n = self.spec.n
        wk = self.workers
        t = np.zeros((block.shape[0], n), dtype=np.complex128)
        t[:, cols] = block
        t = sfft.fft(t, axis=1, overwrite_x=True, workers=wk)
        full = np.zeros((n, n), dtype=np.complex128)
        full[rows] = t
        full = sfft.fft(full, axis=0, overwrite_x=True, workers=wk)
        full *= mult
        full = sfft.ifft(full, axis=0, overwrite_x=True, workers=wk)
        return sfft.ifft(full[rows], axis=1, overwrite_x=True, workers=wk)[:, cols]

    def d_z(self, g: ComplexGrid) -> ComplexGrid:
        self._check(g)
        return ComplexGrid(self.spec, self.apply(self.dz_mult, g.values))

    def d_zbar(self, g: ComplexGrid) -> ComplexGrid:
        self._check(g)
        return ComplexGrid(self.spec, self.apply(self.dzbar_mult, g.values))

    def cauchy(self, g: ComplexGrid, mean_tol: float = 1e-8) -> ComplexGrid:
        self._check(g)
        _warn_mean(g.values, mean_tol, "cauchy")
        return ComplexGrid(self.spec, self.apply(self.cauchy_mult, g.values))

    def beurling(self, g: ComplexGrid) -> ComplexGrid:
        self._check(g)
        return ComplexGrid(self.spec, self.apply(self.beurling_mult, g.values))


def _warn_mean(values, mean_tol, name):
    m = abs(values.mean())
    scale = max(1.0, float(np.abs(values).max()))
    if m > mean_tol * scale:
        warnings.warn(
            f"{name}: discarded zero-frequency component of modulus {m:.3e}",
            DiscardedMeanWarning,
            stacklevel=3,
        )


@functools.lru_cache(maxsize=16)
def _operators(spec: GridSpec, workers: int) -> SpectralOperators:
    n, h = spec.n, spec.h
    xi = 2 * np.pi * np.fft.fftfreq(n, d=h)
    xi_x = xi[None, :]
    xi_y = xi[:, None]
    dz = 0.5 * (1j * xi_x + xi_y)
    dzbar = 0.5 * (1j * xi_x - xi_y)
    zeta = xi_x + 1j * xi_y
    nonzero = zeta != 0
    safe = np.where(nonzero, zeta, 1.0)
    cauchy_m = np.where(nonzero, -2j / safe, 0.0)
    beurling_m = np.where(nonzero, np.conj(safe) / safe, 0.0)
    return SpectralOperators(
        spec=spec,
        dz_mult=_readonly(np.broadcast_to(dz, (n, n)).astype(np.complex128)),
        dzbar_mult=_readonly(np.broadcast_to(dzbar, (n, n)).astype(np.complex128)),
        cauchy_mult=_readonly(cauchy_m.astype(np.complex128)),
        beurling_mult=_readonly(beurling_m.astype(np.complex128)),
        workers=workers,
    )


def make_operators(spec: GridSpec, workers: int = 1) -> SpectralOperators:
    """Build (or fetch cached) multiplier tables for ``spec``.

    Equal specs return the same object.
    """
    if not isinstance(spec, GridSpec):
        raise GridSpecError("make_operators expects a GridSpec")
    return _operators(spec, int(workers))


def d_z(g: ComplexGrid, ops: SpectralOperators) -> ComplexGrid:
    return ops.d_z(g)


def d_zbar(g: ComplexGrid, ops: SpectralOperators) -> ComplexGrid:
    return ops.d_zbar(g)


def cauchy(g: ComplexGrid, ops: SpectralOperators, mean_tol: float = 1e-8) -> ComplexGrid:
    """Periodic Cauchy transform: inverse of d_zbar on mean-zero grids.

    The mean of ``g`` is discarded; if it is larger than ``mean_tol`` (relative
    to ``max(1, max|g|)``) a :class:`DiscardedMeanWarning` is emitted.
    """
    return ops.cauchy(g, mean_tol=mean_tol)


def beurling(g: ComplexGrid, ops: SpectralOperators) -> ComplexGrid:
    """Periodic Beurling transform ``S g = d_z(cauchy(g))`` (multiplier conj(xi)/xi)."""
    return ops.beurling(g)


@dataclass(frozen=True)
class Samples:
    """Grid samples selected by :func:`restrict`."""

    z: np.ndarray
    values: np.ndarray
    rows: np.ndarray
    cols: np.ndarray

    def __len__(self):
        return len(self.z)


def restrict(g: ComplexGrid, R: float) -> Samples:
    """Samples of ``g`` inside the closed disk ``|z| <= R``.

    ``R`` may not exceed the support radius: the collar is excluded from all
    measurements.  ``R = 0`` returns the single sample nearest the origin.
    """
    spec = g.spec
    if R < 0 or R > spec.support_radius * (1 + 1e-12):
        raise GridSpecError(f"R={R} outside [0, rho={spec.support_radius}]")
    mask = spec.disk_mask(R)
    if not mask.any():
        j, k = spec.index_of(0j)
        mask = np.zeros_like(mask)
        mask[j, k] = True
    rows, cols = np.nonzero(mask)
    return Samples(spec.z[rows, cols], g.values[rows, cols], rows, cols)


def l2_norm(g, spec: GridSpec | None = None, radius: float | None = None) -> float:
    """Discrete L2 norm ``sqrt(h^2 * sum |g|^2)``, optionally over ``|z| <= radius``."""
    if isinstance(g, ComplexGrid):
        spec, vals = g.spec, g.values
    else:
        vals = np.asarray(g)
    if radius is not None:
        vals = vals[spec.disk_mask(radius)]
    return float(math.sqrt(spec.cell_area * float(np.sum(np.abs(vals) ** 2))))
