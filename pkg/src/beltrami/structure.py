"""Structure functions H(z, w) for nonlinear Beltrami equations.

Every structure function is ``k``-Lipschitz in ``w`` with ``k < 1``, satisfies
``H(z, 0) = 0`` and vanishes for ``|z|`` beyond its support radius.  The
catalog members are:

``zero``     H = 0
``clin``     H = mu(z) w
``rlin``     H = mu(z) w + nu(z) conj(w)
``radial``   H = k0 (z / conj z) |w| on 0 < |z| < r
``smooth``   H = k0 b(z) w^2 / sqrt(eps^2 + |w|^2)

Coefficient profiles for the linear and smooth members are ``disk`` (sharp
indicator), ``taper`` (C^2 radial taper over [0.9 r, r]) and ``bump``
(``exp(1 - 1/(1 - |z/r|^2))``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EllipticityError

__all__ = [
    "StructureFunction",
    "Tags",
    "ZeroH",
    "CLinearH",
    "RLinearH",
    "RadialH",
    "SmoothH",
    "CallableH",
    "EllipticityReport",
    "catalog",
    "parse_structure",
    "verify_H1",
    "w_gradient_fd",
    "UNIQUENESS_THRESHOLD",
]

UNIQUENESS_THRESHOLD = 3.0 - 2.0 * math.sqrt(2.0)

PROFILES = ("disk", "taper", "bump")


def profile_values(kind: str, r: np.ndarray, radius: float) -> np.ndarray:
    """Radial coefficient profile evaluated at distances ``r``."""
    r = np.asarray(r, dtype=float)
    if kind == "disk":
        return (r < radius).astype(float)
    if kind == "taper":
        s = np.clip((r - 0.9 * radius) / (0.1 * radius), 0.0, 1.0)
        return np.clip(1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2), 0.0, 1.0)
    if kind == "bump":
        u = np.clip(r / radius, 0.0, 1.0)
        out = np.zeros_like(u)
        inside = u < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out
    raise ConfigError(f"unknown profile {kind!r}; expected one of {PROFILES}")


@dataclass(frozen=True)
class Tags:
    is_linear_C: bool = False
    is_linear_R: bool = False
    is_homogeneous_1: bool = False
    is_regular: bool = False
    has_uniqueness_property: bool = False
    notes: dict = field(default_factory=dict, compare=False)


class StructureFunction:
    """Base class.

    Subclasses implement :meth:`coefficients` (per-point data depending only
    on ``z``) and the pointwise maps :meth:`_apply` / :meth:`_gradient` acting
    on those coefficients.  Splitting the ``z`` part out lets the solver
    precompute it once per grid via :meth:`bind`.
    """

    name = "custom"
    k_bound: float = 0.0
    holder_alpha: float | None = None
    support_radius: float = 1.0
    tags: Tags = Tags()
    nondifferentiable_at_zero = False
    has_analytic_gradient = True

    def _check_ellipticity(self):
        if not (0.0 <= self.k_bound < 1.0):
            raise EllipticityError(f"{self.ident}: k_bound={self.k_bound} is not in [0, 1)")

    # -- to be provided by subclasses
    def coefficients(self, z):
        raise NotImplementedError

    def _apply(self, coeffs, w):
        raise NotImplementedError

    def _gradient(self, coeffs, w):
        raise NotImplementedError

    def k_profile(self, z):
        raise NotImplementedError

    @property
    def ident(self) -> str:
        return self.name

    # -- public API
    def evaluate(self, z, w):
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        z, w = np.broadcast_arrays(z, w)
        out = self._apply(self.coefficients(z), w)
        return complex(out) if out.ndim == 0 else out

    def w_gradient(self, z, w):
        """Wirtinger derivatives ``(dH/dw, dH/dwbar)`` in the gradient slot."""
        if not self.has_analytic_gradient:
            return w_gradient_fd(self, z, w, strict=False)
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        z, w = np.broadcast_arrays(z, w)
        dw, dwb = self._gradient(self.coefficients(z), w)
        if dw.ndim == 0:
            return complex(dw), complex(dwb)
        return dw, dwb

    def bind(self, z_grid: np.ndarray) -> "BoundStructure":
        return BoundStructure(self, z_grid)

    def __repr__(self):
        return f"<{type(self).__name__} {self.ident} k={self.k_bound:.4g}>"


class BoundStructure:
    """A structure function with its z-dependent data precomputed on a point set.

    Evaluation touches only the points where the coefficients may be nonzero.
    """

    def __init__(self, H: StructureFunction, z_grid: np.ndarray):
        self.H = H
        self.z = np.asarray(z_grid)
        self.active = np.abs(self.z) <= H.support_radius * (1 + 1e-12)
        self.coeffs = H.coefficients(self.z[self.active])

    def __call__(self, w: np.ndarray) -> np.ndarray:
        out = np.zeros(self.z.shape, dtype=np.complex128)
        out[self.active] = self.H._apply(self.coeffs, w[self.active])
        return out

    def gradient(self, w: np.ndarray):
        dw = np.zeros(self.z.shape, dtype=np.complex128)
        dwb = np.zeros(self.z.shape, dtype=np.complex128)
        if self.H.has_analytic_gradient:
            a, b = self.H._gradient(self.coeffs, w[self.active])
        else:
            a, b = w_gradient_fd(self.H, self.z[self.active], w[self.active], strict=False)
        dw[self.active] = a
        dwb[self.active] = b
        return dw, dwb


def _fmt(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    return f"{c.real:g}{c.imag:+g}i"


class ZeroH(StructureFunction):
    name = "zero"
    k_bound = 0.0
    holder_alpha = 1.0
    support_radius = 0.0
    tags = Tags(True, True, True, True, True, {"uniqueness": "linear equation"})

    def coefficients(self, z):
        return ()

    def _apply(self, coeffs, w):
        return np.zeros(np.shape(w), dtype=np.complex128)

    def _gradient(self, coeffs, w):
        z = np.zeros(np.shape(w), dtype=np.complex128)
        return z, z.copy()

    def k_profile(self, z):
        return np.zeros(np.shape(z))


class RLinearH(StructureFunction):
    """``H = mu0 p(z) w + nu0 p(z) conj(w)`` with a radial profile ``p``."""

    name = "rlin"

    def __init__(self, mu: complex = 0.2, nu: complex = 0.1, profile: str = "bump", radius: float = 1.0):
        self.mu0 = complex(mu)
        self.nu0 = complex(nu)
        self.profile = profile
        self.support_radius = float(radius)
        profile_values(profile, np.zeros(1), 1.0)
        self.k_bound = abs(self.mu0) + abs(self.nu0)
        self.holder_alpha = None if profile == "disk" else 1.0
        linear_c = self.nu0 == 0
        self.tags = Tags(
            is_linear_C=linear_c,
            is_linear_R=True,
            is_homogeneous_1=True,
            is_regular=profile != "disk",
            has_uniqueness_property=True,
            notes={"uniqueness": "linear equations have the two-point uniqueness property"},
        )
        self._check_ellipticity()

    @property
    def ident(self):
        if self.nu0 == 0 and type(self) is CLinearH:
            return f"clin:mu={_fmt(self.mu0)},profile={self.profile},r={self.support_radius:g}"
        return f"rlin:mu={_fmt(self.mu0)},nu={_fmt(self.nu0)},profile={self.profile},r={self.support_radius:g}"

    def coefficients(self, z):
        p = profile_values(self.profile, np.abs(z), self.support_radius)
        return (self.mu0 * p, self.nu0 * p)

    def mu(self, z):
        return self.coefficients(np.asarray(z, dtype=np.complex128))[0]

    def nu(self, z):
        return self.coefficients(np.asarray(z, dtype=np.complex128))[1]

    def _apply(self, coeffs, w):
        mu, nu = coeffs
        return mu * w + nu * np.conj(w)

    def _gradient(self, coeffs, w):
        mu, nu = coeffs
        return (np.broadcast_to(mu, np.shape(w)).astype(np.complex128),
                np.broadcast_to(nu, np.shape(w)).astype(np.complex128))

    def k_profile(self, z):
        p = profile_values(self.profile, np.abs(np.asarray(z)), self.support_radius)
        return (abs(self.mu0) + abs(self.nu0)) * p


class CLinearH(RLinearH):
    """``H = mu0 p(z) w``; the classical complex-linear Beltrami equation."""

    name = "clin"

    def __init__(self, mu: complex = 0.3, profile: str = "disk", radius: float = 1.0):
        super().__init__(mu=mu, nu=0.0, profile=profile, radius=radius)


class RadialH(StructureFunction):
    """``H = k0 (z / conj z) |w|`` on ``0 < |z| < r``.

    The radial stretch ``z |z|^(K-1)``, ``K = (1 + k0) / (1 - k0)``, solves the
    equation inside the unit disk.  ``H`` is not differentiable at ``w = 0``.
    """

    name = "radial"
    nondifferentiable_at_zero = True

    def __init__(self, k: float = 1.0 / 3.0, radius: float = 1.0):
        self.k0 = float(k)
        self.support_radius = float(radius)
        self.k_bound = abs(self.k0)
        self.holder_alpha = None
        self.tags = Tags(
            is_linear_C=False,
            is_linear_R=False,
            is_homogeneous_1=True,
            is_regular=False,
            has_uniqueness_property=True,
            notes={
                "uniqueness": "1-homogeneous in w",
                "regular": "phase z/conj(z) is discontinuous at the origin",
            },
        )
        self._check_ellipticity()

    @property
    def ident(self):
        return f"radial:k={self.k0:.10g},r={self.support_radius:g}"

    @property
    def K(self):
        return (1 + self.k0) / (1 - self.k0)

    def coefficients(self, z):
        r = np.abs(z)
        inside = (r > 0) & (r < self.support_radius)
        phase = np.zeros(np.shape(z), dtype=np.complex128)
        phase[inside] = np.exp(2j * np.angle(z[inside]))
        return (self.k0 * phase,)

    def _apply(self, coeffs, w):
        return coeffs[0] * np.abs(w)

    def _gradient(self, coeffs, w):
        c = coeffs[0]
        aw = np.abs(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            dw = np.where(aw > 0, c * np.conj(w) / (2 * aw), np.nan)
            dwb = np.where(aw > 0, c * w / (2 * aw), np.nan)
        return dw.astype(np.complex128), dwb.astype(np.complex128)

    def k_profile(self, z):
        r = np.abs(np.asarray(z))
        return np.where((r > 0) & (r < self.support_radius), abs(self.k0), 0.0)

    def stretch(self, z, w: float = 1.0):
        """Closed-form principal solution for real ``w > 0``."""
        z = np.asarray(z, dtype=np.complex128)
        r = np.abs(z)
        inside = r < self.support_radius
        out = np.array(z, dtype=np.complex128)
        out[inside] = z[inside] * (r[inside] / self.support_radius) ** (self.K - 1)
        return w * out


class SmoothH(StructureFunction):
    """``H = k0 b(z) w^2 / sqrt(eps^2 + |w|^2)``.

    The w-Lipschitz constant of ``w^2 / sqrt(eps^2 + |w|^2)`` is
    ``sup 2|w| / sqrt(eps^2 + |w|^2) = 2``, so ``k_bound = 2 k0 max b``.
    """

    name = "smooth"

    def __init__(self, k: float = 0.3, eps: float = 0.5, profile: str = "bump", radius: float = 1.0):
        self.k0 = float(k)
        self.eps = float(eps)
        if self.eps <= 0:
            raise ConfigError("smooth: eps must be positive")
        self.profile = profile
        self.support_radius = float(radius)
        pmax = float(profile_values(profile, np.zeros(1), radius).max())
        self.k_bound = 2.0 * abs(self.k0) * pmax
        self.holder_alpha = None if profile == "disk" else 1.0
        self.tags = Tags(
            is_linear_C=False,
            is_linear_R=False,
            is_homogeneous_1=False,
            is_regular=profile != "disk",
            has_uniqueness_property=True,
            notes={"uniqueness": "compact support: limsup k(z) = 0 < 3 - 2 sqrt 2"},
        )
        self._check_ellipticity()

    @property
    def ident(self):
        return f"smooth:k={self.k0:g},eps={self.eps:g},profile={self.profile},r={self.support_radius:g}"

    def coefficients(self, z):
        return (self.k0 * profile_values(self.profile, np.abs(z), self.support_radius),)

    def _apply(self, coeffs, w):
        return coeffs[0] * w * w / np.sqrt(self.eps**2 + np.abs(w) ** 2)

    def _gradient(self, coeffs, w):
        c = coeffs[0]
        s2 = self.eps**2 + np.abs(w) ** 2
        s = np.sqrt(s2)
        s3 = s2 * s
        dw = c * (2 * w / s - w * np.abs(w) ** 2 / (2 * s3))
        dwb = c * (-(w**3) / (2 * s3))
        return dw.astype(np.complex128), dwb.astype(np.complex128)

    def k_profile(self, z):
        return 2.0 * abs(self.k0) * profile_values(self.profile, np.abs(np.asarray(z)), self.support_radius)


class CallableH(StructureFunction):
    """Wrap a user function ``fn(z, w)`` (vectorized) with a declared k bound.

    Gradients are central finite differences.  Nothing here certifies (H1);
    run :func:`verify_H1` on it.
    """

    name = "callable"
    has_analytic_gradient = False

    def __init__(self, fn, k_bound: float, support_radius: float = 1.0, holder_alpha=None, tags: Tags | None = None):
        self.fn = fn
        self.k_bound = float(k_bound)
        self.support_radius = float(support_radius)
        self.holder_alpha = holder_alpha
        self.tags = tags or Tags()
        self._check_ellipticity()

    def coefficients(self, z):
        return (np.asarray(z),)

    def _apply(self, coeffs, w):
        z = coeffs[0]
        out = np.asarray(self.fn(z, w), dtype=np.complex128)
        return np.where(np.abs(z) <= self.support_radius, out, 0.0)

    def k_profile(self, z):
        return np.where(np.abs(np.asarray(z)) <= self.support_radius, self.k_bound, 0.0)


def catalog() -> dict[str, StructureFunction]:
    """The built-in structure functions with their default parameters."""
    return {
        "zero": ZeroH(),
        "clin": CLinearH(0.3, profile="disk"),
        "rlin": RLinearH(0.2, 0.1, profile="bump"),
        "radial": RadialH(1.0 / 3.0),
        "smooth": SmoothH(0.3, 0.5, profile="bump"),
    }


_COMPLEX_RE = re.compile(r"^[\s+\-0-9.eEij]+$")


def parse_complex(text: str) -> complex:
    s = text.strip().replace(" ", "").replace("i", "j")
    if not s or not _COMPLEX_RE.match(s):
        raise ConfigError(f"cannot parse complex number {text!r}")
    try:
        return complex(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def split_params(text: str) -> dict[str, str]:
    """Split ``a=1,b=[2,3],c=x`` into a dict, respecting brackets."""
    out, depth, buf = {}, 0, ""
    parts = []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(buf)
            buf = ""
        else:
            buf += ch
    if buf:
        parts.append(buf)
    for part in parts:
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


def parse_structure(ident: str) -> StructureFunction:
    """Build a catalog member from an id such as ``"rlin:mu=0.2+0.1i,nu=0.1"``."""
    kind, _, rest = ident.strip().partition(":")
    kind = kind.lower()
    params = split_params(rest) if rest else {}

    def take(key, conv, default):
        if key in params:
            try:
                return conv(params.pop(key))
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"{ident}: bad value for {key!r}") from exc
        return default

    if kind == "zero":
        H = ZeroH()
    elif kind == "clin":
        H = CLinearH(take("mu", parse_complex, 0.3), take("profile", str, "disk"), take("r", float, 1.0))
    elif kind == "rlin":
        H = RLinearH(
            take("mu", parse_complex, 0.2),
            take("nu", parse_complex, 0.1),
            take("profile", str, "bump"),
            take("r", float, 1.0),
        )
    elif kind == "radial":
        H = RadialH(take("k", float, 1.0 / 3.0), take("r", float, 1.0))
    elif kind == "smooth":
        H = SmoothH(take("k", float, 0.3), take("eps", float, 0.5), take("profile", str, "bump"), take("r", float, 1.0))
    else:
        raise ConfigError(f"unknown structure function {kind!r}")
    if params:
        raise ConfigError(f"{ident}: unknown parameters {sorted(params)}")
    return H


def w_gradient_fd(H: StructureFunction, z, w, h_w: float | None = None, strict: bool = True):
    """Central-difference Wirtinger derivatives of ``w -> H(z, w)``.

    The step defaults to ``1e-4 * max(1, |w|)``.  Points where ``H`` is known
    not to be differentiable (``w = 0`` for 1-homogeneous non-linear members)
    raise ``ValueError`` when ``strict``; otherwise they come back as NaN.
    """
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    z, w = np.broadcast_arrays(z, w)
    if h_w is None:
        h = 1e-4 * np.maximum(1.0, np.abs(w))
    else:
        if h_w <= 0:
            raise ValueError("h_w must be positive")
        h = np.full(w.shape, float(h_w))
    bad = np.zeros(w.shape, dtype=bool)
    if H.nondifferentiable_at_zero:
        bad = np.abs(w) <= 2 * h
        if strict and bad.any():
            raise ValueError("H is not differentiable at w = 0; gradient unsupported there")
    ev = lambda ww: np.asarray(H._apply(H.coefficients(z), ww), dtype=np.complex128)  # noqa: E731
    dx = (ev(w + h) - ev(w - h)) / (2 * h)
    dy = (ev(w + 1j * h) - ev(w - 1j * h)) / (2 * h)
    dw = 0.5 * (dx - 1j * dy)
    dwb = 0.5 * (dx + 1j * dy)
    dw = np.where(bad, np.nan, dw)
    dwb = np.where(bad, np.nan, dwb)
    if dw.ndim == 0:
        return complex(dw), complex(dwb)
    return dw, dwb


@dataclass
class EllipticityReport:
    measured_k: float
    measured_alpha_constant: float | None
    tail_k: float
    uniqueness_threshold_ok: bool
    k_bound: float
    trials: int
    violation: bool = False
    witness: tuple | None = None

    def as_dict(self):
        d = dict(self.__dict__)
        if self.witness is not None:
            d["witness"] = [[c.real, c.imag] for c in self.witness]
        return d


def verify_H1(
    H: StructureFunction,
    trials: int = 10_000,
    seed: int = 0,
    sampler=None,
    tol: float = 1e-9,
    probe_radius: float | None = None,
) -> EllipticityReport:
    """Sample Lipschitz quotients of ``H`` in ``w`` and Hölder quotients in ``z``.

    ``sampler(rng, m)`` may supply ``(z, w1, w2)`` arrays of length ``m``;
    the default mixes far-apart and nearby gradient pairs over a disk a bit
    larger than the support.  Violations are reported, never raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    R = max(H.support_radius, 1e-3) * 1.25
    if sampler is None:
        z = R * np.sqrt(rng.random(trials)) * np.exp(2j * np.pi * rng.random(trials))
        mag = 10.0 ** rng.uniform(-3, 3, trials)
        w1 = mag * np.exp(2j * np.pi * rng.random(trials))
        # steps relative to |w1| keep the quotient clear of cancellation
        step = mag * np.where(
            rng.random(trials) < 0.5,
            10.0 ** rng.uniform(-1, 2, trials),
            10.0 ** rng.uniform(-3, -1, trials),
        )
        w2 = w1 + step * np.exp(2j * np.pi * rng.random(trials))
    else:
        z, w1, w2 = (np.asarray(a, dtype=np.complex128) for a in sampler(rng, trials))
    num = np.abs(np.asarray(H.evaluate(z, w1)) - np.asarray(H.evaluate(z, w2)))
    den = np.abs(w1 - w2)
    q = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    i = int(np.argmax(q))
    measured_k = float(q[i])
    violation = measured_k > H.k_bound * (1 + tol) + 1e-15

    alpha_c = None
    if H.holder_alpha is not None:
        za = H.support_radius * 1.1 * np.sqrt(rng.random(trials)) * np.exp(2j * np.pi * rng.random(trials))
        dz = 10.0 ** rng.uniform(-3, 0, trials) * np.exp(2j * np.pi * rng.random(trials))
        wa = 10.0 ** rng.uniform(-2, 2, trials) * np.exp(2j * np.pi * rng.random(trials))
        dh = np.abs(np.asarray(H.evaluate(za, wa)) - np.asarray(H.evaluate(za + dz, wa)))
        alpha_c = float(np.max(dh / (np.abs(dz) ** H.holder_alpha * np.abs(wa))))

    pr = H.support_radius * (1 + 1e-9) if probe_radius is None else probe_radius
    pr = max(pr, 1e-6)
    zt = pr * (1 + 9 * rng.random(trials)) * np.exp(2j * np.pi * rng.random(trials))
    tail_k = float(np.max(H.k_profile(zt)))
    return EllipticityReport(
        measured_k=measured_k,
        measured_alpha_constant=alpha_c,
        tail_k=tail_k,
        uniqueness_threshold_ok=tail_k < UNIQUENESS_THRESHOLD,
        k_bound=H.k_bound,
        trials=trials,
        violation=bool(violation),
        witness=(complex(z[i]), complex(w1[i]), complex(w2[i])) if violation else None,
    )
