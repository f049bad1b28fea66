"""Convolution kernels for anisotropic threshold dynamics.

Fourier convention: ``K^(xi) = int K(x) exp(-2 pi i x.xi) dx``.  A kernel is
stored at unit time scale; ``K_dt(x) = dt^{-1} K(x / sqrt(dt))`` in 2D, i.e.
``K_dt^(xi) = K^(sqrt(dt) xi)``.

Every kernel induces a surface tension and a mobility,

    gamma_K(n) = 1/2 int |n.y| K(y) dy,
    mu_K(n)    = 1 / int_{n-perp} K,

and one thresholding step moves a smooth interface with normal speed
``V = 1/2 mu_K (gamma_K + gamma_K'') kappa``.  The Gaussian has
``gamma_K = 1/sqrt(pi)`` and ``mu_K = 2 sqrt(pi)``, i.e. unit tension and
unit mobility.

Design targets for the EE/EJZ families can be given in two normalisations:

``"raw"``
    the kernel reproduces ``gamma_K = gamma`` and ``mu_K = mu`` literally.
``"gaussian"``
    tension and mobility are measured in the units of the Gaussian:
    ``gamma_K = gamma / sqrt(pi)`` and ``mu_K = 2 sqrt(pi) mu``.  BBC kernels
    are of this kind by construction, interfaces move with
    ``V = mu (gamma + gamma'') kappa`` and substrate terms built from the
    Gaussian carry consistent units.  Evolution code uses this one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy import integrate, ndimage

from .anisotropy import AnisotropyFn, Constant, anisotropy_from_dict, normal_angle, require_weak
from .errors import NegativeWeight, NonpositiveSigma, ZeroLineMass
from .grid import Grid, half_spectrum, symmetrize_even

SQRT_PI = math.sqrt(math.pi)
FAMILIES = ("gaussian", "bbc", "ee", "ejz_physical", "ejz_fourier")
NORMALIZATIONS = ("raw", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    family: str
    anisotropy: AnisotropyFn = field(default_factory=Constant)
    mobility: AnisotropyFn | None = None
    eps: float = 0.1
    n_dirs: int = 256
    normalization: str = "gaussian"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.family == "ee" and not 0 < self.eps < 1:
            raise ValueError("EE kernels need 0 < eps < 1")

    def to_dict(self) -> dict:
        d = {"family": self.family, "anisotropy": self.anisotropy.to_dict(), "normalization": self.normalization}
        if self.mobility is not None:
            d["mobility"] = self.mobility.to_dict()
        if self.family == "ee":
            d["eps"] = self.eps
            d["n_dirs"] = self.n_dirs
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        d = dict(d)
        d["anisotropy"] = anisotropy_from_dict(d.get("anisotropy", {"type": "constant", "c": 1.0}))
        if d.get("mobility") is not None:
            d["mobility"] = anisotropy_from_dict(d["mobility"])
        return cls(**d)


class SampledKernel:
    """A kernel realised on the frequency lattice of a grid.

    Either ``fourier`` (closed-form K^ at unit scale) or ``density`` (K in
    physical space at unit scale) must be given; multipliers for any time
    step are derived from it and cached.
    """

    def __init__(
        self,
        spec: KernelSpec,
        grid: Grid,
        *,
        fourier: Callable | None = None,
        density: Callable | None = None,
        tension: Callable | None = None,
        mobility: Callable | None = None,
        validation_scale: float = 0.25,
        parts: list | None = None,
        info: dict | None = None,
    ):
        if fourier is None and density is None:
            raise ValueError("need a Fourier or a physical description")
        self.spec = spec
        self.grid = grid
        self._fourier = fourier
        self._density = density
        self.physical_origin = "analytic-Fourier" if fourier is not None else "sampled-physical"
        # designed (target) tension and mobility as functions of the normal angle
        self.target_tension = tension
        self.target_mobility = mobility
        self.validation_scale = validation_scale
        # (weight, unit-scale Fourier callable, validation scale) for kernels
        # that are sums of components of very different widths
        self.parts = list(parts or [])
        self._part_samples = None
        self.info = dict(info or {})
        self._mult: dict[float, np.ndarray] = {}
        self._phys: dict[float, np.ndarray] = {}
        self.spectral = self.full_multiplier(1.0)
        self.mass = float(self.spectral[0, 0])
        if not np.all(np.isfinite(self.spectral)) or self.mass <= 0:
            raise ValueError(f"{spec.family} kernel has invalid spectrum (mass {self.mass})")

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def has_physical(self) -> bool:
        return self._density is not None

    def full_multiplier(self, dt: float) -> np.ndarray:
        """K_dt^ on the full FFT lattice (real, even)."""
        if self._fourier is not None:
            kx, ky = self.grid.frequencies
            s = math.sqrt(dt)
            m = self._fourier(s * kx, s * ky)
        else:
            m = sfft.fft2(self.physical(dt)).real * self.grid.cell_area
        return symmetrize_even(np.asarray(m, dtype=float))

    def multiplier(self, dt: float) -> np.ndarray:
        """Half-plane multiplier for ``rfft2`` convolution at time step dt."""
        key = float(dt)
        if key not in self._mult:
            if key == 1.0 and hasattr(self, "spectral"):
                self._mult[key] = half_spectrum(self.spectral)
            else:
                self._mult[key] = half_spectrum(self.full_multiplier(key))
        return self._mult[key]

    def physical(self, dt: float = 1.0) -> np.ndarray:
        """Samples of K_dt at grid offsets in FFT order (origin at [0, 0])."""
        key = float(dt)
        if key not in self._phys:
            if self._density is not None:
                X, Y = self.grid.centered
                s = math.sqrt(key)
                self._phys[key] = self._density(X / s, Y / s) / key
            else:
                self._phys[key] = sfft.irfft2(self.multiplier(key), s=self.grid.shape) / self.grid.cell_area
        return self._phys[key]

    def clear_cache(self):
        self._mult.clear()
        self._phys.clear()
        self._part_samples = None

    def __repr__(self):
        return f"SampledKernel({self.family}, n={self.grid.n}, mass={self.mass:.6g})"


# ---------------------------------------------------------------------------
# helpers


def _targets(gamma: AnisotropyFn, mobility: AnisotropyFn | None, normalization: str):
    """Target tension/mobility/stiffness callables for the design equations."""
    mob = mobility if mobility is not None else gamma
    if normalization == "raw":
        ts, ms = 1.0, 1.0
    else:
        ts, ms = 1.0 / SQRT_PI, 2.0 * SQRT_PI

    def even(f):
        return lambda th: 0.5 * (f(th) + f(th + math.pi))

    def tension(th):
        return ts * 0.5 * (gamma(th) + gamma(th + math.pi))

    def stiffness(th):
        return ts * 0.5 * (gamma.stiffness(th) + gamma.stiffness(th + math.pi))

    def mobility_fn(th):
        return ms * even(mob)(th)

    return tension, mobility_fn, stiffness


# ---------------------------------------------------------------------------
# Gaussian and BBC


def build_gaussian(grid: Grid) -> SampledKernel:
    """Unit-time heat kernel ``(4 pi)^{-1} exp(-|x|^2 / 4)``."""
    spec = KernelSpec("gaussian")

    def fourier(kx, ky):
        return np.exp(-4.0 * math.pi**2 * (kx * kx + ky * ky))

    def density(x, y):
        return np.exp(-(x * x + y * y) / 4.0) / (4.0 * math.pi)

    return SampledKernel(
        spec,
        grid,
        fourier=fourier,
        density=density,
        tension=lambda th: np.full_like(np.asarray(th, dtype=float), 1.0 / SQRT_PI),
        mobility=lambda th: np.full_like(np.asarray(th, dtype=float), 2.0 * SQRT_PI),
    )


def build_bbc(gamma: AnisotropyFn, grid: Grid) -> SampledKernel:
    """Bonnetier-Bretin-Chambolle kernel ``K^ = exp(-4 pi^2 gamma(xi)^2)``.

    Its mobility is tied to the tension (natural mobility mu = gamma).
    """
    require_weak(gamma)
    spec = KernelSpec("bbc", gamma, gamma, normalization="gaussian")

    def fourier(kx, ky):
        g = gamma.homogeneous(kx, ky)
        return np.exp(-4.0 * math.pi**2 * g * g)

    return SampledKernel(
        spec,
        grid,
        fourier=fourier,
        tension=lambda th: gamma(th) / SQRT_PI,
        mobility=lambda th: 2.0 * SQRT_PI * gamma(th),
    )


# ---------------------------------------------------------------------------
# Elsey-Esedoglu


def ee_weights(gamma: AnisotropyFn, n_dirs: int):
    """Direction angles, quadrature weights and inverse cosine transform.

    For the direction ``nu = (cos phi, sin phi)`` the inverse cosine transform
    of gamma is ``(gamma + gamma'')/4`` taken at the normal perpendicular to
    nu, which in the normal-angle convention is the angle ``phi`` itself.
    """
    if n_dirs < 64:
        raise ValueError("EE kernels need at least 64 directions")
    phi = 2.0 * math.pi * np.arange(n_dirs) / n_dirs
    w = 0.25 * gamma.stiffness(phi)
    if np.min(w) < 0:
        raise NegativeWeight(
            f"inverse cosine transform negative (min {np.min(w):.3g}): the Wulff shape is not a zonoid"
        )
    return phi, w, 2.0 * math.pi / n_dirs


def build_ee(
    gamma: AnisotropyFn,
    eps: float,
    grid: Grid,
    n_dirs: int = 256,
    normalization: str = "raw",
) -> SampledKernel:
    """Elsey-Esedoglu kernel: a weighted superposition of smoothed 1D Gaussians.

    ``K(x) = sqrt(pi) sum_nu w(nu) g_{nu,eps}(x) dphi`` with
    ``g_{nu,eps}(x) = (4 pi eps)^{-1} exp(-(x.nu)^2/4 - (x.nu_perp)^2/(4 eps^2))``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    phi, w, dphi = ee_weights(gamma, n_dirs)
    amp = 1.0 if normalization == "raw" else 1.0 / SQRT_PI
    coef = amp * SQRT_PI * w * dphi / (4.0 * math.pi * eps)
    cos_p, sin_p = np.cos(phi), np.sin(phi)

    def density(x, y):
        out = np.zeros(np.shape(x))
        for c, s, k in zip(cos_p, sin_p, coef):
            along = x * c + y * s
            across = -x * s + y * c
            out += k * np.exp(-0.25 * along * along - across * across / (4.0 * eps * eps))
        return out

    spec = KernelSpec("ee", gamma, None, eps=eps, n_dirs=n_dirs, normalization=normalization)
    return SampledKernel(
        spec,
        grid,
        density=density,
        tension=lambda th: amp * gamma(th),
        mobility=lambda th: ee_mobility(gamma, eps, th, n_dirs) / amp,
        validation_scale=0.25,
        info={"eps": eps, "n_dirs": n_dirs},
    )


def ee_mobility(gamma: AnisotropyFn, eps: float, n, n_dirs: int = 256):
    """Mobility realised by the (raw) EE kernel in the normal direction ``n``.

    ``mu(n) = 2 / int w(nu) ((1 - eps^2)(nu.n)^2 + eps^2)^{-1/2} dnu``,
    evaluated with the periodic trapezoid rule.  ``n`` is a normal angle or
    an array of them.
    """
    phi, w, dphi = ee_weights(gamma, n_dirs)
    th = np.atleast_1d(np.asarray(n, dtype=float))
    nx, ny = -np.sin(th), np.cos(th)
    dot = nx[:, None] * np.cos(phi)[None, :] + ny[:, None] * np.sin(phi)[None, :]
    integrand = w[None, :] / np.sqrt((1.0 - eps * eps) * dot * dot + eps * eps)
    mu = 2.0 / (integrand.sum(axis=1) * dphi)
    return float(mu[0]) if np.ndim(n) == 0 else mu


# ---------------------------------------------------------------------------
# Esedoglu-Jacobs-Zhang, positive in physical space


def bump(x):
    """eta(x) = exp(-1 / (x^2 (x - 2)^2)) on (0, 2), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 2)
    xm = x[m]
    out[m] = np.exp(-1.0 / (xm * xm * (xm - 2.0) ** 2))
    return out


@lru_cache(maxsize=None)
def bump_moment(j: int) -> float:
    """m_j = int_0^2 x^j eta(x) dx."""
    val, _ = integrate.quad(lambda x: x**j * float(bump(x)), 0.0, 2.0, epsabs=1e-10, epsrel=1e-12, limit=200)
    return val


def ejz_physical_profile(gamma, mobility, normalization="raw"):
    """alpha(phi), beta(phi) of the polar ansatz K(r, phi) = alpha eta(r beta).

    With sigma = mu (gamma + gamma'') for the target pair, the design
    equations give ``beta^2 = m2 / (m0 sigma)`` and ``alpha = beta / (2 m0 mu)``,
    both evaluated at the normal perpendicular to the ray direction phi.
    """
    tension, mob, stiff = _targets(gamma, mobility, normalization)
    m0, m2 = bump_moment(0), bump_moment(2)

    def profile(phi):
        sigma = mob(phi) * stiff(phi)
        if np.min(sigma) <= 0:
            raise NonpositiveSigma(f"mu (gamma + gamma'') has minimum {np.min(sigma):.3g}")
        beta = np.sqrt(m2 / (m0 * sigma))
        alpha = beta / (2.0 * m0 * mob(phi))
        return alpha, beta

    return profile, tension, mob


def build_ejz_physical(
    gamma: AnisotropyFn,
    mobility: AnisotropyFn | None,
    grid: Grid,
    normalization: str = "raw",
) -> SampledKernel:
    """Compactly supported kernel that is positive in physical space."""
    require_weak(gamma)
    profile, tension, mob = ejz_physical_profile(gamma, mobility, normalization)
    phi = np.linspace(0, 2 * math.pi, 2048, endpoint=False)
    _, beta = profile(phi)  # raises early on nonpositive sigma
    radius = 2.0 / float(beta.min())

    def density(x, y):
        r = np.hypot(x, y)
        a, b = profile(np.arctan2(y, x))
        return a * bump(r * b)

    spec = KernelSpec("ejz_physical", gamma, mobility, normalization=normalization)
    half = 0.5 * grid.length
    return SampledKernel(
        spec,
        grid,
        density=density,
        tension=tension,
        mobility=mob,
        validation_scale=min(1.0, (0.8 * half / radius) ** 2),
        info={"m0": bump_moment(0), "m2": bump_moment(2), "support_radius": radius},
    )


# ---------------------------------------------------------------------------
# Esedoglu-Jacobs-Zhang, positive in Fourier space


def _smooth_step(t):
    # C-infinity step: 0 for t <= 0, 1 for t >= 1
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        f1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return f0 / (f0 + f1)


def zeta(x):
    """Even, smooth, zero on |x| <= 1 and equal to x^2 on |x| >= 2."""
    x = np.asarray(x, dtype=float)
    return x * x * _smooth_step(np.abs(x) - 1.0)


@lru_cache(maxsize=None)
def zeta_moments() -> tuple[float, float]:
    """s0 = (4 pi)^{-1} int exp(-zeta), s2 = (4 pi)^{-1} int (1 - exp(-zeta)) / x^2."""

    def f0(x):
        return float(np.exp(-zeta(x)))

    def f2(x):
        return float(-np.expm1(-zeta(x))) / (x * x)

    kw = dict(epsabs=1e-10, epsrel=1e-12, limit=400)
    i0 = 2.0 * (1.0 + integrate.quad(f0, 1.0, 2.0, **kw)[0] + integrate.quad(f0, 2.0, np.inf, **kw)[0])
    i2 = 2.0 * (integrate.quad(f2, 1.0, 2.0, **kw)[0] + integrate.quad(f2, 2.0, np.inf, **kw)[0])
    return i0 / (4.0 * math.pi), i2 / (4.0 * math.pi)


def ejz_fourier_profile(gamma, mobility, normalization="raw", n_check: int = 4096):
    """Directional scales a(n) >= b(n) and the solvability constant c.

    ``a, b = pi / (s2 c) (q +- sqrt(q^2 - r))`` with ``q = c gamma`` and
    ``r = 4 s0 s2 mu gamma`` for the target pair.  The smallest ``c >= 1``
    with ``q^2 >= r`` in every direction is used; the realised mobility is
    then ``mu / c^2``.
    """
    tension, mob, _ = _targets(gamma, mobility, normalization)
    s0, s2 = zeta_moments()
    th = np.linspace(-math.pi, math.pi, n_check, endpoint=False)
    need = 4.0 * s0 * s2 * mob(th) / tension(th)
    c = max(1.0, math.sqrt(float(need.max())) * (1.0 + 1e-12))

    def profile(theta):
        g = tension(theta)
        q = c * g
        r = 4.0 * s0 * s2 * mob(theta) * g
        root = np.sqrt(np.maximum(q * q - r, 0.0))
        k = math.pi / (s2 * c)
        return k * (q + root), k * (q - root)

    return profile, c, tension, (lambda th: mob(th) / (c * c))


def build_ejz_fourier(
    gamma: AnisotropyFn,
    mobility: AnisotropyFn | None,
    grid: Grid,
    normalization: str = "raw",
) -> SampledKernel:
    """Schwartz kernel with ``K^ = (exp(-zeta(a|xi|)) + exp(-zeta(b|xi|))) / 2``."""
    require_weak(gamma)
    profile, c, tension, realized_mob = ejz_fourier_profile(gamma, mobility, normalization)

    def fourier(kx, ky):
        r = np.hypot(kx, ky)
        a, b = profile(normal_angle(kx, ky))
        return 0.5 * np.exp(-zeta(r * a)) + 0.5 * np.exp(-zeta(r * b))

    th = np.linspace(-math.pi, math.pi, 1024, endpoint=False)
    a, b = profile(th)
    half = 0.5 * grid.length

    def fit(width):
        # physical extent of exp(-zeta(w |xi|)) is about 0.23 w; the |y|-weighted
        # tails need some 16 of those inside the half box
        return min(1.0, (half / (3.6 * width)) ** 2)

    def part(which):
        def f(kx, ky):
            ab = profile(normal_angle(kx, ky))[which]
            return np.exp(-zeta(np.hypot(kx, ky) * ab))

        return f

    spec = KernelSpec("ejz_fourier", gamma, mobility, normalization=normalization)
    s0, s2 = zeta_moments()
    return SampledKernel(
        spec,
        grid,
        fourier=fourier,
        tension=tension,
        mobility=realized_mob,
        validation_scale=fit(float(a.max())),
        parts=[(0.5, part(0), fit(float(a.max()))), (0.5, part(1), fit(float(b.max())))],
        info={"c": c, "s0": s0, "s2": s2, "a_max": float(a.max()), "b_min": float(b.min())},
    )


def build_kernel(spec: KernelSpec, grid: Grid) -> SampledKernel:
    """Dispatch on ``spec.family``."""
    if spec.family == "gaussian":
        return build_gaussian(grid)
    if spec.family == "bbc":
        return build_bbc(spec.anisotropy, grid)
    if spec.family == "ee":
        return build_ee(spec.anisotropy, spec.eps, grid, spec.n_dirs, spec.normalization)
    if spec.family == "ejz_physical":
        return build_ejz_physical(spec.anisotropy, spec.mobility, grid, spec.normalization)
    return build_ejz_fourier(spec.anisotropy, spec.mobility, grid, spec.normalization)


# ---------------------------------------------------------------------------
# validators


def _direction(n):
    """Unit normal from an angle (normal-angle convention) or a 2-vector."""
    if np.ndim(n) == 0:
        return -math.sin(n), math.cos(n)
    v = np.asarray(n, dtype=float)
    r = math.hypot(v[0], v[1])
    return v[0] / r, v[1] / r


def _validation_samples(K: SampledKernel, scale: float | None):
    """(weight, physical samples, dt) triples the validators sum over."""
    if scale is not None or not K.parts:
        dt = K.validation_scale if scale is None else scale
        return [(1.0, K.physical(dt), dt)]
    if K._part_samples is None:
        out = []
        kx, ky = K.grid.frequencies
        for weight, fourier, dt in K.parts:
            s = math.sqrt(dt)
            m = symmetrize_even(np.asarray(fourier(s * kx, s * ky), dtype=float))
            vals = sfft.irfft2(half_spectrum(m), s=K.grid.shape) / K.grid.cell_area
            out.append((weight, vals, dt))
        K._part_samples = out
    return K._part_samples


def induced_surface_tension(K: SampledKernel, n, scale: float | None = None) -> float:
    """gamma_K(n) = 1/2 int |n.y| K(y) dy by grid quadrature.

    The kernel is realised at time scale ``scale`` (defaults to the kernel's
    validation scale) so that it fits the periodic box; the result is mapped
    back to unit scale using gamma_{K_dt} = sqrt(dt) gamma_K.  Kernels made of
    components of very different widths are integrated component-wise, each
    at its own scale, unless ``scale`` is given.
    """
    nx, ny = _direction(n)
    X, Y = K.grid.centered
    proj = np.abs(nx * X + ny * Y)
    total = 0.0
    for weight, vals, dt in _validation_samples(K, scale):
        total += weight * 0.5 * float(np.sum(proj * vals)) * K.grid.cell_area / math.sqrt(dt)
    return total


def induced_mobility(K: SampledKernel, n, scale: float | None = None, order: int = 1) -> float:
    """mu_K(n) = 1 / (line integral of K over the line perpendicular to n).

    The line through the origin is sampled with step dx and the physical
    samples are interpolated (bilinear by default).
    """
    nx, ny = _direction(n)
    tx, ty = -ny, nx
    g = K.grid
    half = g.n // 2
    s = np.arange(-half, half + 1) * g.dx
    rows = half + s * ty / g.dx
    cols = half + s * tx / g.dx
    total = 0.0
    for weight, vals, dt in _validation_samples(K, scale):
        line = ndimage.map_coordinates(np.fft.fftshift(vals), [rows, cols], order=order, mode="grid-wrap")
        # line integral of K_dt equals that of K divided by sqrt(dt)
        total += weight * float(np.sum(line)) * g.dx * math.sqrt(dt)
    if not total > 1e-300:
        raise ZeroLineMass("line integral of the kernel vanished")
    return 1.0 / total


def kernel_table(K: SampledKernel, n_dirs: int = 32, scale: float | None = None) -> list[dict]:
    """Induced and target tension/mobility over equally spaced normals."""
    rows = []
    for k in range(n_dirs):
        th = -math.pi + 2 * math.pi * k / n_dirs
        row = {
            "theta": th,
            "gamma_K": induced_surface_tension(K, th, scale),
            "mu_K": induced_mobility(K, th, scale),
        }
        if K.target_tension is not None:
            row["gamma_target"] = float(K.target_tension(th))
        if K.target_mobility is not None:
            row["mu_target"] = float(K.target_mobility(th))
        rows.append(row)
    return rows
