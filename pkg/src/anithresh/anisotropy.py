"""Anisotropic surface tensions and their planar calculus.

Angles follow the normal-angle convention used throughout the package:
``theta`` parametrises the outer unit normal as

    n(theta) = (-sin(theta), cos(theta)),

so ``theta = 0`` is the upward normal and ``theta = pi/2`` points in the
negative x direction.  With this convention the Wulff envelope is

    x = -gamma sin(theta) - gamma' cos(theta)
    y =  gamma cos(theta) - gamma' sin(theta)

and the contact angles at the left/right triple points of a particle on a
flat substrate are the (signed) normal angles of the interface there: the
left angle lies in (0, pi) and the right one in (-pi, 0).  The magnitude is
the usual contact angle measured inside the particle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import NoIntersection, NoRoot, NotWeak

TWO_PI = 2.0 * math.pi

# bracketing resolution for Young's equation
YOUNG_SAMPLES = 4096
YOUNG_TOL = 1e-10


def normal_angle(vx, vy):
    """Normal angle of the direction ``(vx, vy)`` (need not be unit)."""
    return np.arctan2(-np.asarray(vx, dtype=float), np.asarray(vy, dtype=float))


def wrap_angle(theta):
    """Map angles into ``[-pi, pi)``."""
    return (np.asarray(theta, dtype=float) + math.pi) % TWO_PI - math.pi


class AnisotropyFn:
    """Base class for surface tension densities gamma(theta).

    Subclasses implement :meth:`_evaluate`, returning gamma and its first two
    derivatives with respect to the normal angle.  Instances are immutable.
    """

    name = "abstract"

    def __post_init__(self):
        th = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
        g, _, _ = self._evaluate(th)
        if not np.all(np.isfinite(g)) or np.min(g) <= 0:
            raise ValueError(f"{self!r} is not strictly positive")

    def _evaluate(self, theta: np.ndarray):
        raise NotImplementedError

    def __call__(self, theta):
        return self._evaluate(np.asarray(theta, dtype=float))[0]

    def evaluate(self, theta):
        g, d1, d2 = self._evaluate(np.asarray(theta, dtype=float))
        if np.ndim(g) == 0:
            return float(g), float(d1), float(d2)
        return g, d1, d2

    def stiffness(self, theta):
        """gamma + gamma''."""
        g, _, d2 = self._evaluate(np.asarray(theta, dtype=float))
        return g + d2

    def homogeneous(self, xi_x, xi_y):
        """1-homogeneous extension evaluated at the vectors ``(xi_x, xi_y)``."""
        xi_x = np.asarray(xi_x, dtype=float)
        xi_y = np.asarray(xi_y, dtype=float)
        r = np.hypot(xi_x, xi_y)
        out = r * self(normal_angle(xi_x, xi_y))
        return np.where(r > 0, out, 0.0)

    @property
    def is_constant(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(AnisotropyFn):
    c: float = 1.0

    name = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("constant surface tension must be positive")

    def _evaluate(self, theta):
        one = np.ones_like(theta)
        return self.c * one, 0.0 * one, 0.0 * one

    def homogeneous(self, xi_x, xi_y):
        return self.c * np.hypot(xi_x, xi_y)

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"type": self.name, "c": self.c}


@dataclass(frozen=True)
class CosineSeries(AnisotropyFn):
    """gamma(theta) = 1 + sum_j beta_j cos(m_j theta + phi_j)."""

    modes: tuple = ((0.05, 4, 0.0),)

    name = "cosine"

    def __post_init__(self):
        modes = tuple((float(b), int(m), float(p)) for b, m, p in self.modes)
        object.__setattr__(self, "modes", modes)
        super().__post_init__()

    def _evaluate(self, theta):
        g = np.ones_like(theta)
        d1 = np.zeros_like(theta)
        d2 = np.zeros_like(theta)
        for beta, m, phi in self.modes:
            arg = m * theta + phi
            c, s = np.cos(arg), np.sin(arg)
            g = g + beta * c
            d1 = d1 - beta * m * s
            d2 = d2 - beta * m * m * c
        return g, d1, d2

    @property
    def is_constant(self):
        return all(b == 0 for b, _, _ in self.modes)

    def to_dict(self):
        return {"type": self.name, "modes": [list(m) for m in self.modes]}


@dataclass(frozen=True)
class Elliptic(AnisotropyFn):
    """gamma(x, y) = sqrt((a x)^2 + (b y)^2) restricted to unit normals."""

    a: float = 2.0
    b: float = 1.0

    name = "elliptic"

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("elliptic semi-axes must be positive")

    def _evaluate(self, theta):
        s, c = np.sin(theta), np.cos(theta)
        a2, b2 = self.a**2, self.b**2
        g2 = a2 * s * s + b2 * c * c
        g = np.sqrt(g2)
        dg2 = (a2 - b2) * np.sin(2 * theta)
        ddg2 = 2.0 * (a2 - b2) * np.cos(2 * theta)
        d1 = dg2 / (2 * g)
        d2 = (0.5 * ddg2 - d1 * d1) / g
        return g, d1, d2

    def homogeneous(self, xi_x, xi_y):
        return np.hypot(self.a * np.asarray(xi_x), self.b * np.asarray(xi_y))

    @property
    def is_constant(self):
        return self.a == self.b

    def to_dict(self):
        return {"type": self.name, "a": self.a, "b": self.b}


def _soft_abs(u, du, ddu, eps):
    # sqrt(eps^2 + u^2) and its first two derivatives along a curve u(theta)
    f = np.sqrt(eps * eps + u * u)
    f1 = u / f
    f2 = eps * eps / f**3
    return f, f1 * du, f2 * du * du + f1 * ddu


@dataclass(frozen=True)
class RegularizedCrystalline(AnisotropyFn):
    """gamma(x, y) = sqrt(eps^2 + x^2) + sqrt(eps^2 + y^2) on unit normals.

    Regularises the crystalline ``|x| + |y|`` whose Wulff shape is a square.
    """

    eps: float = 0.01

    name = "crystalline"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def _evaluate(self, theta):
        s, c = np.sin(theta), np.cos(theta)
        # n = (-sin, cos); the sign of x is irrelevant under the square
        fx, fx1, fx2 = _soft_abs(s, c, -s, self.eps)
        fy, fy1, fy2 = _soft_abs(c, -s, -c, self.eps)
        return fx + fy, fx1 + fy1, fx2 + fy2

    def to_dict(self):
        return {"type": self.name, "eps": self.eps}


def anisotropy_from_dict(d: dict) -> AnisotropyFn:
    """Inverse of ``AnisotropyFn.to_dict``."""
    d = dict(d)
    kind = d.pop("type")
    if kind == "constant":
        return Constant(**d)
    if kind == "cosine":
        return CosineSeries(tuple(tuple(m) for m in d.pop("modes")), **d)
    if kind == "elliptic":
        return Elliptic(**d)
    if kind == "crystalline":
        return RegularizedCrystalline(**d)
    raise ValueError(f"unknown anisotropy type {kind!r}")


# ---------------------------------------------------------------------------
# operations


def evaluate(gamma: AnisotropyFn, theta):
    """Return ``(gamma, gamma', gamma'')`` at the normal angle ``theta``."""
    return gamma.evaluate(theta)


def homogeneous_extension(gamma: AnisotropyFn, xi) -> float:
    """gamma(xi) = |xi| gamma(xi / |xi|), with gamma(0) = 0."""
    xi = np.asarray(xi, dtype=float)
    return gamma.homogeneous(xi[..., 0], xi[..., 1])


@dataclass(frozen=True)
class AnisotropyClass:
    tag: str  # "isotropic", "weak" or "strong"
    margin: float

    @property
    def admissible(self) -> bool:
        return self.tag != "strong"


def classify(gamma: AnisotropyFn, n_samples: int = 3600) -> AnisotropyClass:
    """Classify by the sign of gamma + gamma'' on a uniform angle grid."""
    if n_samples < 360:
        raise ValueError("classify needs at least 360 samples")
    th = np.linspace(-math.pi, math.pi, n_samples, endpoint=False)
    g, _, d2 = gamma._evaluate(th)
    margin = float(np.min(g + d2))
    if gamma.is_constant:
        return AnisotropyClass("isotropic", margin)
    return AnisotropyClass("weak" if margin > 0 else "strong", margin)


def require_weak(gamma: AnisotropyFn) -> AnisotropyClass:
    cls = classify(gamma)
    if not cls.admissible:
        raise NotWeak(f"{gamma!r} is strongly anisotropic (min gamma+gamma'' = {cls.margin:.4g})")
    return cls


def wulff_envelope(gamma: AnisotropyFn, theta):
    """Point(s) of the Wulff envelope with normal angle ``theta``."""
    g, d1, _ = gamma._evaluate(np.asarray(theta, dtype=float))
    s, c = np.sin(theta), np.cos(theta)
    x = -g * s - d1 * c
    y = g * c - d1 * s
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def young_residual(gamma: AnisotropyFn, theta, gamma_sp: float, gamma_sv: float):
    g, d1, _ = gamma._evaluate(np.asarray(theta, dtype=float))
    return g * np.cos(theta) - d1 * np.sin(theta) + gamma_sp - gamma_sv


@dataclass(frozen=True)
class ContactSolution:
    left_angle: float
    right_angle: float
    all_roots: tuple = field(default_factory=tuple)

    @property
    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.left_angle), math.degrees(self.right_angle)


def solve_young(gamma: AnisotropyFn, gamma_sp: float, gamma_sv: float) -> ContactSolution:
    """All roots of the anisotropic Young equation and the left/right pair.

    Roots are bracketed on a uniform periodic grid and refined by bisection.
    The left root is the one whose envelope point lies furthest to the left.
    """
    th = np.linspace(-math.pi, math.pi, YOUNG_SAMPLES, endpoint=False)
    f = young_residual(gamma, th, gamma_sp, gamma_sv)

    def res(t):
        return float(young_residual(gamma, t, gamma_sp, gamma_sv))

    roots = [float(t) for t in th[f == 0.0]]
    f_next = np.roll(f, -1)
    h = th[1] - th[0]
    for i in np.nonzero(f * f_next < 0)[0]:
        a = th[i]
        r = optimize.bisect(res, a, a + h, xtol=YOUNG_TOL)
        roots.append(float(wrap_angle(r)))
    if not roots:
        raise NoRoot(
            f"no contact angle for gamma_SP={gamma_sp}, gamma_SV={gamma_sv}: "
            "complete wetting or dewetting"
        )
    roots.sort()
    xs = [wulff_envelope(gamma, r)[0] for r in roots]
    order_left = sorted(range(len(roots)), key=lambda i: (xs[i], abs(roots[i])))
    order_right = sorted(range(len(roots)), key=lambda i: (-xs[i], abs(roots[i])))
    return ContactSolution(roots[order_left[0]], roots[order_right[0]], tuple(roots))


def polygon_area(poly) -> float:
    """Signed shoelace area of a closed polygon given as (N, 2) vertices."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def winterbottom_shape(
    gamma: AnisotropyFn,
    gamma_sp: float,
    gamma_sv: float,
    area: float,
    n_points: int = 4096,
) -> np.ndarray:
    """Equilibrium particle on the substrate ``y = 0`` with the given area.

    The Wulff envelope is cut at height ``gamma_sv - gamma_sp``; the part above
    the cut is shifted down onto the substrate and rescaled to ``area``.
    Vertices run counter-clockwise starting at the right contact point and end
    at the left contact point; the closing edge lies on the substrate.
    """
    require_weak(gamma)
    h = gamma_sv - gamma_sp
    try:
        sol = solve_young(gamma, gamma_sp, gamma_sv)
    except NoRoot as exc:
        raise NoIntersection(f"truncation height {h} misses the Wulff shape") from exc
    th_r, th_l = sol.right_angle, sol.left_angle
    if th_l <= th_r:
        th_l += TWO_PI
    th = np.linspace(th_r, th_l, n_points)
    x, y = wulff_envelope(gamma, th)
    poly = np.column_stack([x, y - h])
    poly[0, 1] = poly[-1, 1] = 0.0
    a0 = polygon_area(poly)
    if a0 <= 0:
        raise NoIntersection("degenerate truncated shape")
    return poly * math.sqrt(area / a0)


__all__: Sequence[str] = [
    "AnisotropyFn",
    "Constant",
    "CosineSeries",
    "Elliptic",
    "RegularizedCrystalline",
    "AnisotropyClass",
    "ContactSolution",
    "anisotropy_from_dict",
    "evaluate",
    "homogeneous_extension",
    "classify",
    "require_weak",
    "wulff_envelope",
    "solve_young",
    "winterbottom_shape",
    "polygon_area",
    "normal_angle",
    "wrap_angle",
]
