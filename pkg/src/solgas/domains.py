"""Spectral supports: disks, m-fold quadrature domains and ellipses.

Besides membership and area, each domain knows its Schwarz function and the
closed-form reduction of a soliton gas filling it: finitely many solitons for
the m-fold domains, a weighted gas on the focal segment for the ellipse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DensityMismatch,
    InvariantViolation,
    OutOfSegment,
    PoleTooClose,
    RootsNotDistinct,
    RootsOutsideUpperHalfPlane,
)
from .types import DensitySpec, ScatteringData, eval_density

JUMP_MIN_DISTANCE = 1e-6
MC_AREA_SAMPLES = 10**6

# Orientation of the focal-segment jump, fixed by matching the segment gas to
# the area gas (see tests/test_domains.py::test_segment_sign_regression).
SEGMENT_JUMP_SIGN = 1.0


@dataclass(frozen=True)
class DiskDomain:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise InvariantViolation("radius must be positive")
        if not self.center.imag - self.radius > 0:
            raise InvariantViolation("disk must lie strictly in the upper half-plane")

    kind = "disk"

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def bounding_box(self):
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def polar_center(self) -> complex:
        return self.center

    def polar_radius(self, angle):
        return np.full_like(np.asarray(angle, dtype=float), self.radius)

    def schwarz(self, z):
        return np.conj(self.center) + self.radius**2 / (np.asarray(z) - self.center)

    def exact_area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True)
class QuadratureDomain:
    """``{z : |(z - d0)^m - d1| < rho}``."""

    d0: complex
    d1: complex
    rho: float
    m: int

    kind = "quadrature"

    def __post_init__(self):
        object.__setattr__(self, "d0", complex(self.d0))
        object.__setattr__(self, "d1", complex(self.d1))
        object.__setattr__(self, "rho", float(self.rho))
        if int(self.m) != self.m or self.m < 1:
            raise InvariantViolation("m must be a positive integer")
        object.__setattr__(self, "m", int(self.m))
        if not self.rho > 0:
            raise InvariantViolation("rho must be positive")
        if np.min(self.boundary_points(512).imag) <= 0:
            raise InvariantViolation("domain must lie in the upper half-plane")

    def contains(self, z):
        u = np.asarray(z) - self.d0
        return np.abs(u**self.m - self.d1) < self.rho

    def boundary_points(self, n: int = 256) -> np.ndarray:
        """Points on every boundary sheet, via ``(z - d0)^m = d1 + rho e^{i phi}``."""
        phi = 2 * np.pi * np.arange(n) / n
        w = self.d1 + self.rho * np.exp(1j * phi)
        base = w ** (1.0 / self.m)
        rots = np.exp(2j * np.pi * np.arange(self.m) / self.m)
        return (self.d0 + base[None, :] * rots[:, None]).ravel()

    def bounding_box(self):
        b = self.boundary_points(2048)
        pad = 1e-3 * max(np.ptp(b.real), np.ptp(b.imag), 1e-12)
        return b.real.min() - pad, b.real.max() + pad, b.imag.min() - pad, b.imag.max() + pad

    @property
    def star_shaped(self) -> bool:
        return abs(self.d1) < self.rho

    def polar_center(self) -> complex:
        return self.d0

    def polar_radius(self, angle):
        """Distance from d0 to the boundary along direction ``angle``."""
        if not self.star_shaped:
            raise ValueError("polar description needs |d1| < rho")
        angle = np.asarray(angle, dtype=float)
        proj = np.real(np.conj(self.d1) * np.exp(1j * self.m * angle))
        r_m = proj + np.sqrt(proj**2 + self.rho**2 - abs(self.d1) ** 2)
        return r_m ** (1.0 / self.m)

    def schwarz(self, z):
        """Principal branch of ``conj(d0) + (conj(d1) + rho^2/((z-d0)^m - d1))^(1/m)``."""
        u = (np.asarray(z) - self.d0) ** self.m - self.d1
        return np.conj(self.d0) + (np.conj(self.d1) + self.rho**2 / u) ** (1.0 / self.m)

    def roots(self) -> np.ndarray:
        """Solutions of ``(z - d0)^m = d1`` ordered by increasing phase."""
        base = complex(self.d1) ** (1.0 / self.m)
        return self.d0 + base * np.exp(2j * np.pi * np.arange(self.m) / self.m)


@dataclass(frozen=True)
class EllipseDomain:
    """Ellipse with foci ``i alpha1``, ``i alpha2`` and distance sum ``2 rho``."""

    alpha1: float
    alpha2: float
    rho: float

    kind = "ellipse"

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "rho"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0 < self.alpha1 < self.alpha2:
            raise InvariantViolation("need 0 < alpha1 < alpha2")
        if not self.rho > self.c:
            raise InvariantViolation("rho must exceed the half focal distance")
        if not self.y0 - self.rho > 0:
            raise InvariantViolation("ellipse must lie in the upper half-plane")

    @property
    def c(self) -> float:
        return 0.5 * (self.alpha2 - self.alpha1)

    @property
    def y0(self) -> float:
        return 0.5 * (self.alpha1 + self.alpha2)

    @property
    def semi_axes(self) -> tuple[float, float]:
        """(horizontal, vertical)."""
        return math.sqrt(self.rho**2 - self.c**2), self.rho

    def contains(self, z):
        z = np.asarray(z)
        return (np.abs(z - 1j * self.alpha1) + np.abs(z - 1j * self.alpha2)) < 2 * self.rho

    def bounding_box(self):
        a, b = self.semi_axes
        return -a, a, self.y0 - b, self.y0 + b

    def polar_center(self) -> complex:
        return 1j * self.y0

    def polar_radius(self, angle):
        a, b = self.semi_axes
        angle = np.asarray(angle, dtype=float)
        return a * b / np.sqrt((b * np.cos(angle)) ** 2 + (a * np.sin(angle)) ** 2)

    def sqrt_focal(self, z):
        """``R(z) = sqrt((z - i alpha1)(z - i alpha2))``, cut on the focal segment, ``R ~ z``."""
        u = np.asarray(z, dtype=complex) - 1j * self.y0
        return u * np.sqrt(1.0 + self.c**2 / (u * u))

    def schwarz(self, z):
        rho, c, y0 = self.rho, self.c, self.y0
        z = np.asarray(z, dtype=complex)
        return ((1 - 2 * rho**2 / c**2) * (z - 1j * y0)
                + 2 * rho / c**2 * math.sqrt(rho**2 - c**2) * self.sqrt_focal(z) - 1j * y0)

    def exact_area(self) -> float:
        a, b = self.semi_axes
        return math.pi * a * b


Domain = Union[DiskDomain, QuadratureDomain, EllipseDomain]


def contains(domain: Domain, z):
    """Strict interior membership; vectorised over ``z``."""
    out = domain.contains(z)
    return bool(out) if np.ndim(out) == 0 else out


def area_monte_carlo(domain: Domain, n: int = MC_AREA_SAMPLES, seed: int = 0):
    """Hit-or-miss estimate over the bounding box: ``(area, standard_error)``."""
    x0, x1, y0, y1 = domain.bounding_box()
    rng = np.random.default_rng(seed)
    pts = rng.uniform(x0, x1, n) + 1j * rng.uniform(y0, y1, n)
    frac = float(np.mean(domain.contains(pts)))
    box = (x1 - x0) * (y1 - y0)
    return box * frac, box * math.sqrt(frac * (1 - frac) / n)


def _polar_area(domain: Domain, n: int = 4096) -> float:
    # periodic trapezoid rule: spectrally accurate for smooth boundaries
    ang = 2 * np.pi * np.arange(n) / n
    return float(0.5 * np.mean(domain.polar_radius(ang) ** 2) * 2 * np.pi)


def area_with_error(domain: Domain, seed: int = 0):
    """Area and its standard error (zero for closed forms).

    m-fold domains with ``|d1| < rho`` are star-shaped about ``d0`` and use the
    polar integral; disconnected ones fall back to Monte Carlo.
    """
    if isinstance(domain, (DiskDomain, EllipseDomain)):
        return domain.exact_area(), 0.0
    if domain.m == 1:
        return math.pi * domain.rho**2, 0.0
    if domain.star_shaped:
        return _polar_area(domain), 0.0
    return area_monte_carlo(domain, seed=seed)


def area(domain: Domain, seed: int = 0) -> float:
    return area_with_error(domain, seed)[0]


@dataclass(frozen=True)
class NSolitonPrediction:
    points: ScatteringData

    @property
    def n(self) -> int:
        return self.points.n


def quadrature_prediction(domain: QuadratureDomain | DiskDomain,
                          density: DensitySpec) -> NSolitonPrediction:
    """Finite-soliton data a gas filling an m-fold domain collapses onto.

    ``density`` must be ``n conj(z - d0)^(n-1) r(z)`` with ``n = m``; its
    polynomial part is ``n r(z)``. For n = 1 the anchor is irrelevant.
    """
    if isinstance(domain, DiskDomain):
        domain = QuadratureDomain(domain.center, 0j, domain.radius, 1)
    n = domain.m
    if density.p != n - 1:
        raise DensityMismatch(f"density power {density.p} must equal m - 1 = {n - 1}")
    if n > 1 and abs(density.conj_center - domain.d0) > 1e-14 * max(1.0, abs(domain.d0)):
        raise DensityMismatch(
            "the antiholomorphic factor must be anchored at d0 (conj_center = d0)")
    if n > 1 and domain.d1 == 0:
        raise RootsNotDistinct("d1 = 0 gives a single root of order m")
    lam = domain.roots()
    if np.any(lam.imag <= 0):
        raise RootsOutsideUpperHalfPlane(f"roots {lam} leave the upper half-plane")
    r = density.holomorphic_part(lam) / n
    c = np.empty(n, dtype=complex)
    for j in range(n):
        others = np.delete(lam, j)
        c[j] = domain.rho**2 * r[j] / np.prod(lam[j] - others)
    return NSolitonPrediction(ScatteringData(lam, c))


def _check_segment(domain: EllipseDomain, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any((y <= domain.alpha1) | (y >= domain.alpha2)):
        raise OutOfSegment(f"y must lie in ({domain.alpha1}, {domain.alpha2})")
    return y


def ellipse_schwarz_jump(domain: EllipseDomain, y):
    """Jump of the ellipse Schwarz function across the focal segment at ``i y``."""
    y = _check_segment(domain, y)
    rho, c = domain.rho, domain.c
    r_plus = SEGMENT_JUMP_SIGN * np.sqrt((y - domain.alpha1) * (domain.alpha2 - y))
    out = (4 * rho / c**2) * math.sqrt(rho**2 - c**2) * r_plus
    return complex(out) if out.ndim == 0 else out.astype(complex)


def segment_discretization(domain: EllipseDomain, density: DensitySpec, n: int) -> ScatteringData:
    """Midpoint-rule gas on ``[i alpha1, i alpha2]`` weighted by the Schwarz jump."""
    if density.p != 0:
        raise DensityMismatch("segment reduction needs a holomorphic density (p = 0)")
    if n < 2:
        raise ValueError("need at least two segment points")
    step = (domain.alpha2 - domain.alpha1) / n
    y = domain.alpha1 + (np.arange(n) + 0.5) * step
    w = 1j * y
    # c_j = r(w_j) dS(w_j) (i step) / (2 pi i)
    c = eval_density(density, w) * ellipse_schwarz_jump(domain, y) * step / (2 * np.pi)
    return ScatteringData(w, c)


def jump_field(data: ScatteringData, z):
    """``sum_j c_j / (z - z_j)`` at the point(s) ``z``."""
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    d = flat[:, None] - data.z[None, :]
    if np.abs(d).min() <= JUMP_MIN_DISTANCE:
        raise PoleTooClose("evaluation point too close to the spectrum")
    out = (data.c[None, :] / d).sum(axis=1)
    return complex(out[0]) if z.ndim == 0 else out.reshape(z.shape)
