"""Value types shared by every module.

Complex scalars are plain Python ``complex`` (or numpy ``complex128`` arrays);
the text form used in config files and on the command line is ``RE+IMi``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import InvariantViolation

DEFAULT_MAX_POINTS = 2000
MIN_POLE_SEPARATION = 1e-12

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_COMPLEX_RE = re.compile(rf"^\s*([+-]?{_NUM})\s*(?:([+-])\s*({_NUM})\s*i)?\s*$")
_IMAG_RE = re.compile(rf"^\s*([+-]?{_NUM})\s*i\s*$")


def parse_complex(text: str) -> complex:
    """Parse ``'0.0+1.0i'``, ``'-2.5e-3-4i'``, ``'3'`` or ``'0.5i'``."""
    m = _COMPLEX_RE.match(text)
    if m:
        re_part = float(m.group(1))
        im_part = 0.0
        if m.group(2):
            im_part = float(m.group(3)) * (-1.0 if m.group(2) == "-" else 1.0)
        return complex(re_part, im_part)
    m = _IMAG_RE.match(text)
    if m:
        return complex(0.0, float(m.group(1)))
    raise ValueError(f"not a complex literal: {text!r}")


def format_complex(value: complex) -> str:
    value = complex(value)
    sign = "-" if math.copysign(1.0, value.imag) < 0 else "+"
    return f"{value.real!r}{sign}{abs(value.imag)!r}i"


def _as_complex_array(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=complex)).copy()
    if arr.ndim != 1:
        raise InvariantViolation(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


class SpectralPoint(NamedTuple):
    z: complex
    c: complex


@dataclass(frozen=True)
class ScatteringData:
    """Poles ``z`` in the upper half-plane with their norming constants ``c``.

    The conjugate poles are implicit. Zero norming constants are allowed;
    such poles simply decouple from the rest of the spectrum.
    """

    z: np.ndarray
    c: np.ndarray
    max_points: int = field(default=DEFAULT_MAX_POINTS, compare=False)

    def __post_init__(self):
        z = _as_complex_array(self.z, "z")
        c = _as_complex_array(self.c, "c")
        if z.shape != c.shape:
            raise InvariantViolation(f"{len(z)} poles but {len(c)} norming constants")
        n = len(z)
        if n < 1 or n > self.max_points:
            raise InvariantViolation(f"number of poles {n} outside [1, {self.max_points}]")
        if np.any(z.imag <= 0):
            raise InvariantViolation("poles must lie strictly in the upper half-plane")
        if n > 1:
            d = np.abs(z[:, None] - z[None, :])
            np.fill_diagonal(d, np.inf)
            dmin = float(d.min())
            if dmin <= MIN_POLE_SEPARATION:
                i, j = np.unravel_index(np.argmin(d), d.shape)
                raise InvariantViolation(
                    f"poles {i} and {j} coincide (distance {dmin:.3e})"
                )
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_points(cls, points: Sequence[SpectralPoint], **kw) -> "ScatteringData":
        return cls(np.array([p.z for p in points]), np.array([p.c for p in points]), **kw)

    @property
    def n(self) -> int:
        return len(self.z)

    def __len__(self) -> int:
        return len(self.z)

    @property
    def points(self) -> list[SpectralPoint]:
        return [SpectralPoint(complex(a), complex(b)) for a, b in zip(self.z, self.c)]

    def __iter__(self) -> Iterator[SpectralPoint]:
        return iter(self.points)

    def with_constants(self, c) -> "ScatteringData":
        return ScatteringData(self.z, c, max_points=self.max_points)


@dataclass(frozen=True)
class EvaluationPoint:
    x: float
    t: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.t)):
            raise InvariantViolation("evaluation point must be finite")


def _strictly_increasing(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    if arr.ndim != 1 or arr.size == 0:
        raise InvariantViolation(f"{name} must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation(f"{name} contains non-finite values")
    if np.any(np.diff(arr) <= 0):
        raise InvariantViolation(f"{name} must be strictly increasing")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    x_values: np.ndarray
    t_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_values", _strictly_increasing(self.x_values, "x_values"))
        object.__setattr__(self, "t_values", _strictly_increasing(self.t_values, "t_values"))

    @classmethod
    def uniform(cls, x_min: float, x_max: float, nx: int,
                t_min: float = 0.0, t_max: float = 0.0, nt: int = 1) -> "Grid":
        xs = np.linspace(x_min, x_max, nx) if nx > 1 else np.array([x_min], dtype=float)
        ts = np.linspace(t_min, t_max, nt) if nt > 1 else np.array([t_min], dtype=float)
        return cls(xs, ts)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.t_values), len(self.x_values))


@dataclass(frozen=True)
class DensitySpec:
    """Interpolating density ``conj(z - conj_center)**p * sum_k coeffs[k] (z - expansion_center)**k``.

    With the default ``conj_center = 0`` the prefactor is plain ``conj(z)**p``.
    Anchoring the antiholomorphic factor at a point (``conj_center = d0``) is
    what the order-n and m-fold constructions need.
    """

    p: int
    coeffs: tuple
    expansion_center: complex = 0j
    conj_center: complex = 0j

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise InvariantViolation("p must be a nonnegative integer")
        coeffs = tuple(complex(v) for v in np.atleast_1d(np.asarray(self.coeffs, dtype=complex)))
        if not coeffs:
            raise InvariantViolation("density needs at least one coefficient")
        if coeffs[-1] == 0 and len(coeffs) > 1:
            raise InvariantViolation("leading coefficient must be nonzero")
        if not all(np.isfinite(v) for v in coeffs):
            raise InvariantViolation("coefficients must be finite")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "expansion_center", complex(self.expansion_center))
        object.__setattr__(self, "conj_center", complex(self.conj_center))

    @classmethod
    def constant(cls, value: complex) -> "DensitySpec":
        return cls(0, (value,))

    def holomorphic_part(self, z):
        """The polynomial factor alone, by Horner's rule."""
        u = np.asarray(z, dtype=complex) - self.expansion_center
        acc = np.zeros_like(u) + self.coeffs[-1]
        for a in reversed(self.coeffs[:-1]):
            acc = acc * u + a
        return acc

    def __call__(self, z):
        return eval_density(self, z)


def eval_density(spec: DensitySpec, z):
    """Evaluate the density at ``z`` (scalar or array)."""
    z = np.asarray(z, dtype=complex)
    out = spec.holomorphic_part(z)
    if spec.p:
        out = out * np.conj(z - spec.conj_center) ** spec.p
    return complex(out) if out.ndim == 0 else out
