"""Plane and Riemann-sphere primitives.

Finite points are plain complex numbers wherever possible; PlanePoint
exists so that the point at infinity can travel through the same code
paths as finite values (pole hits are expected, not exceptional).

All values here are immutable and all functions are pure, so everything
is safe to share between concurrent workers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class PlanePoint:
    """A finite complex number or the point at infinity."""

    re: float = 0.0
    im: float = 0.0
    at_infinity: bool = False

    @classmethod
    def from_complex(cls, z: complex) -> "PlanePoint":
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return cls.infinity()
        return cls(z.real, z.imag)

    @classmethod
    def infinity(cls) -> "PlanePoint":
        return cls(0.0, 0.0, True)

    @classmethod
    def from_polar(cls, modulus: float, angle: float) -> "PlanePoint":
        return cls(modulus * math.cos(angle), modulus * math.sin(angle))

    def to_polar(self) -> tuple[float, float]:
        if self.at_infinity:
            raise ValidationError("infinity has no polar form")
        return abs(complex(self.re, self.im)), math.atan2(self.im, self.re)

    @property
    def z(self) -> complex:
        if self.at_infinity:
            raise ValidationError("infinity cannot be converted to complex")
        return complex(self.re, self.im)

    def __complex__(self) -> complex:
        return self.z

    @property
    def modulus(self) -> float:
        return math.inf if self.at_infinity else abs(complex(self.re, self.im))


def as_point(value) -> PlanePoint:
    """Coerce a complex number, real number or PlanePoint."""
    if isinstance(value, PlanePoint):
        return value
    return PlanePoint.from_complex(complex(value))


@dataclass(frozen=True)
class Disk:
    """Open disk with finite center and positive radius."""

    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"disk radius must be positive, got {self.radius}")
        c = complex(self.center)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValidationError("disk center must be finite")

    def contains(self, z: complex) -> bool:
        return abs(complex(z) - self.center) < self.radius


@dataclass(frozen=True)
class Annulus:
    """Round annulus inner_radius <= |z| < outer_radius; outer may be inf."""

    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not (self.inner_radius > 0 and self.inner_radius < self.outer_radius):
            raise ValidationError(
                f"need 0 < inner < outer, got ({self.inner_radius}, {self.outer_radius})"
            )

    def contains(self, z: complex) -> bool:
        return self.inner_radius <= abs(complex(z)) < self.outer_radius


def dyadic_annulus(n: int) -> Annulus:
    """The shell 2^n <= |z| < 2^{n+1}."""
    return Annulus(2.0**n, 2.0 ** (n + 1))


@dataclass(frozen=True)
class KoebeConstants:
    """Distortion bounds for a univalent map restricted to |z - a| < lambda*r."""

    lam: float
    offset_lower: float
    offset_upper: float
    deriv_lower: float
    deriv_upper: float


def koebe_constants(lam: float) -> KoebeConstants:
    """Classical Koebe distortion constants at relative radius lam in (0,1)."""
    if not 0.0 < lam < 1.0:
        raise ValidationError(f"lambda must lie in (0,1), got {lam}")
    return KoebeConstants(
        lam=lam,
        offset_lower=lam / (1.0 + lam) ** 2,
        offset_upper=lam / (1.0 - lam) ** 2,
        deriv_lower=(1.0 - lam) / (1.0 + lam) ** 3,
        deriv_upper=(1.0 + lam) / (1.0 - lam) ** 3,
    )


def spherical_distance(z1, z2) -> float:
    """Chordal distance on the Riemann sphere; symmetric, bounded by 2."""
    p1, p2 = as_point(z1), as_point(z2)
    if p1.at_infinity and p2.at_infinity:
        return 0.0
    if p1.at_infinity:
        return 2.0 / math.sqrt(1.0 + p2.modulus**2)
    if p2.at_infinity:
        return 2.0 / math.sqrt(1.0 + p1.modulus**2)
    num = 2.0 * abs(p1.z - p2.z)
    if num == 0.0:
        return 0.0
    return num / (math.sqrt(1.0 + abs(p1.z) ** 2) * math.sqrt(1.0 + abs(p2.z) ** 2))


def spherical_diameter_factor(a_modulus: float, M: int) -> float:
    """Factor converting Euclidean to spherical diameters inside D(a, |a|/2).

    Valid for |a| >= 1; multiplying a Euclidean diameter of a set inside
    D(a, |a|/2) by the returned value over-estimates its spherical diameter.
    """
    if a_modulus < 1.0:
        raise ValidationError(f"factor requires modulus >= 1, got {a_modulus}")
    if M < 1:
        raise ValidationError(f"pole multiplicity must be >= 1, got {M}")
    return 8.0 / a_modulus ** (1.0 + 1.0 / M)


def unit_circle_point(angle: float) -> complex:
    return cmath.exp(1j * angle)
