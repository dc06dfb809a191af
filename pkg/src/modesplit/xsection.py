"""Elliptical cross-section geometry and material constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from modesplit.errors import InputError


class Axis(str, Enum):
    """Displacement direction of a flexural mode.

    ``HIGH`` is displacement along the major semi-axis, which bends about the
    larger area moment and therefore vibrates at the higher frequency.
    """

    HIGH = "higher-stiffness"
    LOW = "lower-stiffness"


@dataclass(frozen=True)
class Material:
    young_modulus: float  # Pa
    density: float  # kg/m^3

    def __post_init__(self):
        if not (self.young_modulus > 0 and self.density > 0):
            raise InputError("young_modulus and density must be positive")

    @property
    def sound_speed(self) -> float:
        """sqrt(E / rho) in m/s."""
        return math.sqrt(self.young_modulus / self.density)


SILICA = Material(young_modulus=73e9, density=2320.0)


@dataclass(frozen=True)
class EllipseSection:
    """Solid elliptical section with semi-axes ``r1 >= r2`` (meters).

    The constructor swaps the arguments if they are given in the other order.
    """

    r1: float
    r2: float

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0) or not all(map(math.isfinite, (self.r1, self.r2))):
            raise InputError(f"semi-axes must be positive and finite, got {self.r1}, {self.r2}")
        if self.r2 > self.r1:
            r1, r2 = self.r2, self.r1
            object.__setattr__(self, "r1", r1)
            object.__setattr__(self, "r2", r2)

    @classmethod
    def circle(cls, radius: float) -> EllipseSection:
        return cls(radius, radius)

    @classmethod
    def from_mean_radius(cls, mean_radius: float, ellipticity: float) -> EllipseSection:
        """Build the section whose semi-axes average to ``mean_radius``."""
        if ellipticity < 1:
            raise InputError("ellipticity must be >= 1")
        r2 = 2.0 * mean_radius / (1.0 + ellipticity)
        return cls(ellipticity * r2, r2)

    @classmethod
    def from_major(cls, r1: float, ellipticity: float) -> EllipseSection:
        if ellipticity < 1:
            raise InputError("ellipticity must be >= 1")
        return cls(r1, r1 / ellipticity)

    @property
    def mean_radius(self) -> float:
        return 0.5 * (self.r1 + self.r2)


def area(section: EllipseSection) -> float:
    return math.pi * section.r1 * section.r2


def moment_for_displacement_along(section: EllipseSection, axis: Axis | str) -> float:
    """Second moment of area (m^4) governing bending in direction ``axis``.

    Displacement along the major semi-axis bends about the minor one, giving
    pi*r1^3*r2/4; displacement along the minor semi-axis gives pi*r1*r2^3/4.
    """
    axis = Axis(axis)
    r1, r2 = section.r1, section.r2
    if axis is Axis.HIGH:
        return math.pi * r1**3 * r2 / 4.0
    return math.pi * r1 * r2**3 / 4.0


def ellipticity(section: EllipseSection) -> float:
    return section.r1 / section.r2


def axis_difference(section: EllipseSection) -> float:
    return section.r1 - section.r2


def diameter_difference(section: EllipseSection) -> float:
    return 2.0 * (section.r1 - section.r2)


def mass_per_length(section: EllipseSection, material: Material) -> float:
    return material.density * area(section)


def axis_difference_from(mean_radius: float, eps: float) -> float:
    """Semi-axis difference r1 - r2 of a section with the given mean radius."""
    return 2.0 * mean_radius * (eps - 1.0) / (1.0 + eps)


def difference_uncertainty(
    mean_radius: float, eps: float, sigma_eps: float, sigma_radius: float = 0.0
) -> tuple[float, float]:
    """Propagate (sigma_eps, sigma_radius) to (sigma axis diff, sigma diameter diff).

    First-order propagation of ``axis_difference_from``; the two input
    uncertainties are treated as independent.
    """
    d_eps = 4.0 * mean_radius / (1.0 + eps) ** 2
    d_r = 2.0 * (eps - 1.0) / (1.0 + eps)
    sigma_axis = math.hypot(d_eps * sigma_eps, d_r * sigma_radius)
    return sigma_axis, 2.0 * sigma_axis
