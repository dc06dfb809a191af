"""Thermal amplitudes of a mode pair and their projection onto the probe axis.

Orientation convention used throughout the package: the probe axis makes
angle theta with the higher-stiffness principal axis. The high-frequency
mode, which vibrates along that axis, is picked up with weight cos^2(theta)
("mode 2"); the orthogonal low-frequency mode gets sin^2(theta) ("mode 1").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from modesplit.errors import InputError
from modesplit.splitting import ModePair

BOLTZMANN = 1.380649e-23  # J/K


@dataclass(frozen=True)
class ThermalEnv:
    temperature: float = 295.0  # K

    def __post_init__(self):
        if not self.temperature > 0:
            raise InputError("temperature must be positive")


@dataclass(frozen=True)
class ProjectionGeometry:
    theta: float  # rad

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi / 2 + 1e-15):
            raise InputError("theta must lie in [0, pi/2]")

    @classmethod
    def degrees(cls, theta_deg: float) -> ProjectionGeometry:
        return cls(math.radians(theta_deg))


def amplitude_ratio(pair: ModePair) -> float:
    """<d^2> of the low-frequency mode over that of the high-frequency mode.

    Equal modal masses and equipartition give mean-square deflection
    proportional to 1/f^2, so the ratio is (f_high/f_low)^2.
    """
    return (pair.f_high / pair.f_low) ** 2


def project(msq_1: float, msq_2: float, geom: ProjectionGeometry) -> tuple[float, float]:
    """Mean-square deflections seen along the probe axis.

    ``msq_1`` belongs to the low-frequency mode (weight sin^2 theta),
    ``msq_2`` to the high-frequency mode (weight cos^2 theta).
    """
    if msq_1 < 0 or msq_2 < 0:
        raise InputError("mean-square deflections must be non-negative")
    s2 = math.sin(geom.theta) ** 2
    return msq_1 * s2, msq_2 * (1.0 - s2)


@dataclass(frozen=True)
class AngleEstimate:
    theta: float  # rad
    degenerate: bool = False


def angle_from_measurements(measured_1: float, measured_2: float, f_ratio_squared: float) -> AngleEstimate:
    """Invert :func:`project` for theta.

    ``f_ratio_squared`` is (f_1/f_2)^2 = (f_low/f_high)^2, which undoes the
    equipartition weighting of the measured amplitudes.
    """
    if measured_1 < 0 or f_ratio_squared <= 0:
        raise InputError("need measured_1 >= 0 and f_ratio_squared > 0")
    if measured_2 <= 0:
        return AngleEstimate(math.pi / 2, degenerate=True)
    return AngleEstimate(math.atan(math.sqrt(measured_1 / measured_2 * f_ratio_squared)))


def thermal_msq(env: ThermalEnv, frequency: float, modal_mass: float) -> float:
    """Equipartition mean-square deflection k_B T / (m_eff omega^2) in m^2."""
    omega = 2 * math.pi * frequency
    return BOLTZMANN * env.temperature / (modal_mass * omega * omega)


@dataclass(frozen=True)
class PeakModel:
    """Lorentzian PSD line parameterized by center, full width and area.

    S(f) = S0 (G/2)^2 / ((f - f0)^2 + (G/2)^2) with S0 = 2*area/(pi*G), so
    the integral over all f equals ``area``.
    """

    f0: float
    gamma: float
    area: float

    @property
    def height(self) -> float:
        return 2.0 * self.area / (math.pi * self.gamma)

    @property
    def q_factor(self) -> float:
        return self.f0 / self.gamma

    def __call__(self, f):
        hw = 0.5 * self.gamma
        return self.height * hw * hw / ((np.asarray(f, dtype=float) - self.f0) ** 2 + hw * hw)


def thermal_peak(env: ThermalEnv, f0: float, Q: float, msq: float) -> PeakModel:
    """Lorentzian with width f0/Q whose area is ``msq``.

    ``env`` is kept for symmetry with :func:`thermal_msq`; the line shape
    itself does not depend on temperature once ``msq`` is fixed.
    """
    if not (f0 > 0 and Q > 1):
        raise InputError("need f0 > 0 and Q > 1")
    return PeakModel(f0, f0 / Q, msq)
