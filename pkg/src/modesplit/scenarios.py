"""Reference configurations used by the acceptance suite, scripts and CLI defaults."""

from __future__ import annotations

import math
from functools import lru_cache

from modesplit.beam import BeamSpec, eigenfrequency_exact
from modesplit.splitting import ConvergenceModel
from modesplit.synth import SpectrumConfig
from modesplit.thermal import ProjectionGeometry
from modesplit.xsection import Axis, EllipseSection

MEAN_RADIUS = 260e-9
EPSILON = 1.0014
THETA_DEG = 60.0
# excess ratio A*exp(-alpha*n) drops below 1e-6 at order 24
AMPLITUDE = 2e-3
DECAY = 0.32
ANCHOR_ORDER, ANCHOR_FREQ = 155, 503e3


@lru_cache(maxsize=None)
def anchored_length(mean_radius: float = MEAN_RADIUS, epsilon: float = EPSILON,
                    order: int = ANCHOR_ORDER, frequency: float = ANCHOR_FREQ) -> float:
    """Beam length that puts the lower mode of ``order`` at ``frequency``.

    Frequencies scale as 1/L^2, so one evaluation at unit length suffices.
    """
    unit = BeamSpec(1.0, EllipseSection.from_mean_radius(mean_radius, epsilon))
    return math.sqrt(eigenfrequency_exact(unit, Axis.LOW, order) / frequency)


def reference_beam(epsilon: float = EPSILON, mean_radius: float = MEAN_RADIUS) -> BeamSpec:
    """Silica waist of the given mean radius, lengthened so order 155 sits at 503 kHz.

    The length is anchored at the reference ellipticity, so changing
    ``epsilon`` moves the lines only through the section.
    """
    return BeamSpec(anchored_length(mean_radius), EllipseSection.from_mean_radius(mean_radius, epsilon))


def reference_config(seed: int = 42, *, epsilon: float = EPSILON, theta_deg: float = THETA_DEG,
                      noise_rms: float = 1e-4, f_max: float = 300e3, amplitude: float = AMPLITUDE,
                      decay: float = DECAY) -> SpectrumConfig:
    """Round-trip scenario: Q = 1e4 lines from 1 kHz to ``f_max`` on 1 Hz bins.

    ``f_max`` stays below the order (about 143 here) where a pair's splitting
    reaches 10% of the gap to the next order and the pairing rule breaks.
    """
    conv = ConvergenceModel(epsilon, amplitude, decay) if epsilon > 1 else None
    return SpectrumConfig(
        beam=reference_beam(epsilon),
        geometry=ProjectionGeometry.degrees(theta_deg),
        f_min=1e3, f_max=f_max, bin_width=1.0,
        convergence=conv, q_factor=1e4,
        noise_floor=5 * noise_rms, noise_rms=noise_rms, seed=seed,
    )
