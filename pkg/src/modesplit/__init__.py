"""Nondegenerate flexural modes of elliptical nanowaveguides.

Forward model (beam eigenfrequencies, mode-pair splitting, thermal spectra)
and the inverse pipeline that recovers cross-section ellipticity and probe
angle from a vibration power spectrum.
"""

__version__ = "0.1.0"

from modesplit.xsection import EllipseSection, Material, SILICA
from modesplit.beam import BeamSpec, Mode
from modesplit.splitting import ConvergenceModel, ModePair
from modesplit.thermal import ProjectionGeometry, ThermalEnv
from modesplit.synth import Spectrum, SpectrumConfig, synthesize
from modesplit.analyze import AnalyzeOptions, EllipticityReport, analyze

__all__ = [
    "AnalyzeOptions",
    "BeamSpec",
    "ConvergenceModel",
    "EllipseSection",
    "EllipticityReport",
    "Material",
    "Mode",
    "ModePair",
    "ProjectionGeometry",
    "SILICA",
    "Spectrum",
    "SpectrumConfig",
    "ThermalEnv",
    "analyze",
    "synthesize",
]
