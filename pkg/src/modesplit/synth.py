"""Synthetic vibration spectra with known ground truth."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from modesplit.beam import BeamSpec, eigenfrequency_exact, modal_mass, mode_shape
from modesplit.errors import EmptyBand, GridMismatch, InputError
from modesplit.splitting import ConvergenceModel, ModePair, predict_pairs
from modesplit.thermal import (
    PeakModel,
    ProjectionGeometry,
    ThermalEnv,
    amplitude_ratio,
    project,
    thermal_msq,
)
from modesplit.xsection import Axis, EllipseSection, Material


@dataclass(frozen=True)
class SpectrumConfig:
    """Everything needed to reproduce one synthetic spectrum.

    Line widths come from ``linewidth_hz`` when set, otherwise from
    f0 / ``q_factor``. Without a ``temperature`` the spectrum is in relative
    units: the low-frequency mode of each pair carries mean-square deflection
    ``msq_reference * (f_reference / f_low)^2``.
    """

    beam: BeamSpec
    geometry: ProjectionGeometry
    f_min: float
    f_max: float
    bin_width: float
    convergence: ConvergenceModel | None = None
    q_factor: float = 1e4
    linewidth_hz: float | None = None
    noise_floor: float = 0.0
    noise_rms: float = 0.0
    flicker: float = 0.0  # coefficient of an optional flicker/f background
    msq_reference: float = 1.0
    f_reference: float = 1e5
    temperature: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.f_min < self.f_max):
            raise InputError("need 0 <= f_min < f_max")
        if not self.bin_width > 0:
            raise InputError("bin_width must be positive")
        if min(self.noise_floor, self.noise_rms, self.flicker) < 0:
            raise InputError("noise terms must be non-negative")
        if self.linewidth_hz is None and not self.q_factor > 1:
            raise InputError("q_factor must exceed 1")
        if self.linewidth_hz is not None and not self.linewidth_hz > 0:
            raise InputError("linewidth_hz must be positive")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")
        if not self.beam.uniform:
            raise InputError("synthesis needs a uniform beam")

    def with_seed(self, seed: int) -> SpectrumConfig:
        return _replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return config_to_dict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> SpectrumConfig:
        return config_from_dict(doc)

    def digest(self) -> str:
        return config_digest(self.to_dict())


def _replace(cfg, **changes):
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    values.update(changes)
    return type(cfg)(**values)


# -- JSON mirror of the config ----------------------------------------------


def beam_to_dict(beam: BeamSpec) -> dict[str, Any]:
    s = beam.section
    return {
        "length_m": beam.length,
        "section": {"r1_m": s.r1, "r2_m": s.r2},
        "material": {"young_modulus_pa": beam.material.young_modulus,
                     "density_kg_m3": beam.material.density},
        "tension_n": beam.tension,
    }


def section_from_dict(doc: dict[str, Any]) -> EllipseSection:
    if "r1_m" in doc:
        return EllipseSection(float(doc["r1_m"]), float(doc.get("r2_m", doc["r1_m"])))
    if "mean_radius_m" in doc:
        return EllipseSection.from_mean_radius(float(doc["mean_radius_m"]), float(doc.get("ellipticity", 1.0)))
    if "major_m" in doc:
        return EllipseSection.from_major(float(doc["major_m"]), float(doc.get("ellipticity", 1.0)))
    raise InputError(f"cannot build a section from keys {sorted(doc)}")


def beam_from_dict(doc: dict[str, Any]) -> BeamSpec:
    mat = doc.get("material") or {}
    material = Material(float(mat.get("young_modulus_pa", 73e9)), float(mat.get("density_kg_m3", 2320.0)))
    return BeamSpec(float(doc["length_m"]), section_from_dict(doc["section"]), material,
                    float(doc.get("tension_n", 0.0)))


def convergence_to_dict(model: ConvergenceModel | None):
    if model is None:
        return None
    return {"epsilon": model.epsilon, "amplitude": model.amplitude, "decay": model.decay}


def convergence_from_dict(doc) -> ConvergenceModel | None:
    if doc is None:
        return None
    return ConvergenceModel(float(doc["epsilon"]), float(doc.get("amplitude", 0.0)), float(doc.get("decay", 1.0)))


_SCALARS = ("f_min", "f_max", "bin_width", "q_factor", "linewidth_hz", "noise_floor", "noise_rms",
            "flicker", "msq_reference", "f_reference", "temperature", "seed")


def config_to_dict(cfg: SpectrumConfig) -> dict[str, Any]:
    doc = {
        "beam": beam_to_dict(cfg.beam),
        "convergence": convergence_to_dict(cfg.convergence),
        "geometry": {"theta_deg": math.degrees(cfg.geometry.theta)},
    }
    for name in _SCALARS:
        doc[name] = getattr(cfg, name)
    return doc


def config_from_dict(doc: dict[str, Any]) -> SpectrumConfig:
    try:
        beam = beam_from_dict(doc["beam"])
        geom = doc.get("geometry", {"theta_deg": 45.0})
        theta = math.radians(float(geom["theta_deg"])) if "theta_deg" in geom else float(geom["theta_rad"])
        kwargs = {k: doc[k] for k in _SCALARS if k in doc and doc[k] is not None}
        for k in kwargs:
            kwargs[k] = int(kwargs[k]) if k == "seed" else float(kwargs[k])
        conv = doc.get("convergence")
        if conv is not None and "epsilon" not in conv:
            conv = {**conv, "epsilon": beam.section.r1 / beam.section.r2}
        return SpectrumConfig(beam=beam, geometry=ProjectionGeometry(min(theta, math.pi / 2)),
                              convergence=convergence_from_dict(conv), **kwargs)
    except (KeyError, TypeError) as exc:
        raise InputError(f"invalid spectrum config: {exc!r}") from exc


def config_digest(doc: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form; independent of key order."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# -- spectra ----------------------------------------------------------------


@dataclass
class Spectrum:
    frequencies: np.ndarray
    psd: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    flags: np.ndarray | None = None  # True where a bin is unusable

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.frequencies.shape != self.psd.shape or self.frequencies.ndim != 1:
            raise InputError("frequencies and psd must be 1-D arrays of equal length")
        if len(self.frequencies) < 2:
            raise InputError("spectrum needs at least two bins")
        step = np.diff(self.frequencies)
        if np.any(step <= 0):
            raise InputError("frequency grid must be increasing")
        if np.ptp(step) > 1e-6 * step.mean() + 1e-9:
            raise InputError("frequency grid must be uniform")
        if np.any(self.psd < 0):
            raise InputError("psd must be non-negative")

    @property
    def bin_width(self) -> float:
        return float((self.frequencies[-1] - self.frequencies[0]) / (len(self.frequencies) - 1))

    def window(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        i, j = np.searchsorted(self.frequencies, [lo, hi])
        return self.frequencies[i:j], self.psd[i:j]

    def to_csv_text(self) -> str:
        lines = ["frequency_hz,psd"]
        lines += [f"{f:.6f},{p:.12e}" for f, p in zip(self.frequencies.tolist(), self.psd.tolist())]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())

    @classmethod
    def read_csv(cls, path: str | Path) -> Spectrum:
        """Read ``frequency_hz,psd`` with or without the header row."""
        with open(path) as fh:
            first = fh.readline()
        try:
            float(first.split(",")[0])
            skip = 0
        except ValueError:
            skip = 1
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
        if data.shape[1] != 2:
            raise InputError(f"{path}: expected two columns")
        return cls(data[:, 0], data[:, 1], {"source": str(path)})


def frequency_grid(cfg: SpectrumConfig) -> np.ndarray:
    n = int(math.floor((cfg.f_max - cfg.f_min) / cfg.bin_width + 1e-9)) + 1
    return cfg.f_min + cfg.bin_width * np.arange(n)


def orders_in_band(beam: BeamSpec, f_min: float, f_max: float) -> list[int]:
    """Orders whose lower-stiffness frequency lies in [f_min, f_max]."""
    out = []
    n = 1
    while True:
        f = eigenfrequency_exact(beam, Axis.LOW, n)
        if f > f_max:
            return out
        if f >= f_min:
            out.append(n)
        n += 1


def _linewidth(cfg: SpectrumConfig, f0: float) -> float:
    return cfg.linewidth_hz if cfg.linewidth_hz is not None else f0 / cfg.q_factor


def band_pairs(cfg: SpectrumConfig) -> list[ModePair]:
    pairs = predict_pairs(cfg.beam, orders_in_band(cfg.beam, cfg.f_min, cfg.f_max), cfg.convergence)
    return [p for p in pairs if p.f_high <= cfg.f_max]


def pair_lines(cfg: SpectrumConfig, pair: ModePair) -> tuple[PeakModel, PeakModel]:
    """Projected (low, high) Lorentzians of one pair."""
    if cfg.temperature is None:
        msq_low = cfg.msq_reference * (cfg.f_reference / pair.f_low) ** 2
    else:
        shape = mode_shape(cfg.beam, pair.order, samples=max(512, 40 * pair.order + 64))
        msq_low = thermal_msq(ThermalEnv(cfg.temperature), pair.f_low, modal_mass(cfg.beam, shape))
    msq_high = msq_low / amplitude_ratio(pair)
    meas_low, meas_high = project(msq_low, msq_high, cfg.geometry)
    return (PeakModel(pair.f_low, _linewidth(cfg, pair.f_low), meas_low),
            PeakModel(pair.f_high, _linewidth(cfg, pair.f_high), meas_high))


def clean_psd(cfg: SpectrumConfig, freqs: np.ndarray, pairs: list[ModePair]) -> np.ndarray:
    psd = np.zeros_like(freqs)
    for pair in pairs:
        for line in pair_lines(cfg, pair):
            if line.area > 0:
                hw2 = (0.5 * line.gamma) ** 2
                psd += line.height * hw2 / ((freqs - line.f0) ** 2 + hw2)
    psd += cfg.noise_floor
    if cfg.flicker > 0:
        psd += cfg.flicker / np.maximum(freqs, cfg.bin_width)
    return psd


def synthesize(cfg: SpectrumConfig) -> Spectrum:
    """Sum of projected Lorentzian pairs plus floor and clipped Gaussian noise.

    Output is bit-identical for identical configs (the seed is part of the
    config).
    """
    pairs = band_pairs(cfg)
    if not pairs:
        raise EmptyBand(f"no mode pair between {cfg.f_min} and {cfg.f_max} Hz")
    freqs = frequency_grid(cfg)
    psd = clean_psd(cfg, freqs, pairs)
    if cfg.noise_rms > 0:
        rng = np.random.default_rng(cfg.seed)
        psd = np.clip(psd + cfg.noise_rms * rng.standard_normal(len(freqs)), 0.0, None)
    visible = sum(1 for p in pairs for line in pair_lines(cfg, p) if line.area > 0)
    meta = {
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "pairs_in_band": len(pairs),
        "peaks_in_band": visible,
        "orders": [pairs[0].order, pairs[-1].order],
    }
    return Spectrum(freqs, psd, meta)


def enhancement(spectrum: Spectrum, background: Spectrum, floor: float = 0.0) -> Spectrum:
    """Bin-wise ratio spectrum / background.

    Bins whose background is at or below ``floor`` are flagged and set to 0
    instead of being divided.
    """
    if spectrum.frequencies.shape != background.frequencies.shape or not np.allclose(
        spectrum.frequencies, background.frequencies, rtol=1e-12, atol=0.0
    ):
        raise GridMismatch("spectrum and background grids differ")
    bad = background.psd <= floor
    ratio = np.zeros_like(spectrum.psd)
    np.divide(spectrum.psd, background.psd, out=ratio, where=~bad)
    meta = {"kind": "enhancement", "flagged_bins": int(bad.sum())}
    return Spectrum(spectrum.frequencies.copy(), ratio, meta, flags=bad)
