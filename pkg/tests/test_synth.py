import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from modesplit.beam import BeamSpec
from modesplit.errors import EmptyBand, GridMismatch, InputError
from modesplit.scenarios import reference_config
from modesplit.synth import (
    Spectrum,
    SpectrumConfig,
    band_pairs,
    enhancement,
    frequency_grid,
    pair_lines,
    synthesize,
)
from modesplit.thermal import ProjectionGeometry
from modesplit.xsection import EllipseSection


def small_config(**kw):
    beam = BeamSpec(5e-3, EllipseSection.from_major(250e-9, 1.004))
    base = dict(beam=beam, geometry=ProjectionGeometry.degrees(60), f_min=900.0, f_max=1400.0,
                bin_width=0.01, q_factor=2000.0)
    base.update(kw)
    return SpectrumConfig(**base)


def lorentz(f, f0, g, area):
    return area * (g / (2 * math.pi)) / ((f - f0) ** 2 + (g / 2) ** 2)


def test_single_pair_closed_form():
    cfg = small_config()
    pairs = band_pairs(cfg)
    assert len(pairs) == 1
    p = pairs[0]
    f = frequency_grid(cfg)
    s2 = math.sin(math.radians(60)) ** 2
    msq_low = (1e5 / p.f_low) ** 2
    msq_high = msq_low * (p.f_low / p.f_high) ** 2
    expected = (lorentz(f, p.f_low, p.f_low / 2000, msq_low * s2)
                + lorentz(f, p.f_high, p.f_high / 2000, msq_high * (1 - s2)))
    got = synthesize(cfg).psd
    assert np.max(np.abs(got - expected) / expected.max()) < 1e-12


def test_theta_zero_hides_low_mode():
    cfg = small_config(geometry=ProjectionGeometry(0.0))
    low, high = pair_lines(cfg, band_pairs(cfg)[0])
    assert low.area == 0.0 and high.area > 0
    assert synthesize(cfg).metadata["peaks_in_band"] == 1


def test_empty_band():
    with pytest.raises(EmptyBand):
        synthesize(small_config(f_min=1.0, f_max=50.0))


@pytest.mark.parametrize("kw", [dict(f_min=10.0, f_max=5.0), dict(bin_width=0.0), dict(noise_rms=-1.0),
                                dict(q_factor=1.0), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(InputError):
        small_config(**kw)


def test_parseval_check():
    # lines must be resolved by the 1 Hz bins, so start where Q=1e4 widths exceed 2 Hz
    cfg = reference_config(0, noise_rms=0.0, f_max=60e3)
    cfg = SpectrumConfig.from_dict({**cfg.to_dict(), "f_min": 20e3})
    spec = synthesize(cfg)
    total = trapezoid(spec.psd - cfg.noise_floor, spec.frequencies)
    areas = sum(line.area for p in band_pairs(cfg) for line in pair_lines(cfg, p))
    assert total == pytest.approx(areas, rel=0.01)


def test_determinism_bytes(tmp_path):
    cfg = reference_config(11, f_max=40e3)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    synthesize(cfg).write_csv(a)
    synthesize(cfg).write_csv(b)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    synthesize(cfg.with_seed(12)).write_csv(c)
    assert c.read_bytes() != a.read_bytes()


def test_config_json_round_trip_and_digest():
    cfg = reference_config(5)
    doc = cfg.to_dict()
    back = SpectrumConfig.from_dict(doc)
    assert back == cfg
    reordered = dict(reversed(list(doc.items())))
    assert SpectrumConfig.from_dict(reordered).digest() == cfg.digest()
    assert cfg.with_seed(6).digest() != cfg.digest()


def test_config_alternate_section_keys():
    doc = reference_config(1).to_dict()
    doc["beam"]["section"] = {"mean_radius_m": 260e-9, "ellipticity": 1.0014}
    doc["convergence"] = {"amplitude": 2e-3, "decay": 0.32}
    cfg = SpectrumConfig.from_dict(doc)
    assert cfg.convergence.epsilon == pytest.approx(1.0014, rel=1e-12)
    with pytest.raises(InputError):
        SpectrumConfig.from_dict({"beam": {}})


def test_reference_band_counts():
    cfg = reference_config(0, f_max=1.2e6)
    pairs = band_pairs(cfg)
    # order 155 sits at 503 kHz; the 1.2 MHz band reaches order ~240
    assert pairs[-1].order > 155
    assert 150 <= len(pairs) <= 300
    top = [p for p in pairs if p.order == 155][0]
    assert top.f_low == pytest.approx(503e3, rel=1e-9)


def test_spectrum_validation():
    with pytest.raises(InputError):
        Spectrum(np.array([0.0, 1.0, 3.0]), np.ones(3))
    with pytest.raises(InputError):
        Spectrum(np.arange(3.0), np.array([1.0, -1.0, 1.0]))


def test_spectrum_csv_round_trip(tmp_path):
    spec = synthesize(small_config(noise_rms=1e-3, noise_floor=1e-2, seed=3))
    path = tmp_path / "s.csv"
    spec.write_csv(path)
    back = Spectrum.read_csv(path)
    assert np.allclose(back.frequencies, spec.frequencies, atol=1e-6)
    assert np.allclose(back.psd, spec.psd, rtol=1e-11)
    headerless = tmp_path / "h.csv"
    headerless.write_text("\n".join(path.read_text().splitlines()[1:]) + "\n")
    assert len(Spectrum.read_csv(headerless).psd) == len(spec.psd)


def test_enhancement_identities():
    spec = synthesize(small_config(noise_floor=1.0))
    ones = enhancement(spec, spec)
    assert np.allclose(ones.psd, 1.0)
    flat = Spectrum(spec.frequencies, np.full_like(spec.psd, 4.0))
    assert np.allclose(enhancement(spec, flat).psd, spec.psd / 4.0)


def test_enhancement_peak_height():
    # theta = 0 leaves a single line, so the peak is exactly 1 + S0/floor
    cfg = small_config(noise_floor=2.0, geometry=ProjectionGeometry(0.0))
    spec = synthesize(cfg)
    background = Spectrum(spec.frequencies, np.full_like(spec.psd, cfg.noise_floor))
    _, high = pair_lines(cfg, band_pairs(cfg)[0])
    i = np.argmin(np.abs(spec.frequencies - high.f0))
    got = enhancement(spec, background).psd[i]
    assert got == pytest.approx(1 + high(spec.frequencies[i]) / cfg.noise_floor, rel=1e-12)
    assert got == pytest.approx(1 + high.height / cfg.noise_floor, rel=1e-3)


def test_enhancement_flags_and_grid():
    spec = synthesize(small_config(noise_floor=1.0))
    bg = Spectrum(spec.frequencies, np.where(np.arange(spec.psd.size) % 2 == 0, 0.0, 1.0))
    out = enhancement(spec, bg)
    assert out.flags.sum() == (spec.psd.size + 1) // 2
    assert np.all(out.psd[out.flags] == 0)
    with pytest.raises(GridMismatch):
        enhancement(spec, Spectrum(spec.frequencies[:-1], spec.psd[:-1]))


def test_flicker_term():
    a = synthesize(small_config())
    b = synthesize(small_config(flicker=5.0))
    assert np.allclose(b.psd - a.psd, 5.0 / a.frequencies)


def test_constant_linewidth_option():
    cfg = small_config(linewidth_hz=0.05)
    assert all(line.gamma == 0.05 for line in pair_lines(cfg, band_pairs(cfg)[0]))


def test_absolute_units_with_temperature():
    cfg = small_config(temperature=295.0)
    low, high = pair_lines(cfg, band_pairs(cfg)[0])
    assert 1e-18 < low.area < 1e-12  # sub-nanometer to micrometer rms for a 250 nm fiber


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_noise_clipped_nonnegative(seed):
    spec = synthesize(small_config(noise_rms=1.0, seed=seed))
    assert np.all(spec.psd >= 0)
