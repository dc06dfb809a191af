import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modesplit.beam import (
    BeamSpec,
    TabulatedProfile,
    clamped_root,
    clamped_shape,
    eigenfrequency_asymptotic,
    eigenfrequency_exact,
    mode_shape,
    numerical_modes,
)
from modesplit.errors import InputError, ResolutionError
from modesplit.xsection import Axis, EllipseSection


def bisect_root(n):
    """Independent oracle: plain bisection of cos(x)cosh(x) - 1 near (n + 1/2) pi."""
    g = lambda x: math.cos(x) * math.cosh(x) - 1.0
    a, b = (n + 0.5) * math.pi - 0.5, (n + 0.5) * math.pi + 0.5
    ga = g(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        gm = g(m)
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


@pytest.mark.parametrize("n,expected", [(1, 4.7300408), (3, 10.9956078), (10, 32.9867229)])
def test_clamped_root_values(n, expected):
    assert clamped_root(n) == pytest.approx(expected, abs=1e-7)


def test_clamped_root_matches_bisection():
    for n in range(1, 11):
        assert abs(clamped_root(n) - bisect_root(n)) < 1e-9


def test_clamped_root_large_orders():
    assert clamped_root(100) == pytest.approx(201 * math.pi / 2, rel=1e-12)
    assert clamped_root(10**7) == (2 * 10**7 + 1) * math.pi / 2
    with pytest.raises(InputError):
        clamped_root(0)


def test_exact_frequency_by_hand(circular_beam):
    # f = x^2 / (2 pi L^2) sqrt(E I / (rho A)), I/A = r^2/4 for a circle
    r, L = 250e-9, 5e-3
    for n, quoted in [(1, 99.87), (10, 4857.2)]:
        x = bisect_root(n)
        f = x**2 / (2 * math.pi * L**2) * math.sqrt(73e9 * r**2 / 4 / 2320)
        assert eigenfrequency_exact(circular_beam, Axis.LOW, n) == pytest.approx(f, rel=1e-12)
        assert f == pytest.approx(quoted, abs=0.01)


def test_asymptotic_formula(circular_beam):
    for n in (1, 10):
        direct = math.sqrt(73e9 / 2320) * (2 * n + 1) ** 2 * math.pi * 250e-9 / (16 * 5e-3**2)
        assert eigenfrequency_asymptotic(circular_beam, n) == pytest.approx(direct, rel=1e-14)
    # the approximation improves with order and is within 1% from n = 5
    ratios = [eigenfrequency_asymptotic(circular_beam, n) / eigenfrequency_exact(circular_beam, Axis.LOW, n)
              for n in range(1, 40)]
    assert all(abs(r - 1) < 0.01 for r in ratios[4:])
    dev = np.abs(np.array(ratios) - 1)
    assert np.all(np.diff(dev) <= 1e-15)


def test_asymptotic_needs_circle(elliptic_beam):
    with pytest.raises(InputError):
        eigenfrequency_asymptotic(elliptic_beam, 3)


def test_axis_ratio_identity(elliptic_beam):
    eps = elliptic_beam.section.r1 / elliptic_beam.section.r2
    for n in (1, 2, 7, 50, 300):
        r = eigenfrequency_exact(elliptic_beam, Axis.HIGH, n) / eigenfrequency_exact(elliptic_beam, Axis.LOW, n)
        assert r == pytest.approx(eps, rel=1e-14)


@given(st.floats(1e-7, 1e-6), st.floats(1e-3, 2e-2), st.floats(1.1, 5.0), st.integers(1, 200))
def test_scaling_laws(r, L, k, n):
    beam = BeamSpec(L, EllipseSection.circle(r))
    f = eigenfrequency_exact(beam, Axis.LOW, n)
    assert eigenfrequency_exact(BeamSpec(L, EllipseSection.circle(k * r)), Axis.LOW, n) == pytest.approx(k * f, rel=1e-12)
    assert eigenfrequency_exact(BeamSpec(k * L, EllipseSection.circle(r)), Axis.LOW, n) == pytest.approx(f / k**2, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4, 9, 40, 400, 2000])
def test_mode_shape_boundaries_and_nodes(circular_beam, n):
    mode = mode_shape(circular_beam, n, samples=max(512, 20 * n))
    w = mode.shape
    assert abs(w[0]) < 1e-12 and abs(w[-1]) < 1e-9
    assert np.max(np.abs(w)) == pytest.approx(1.0)
    slope = clamped_shape(np.array([0.0, 1.0]), clamped_root(n), derivative=True)
    assert np.all(np.abs(slope) < 1e-8 * clamped_root(n))
    interior = w[1:-1]
    crossings = np.count_nonzero(np.diff(np.sign(interior[np.abs(interior) > 1e-9])))
    assert crossings == n - 1
    assert np.all(np.isfinite(w))


def test_first_mode_symmetric(circular_beam):
    w = mode_shape(circular_beam, 1, samples=1001).shape
    assert np.argmax(np.abs(w)) == 500
    assert np.allclose(w, w[::-1], atol=1e-12)


def test_shape_against_textbook_form():
    # direct hyperbolic form is fine at low order
    x = clamped_root(3)
    xi = np.linspace(0, 1, 101)
    sigma = (math.cosh(x) - math.cos(x)) / (math.sinh(x) - math.sin(x))
    w = np.cosh(x * xi) - np.cos(x * xi) - sigma * (np.sinh(x * xi) - np.sin(x * xi))
    got = clamped_shape(xi, x)
    assert np.allclose(got / np.max(np.abs(got)), w / np.max(np.abs(w)), atol=1e-9) or \
        np.allclose(got / np.max(np.abs(got)), -w / np.max(np.abs(w)), atol=1e-9)


def test_numerical_agrees_with_exact(circular_beam):
    modes = numerical_modes(circular_beam, Axis.LOW, 20, grid_points=4000)
    for m in modes:
        exact = eigenfrequency_exact(circular_beam, Axis.LOW, m.order)
        assert abs(m.frequency / exact - 1) < 1e-3
    freqs = [m.frequency for m in modes]
    assert all(b > a for a, b in zip(freqs, freqs[1:]))


def test_numerical_second_order_convergence(circular_beam):
    errs = []
    for grid in (500, 1000, 2000):
        f = numerical_modes(circular_beam, Axis.LOW, 5, grid_points=grid)[4].frequency
        errs.append(abs(f / eigenfrequency_exact(circular_beam, Axis.LOW, 5) - 1))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.3)


def test_numerical_ratio_is_eps(elliptic_beam):
    low = numerical_modes(elliptic_beam, Axis.LOW, 10, 2000)
    high = numerical_modes(elliptic_beam, Axis.HIGH, 10, 2000)
    eps = elliptic_beam.section.r1 / elliptic_beam.section.r2
    for a, b in zip(low, high):
        assert b.frequency / a.frequency == pytest.approx(eps, abs=1e-6)


def test_numerical_shapes_match_analytic(circular_beam):
    m = numerical_modes(circular_beam, Axis.LOW, 3, grid_points=2000)[2]
    ref = clamped_shape(m.z / circular_beam.length, clamped_root(3))
    ref = ref / ref[np.argmax(np.abs(ref))] * np.sign(m.shape[np.argmax(np.abs(ref))])
    assert np.max(np.abs(m.shape - ref)) < 1e-4
    assert abs(m.shape[0]) < 1e-12 and abs(m.shape[-1]) < 1e-12


def test_resolution_guard(circular_beam):
    with pytest.raises(ResolutionError):
        numerical_modes(circular_beam, Axis.LOW, 20, grid_points=100)


def test_tabulated_uniform_profile_matches(circular_beam, tmp_path):
    z = np.linspace(0, 5e-3, 11)
    prof = TabulatedProfile(z, [EllipseSection.circle(250e-9)] * len(z))
    path = tmp_path / "profile.csv"
    prof.write_csv(path)
    beam = BeamSpec(5e-3, TabulatedProfile.read_csv(path))
    a = numerical_modes(beam, Axis.LOW, 5, 1000)
    b = numerical_modes(circular_beam, Axis.LOW, 5, 1000)
    for x, y in zip(a, b):
        assert x.frequency == pytest.approx(y.frequency, rel=1e-12)


def test_tapered_profile_stiffens_center():
    # thicker middle raises every frequency relative to the thinnest uniform beam
    z = np.linspace(0, 5e-3, 51)
    r = 250e-9 * (1 + 0.2 * np.sin(np.pi * z / 5e-3))
    beam = BeamSpec(5e-3, TabulatedProfile(z, [EllipseSection.circle(v) for v in r]))
    thin = BeamSpec(5e-3, EllipseSection.circle(250e-9))
    for m in numerical_modes(beam, Axis.LOW, 4, 1000):
        assert m.frequency > eigenfrequency_exact(thin, Axis.LOW, m.order)


def test_tension_raises_frequencies(circular_beam):
    taut = BeamSpec(circular_beam.length, circular_beam.profile, tension=1e-9)
    f0 = numerical_modes(circular_beam, Axis.LOW, 3, 1000)
    f1 = numerical_modes(taut, Axis.LOW, 3, 1000)
    assert all(b.frequency > a.frequency for a, b in zip(f0, f1))


def test_profile_must_span_length():
    z = np.linspace(0, 4e-3, 5)
    with pytest.raises(InputError):
        BeamSpec(5e-3, TabulatedProfile(z, [EllipseSection.circle(1e-7)] * 5))
