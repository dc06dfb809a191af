import math

import pytest
from hypothesis import given, strategies as st

from modesplit.errors import InputError
from modesplit.xsection import (
    Axis,
    EllipseSection,
    Material,
    area,
    axis_difference,
    axis_difference_from,
    diameter_difference,
    difference_uncertainty,
    ellipticity,
    moment_for_displacement_along,
)

radii = st.floats(min_value=1e-8, max_value=1e-5)


def test_area_circle():
    assert area(EllipseSection.circle(250e-9)) == pytest.approx(math.pi * 250e-9**2, rel=1e-15)
    assert area(EllipseSection.circle(250e-9)) == pytest.approx(1.9635e-13, rel=1e-4)


def test_area_ellipse():
    assert area(EllipseSection(250e-9, 248.5e-9)) == pytest.approx(1.9517e-13, rel=1e-4)


@pytest.mark.parametrize("r1,r2", [(0, 0), (-1e-7, 1e-7), (1e-7, 0)])
def test_degenerate_sections_rejected(r1, r2):
    with pytest.raises(InputError):
        EllipseSection(r1, r2)


def test_constructor_orders_axes():
    s = EllipseSection(1e-7, 2e-7)
    assert (s.r1, s.r2) == (2e-7, 1e-7)


def test_circle_moment():
    s = EllipseSection.circle(250e-9)
    for axis in Axis:
        assert moment_for_displacement_along(s, axis) == pytest.approx(3.0680e-27, rel=1e-4)


def test_moment_convention_higher_along_major():
    s = EllipseSection(2e-7, 1e-7)
    assert moment_for_displacement_along(s, Axis.HIGH) == pytest.approx(math.pi * 2e-7**3 * 1e-7 / 4)
    assert moment_for_displacement_along(s, Axis.LOW) == pytest.approx(math.pi * 2e-7 * 1e-7**3 / 4)


def test_reference_ellipticity_and_differences():
    s = EllipseSection(250e-9, 248.5e-9)
    assert ellipticity(s) == pytest.approx(1.006036, abs=5e-7)
    assert axis_difference(s) == pytest.approx(1.5e-9)
    assert diameter_difference(s) == pytest.approx(3.0e-9)


def test_differences_from_mean_radius():
    # first-order oracle r1 - r2 ~ r * (eps - 1)
    s = EllipseSection.from_mean_radius(260e-9, 1.0014)
    assert axis_difference(s) == pytest.approx(0.364e-9, rel=2e-3)
    assert diameter_difference(s) == pytest.approx(0.728e-9, rel=2e-3)
    assert axis_difference_from(260e-9, 1.0014) == pytest.approx(axis_difference(s), rel=1e-12)


def test_diameter_uncertainty_bookkeeping():
    _, sigma_d = difference_uncertainty(260e-9, 1.0014, 3e-4)
    assert sigma_d == pytest.approx(0.156e-9, abs=5e-13)


def test_material_validation():
    with pytest.raises(InputError):
        Material(-1.0, 2320.0)


@given(radii, radii)
def test_moment_ratio_is_eps_squared(a, b):
    s = EllipseSection(a, b)
    ratio = moment_for_displacement_along(s, Axis.HIGH) / moment_for_displacement_along(s, Axis.LOW)
    assert ratio == pytest.approx(ellipticity(s) ** 2, rel=1e-13)


@given(radii, st.floats(min_value=1.0, max_value=1.5))
def test_mean_radius_round_trip(r, eps):
    s = EllipseSection.from_mean_radius(r, eps)
    assert ellipticity(s) == pytest.approx(eps, rel=1e-12)
    assert s.mean_radius == pytest.approx(r, rel=1e-12)


@given(radii, radii, st.floats(min_value=1.0001, max_value=2.0))
def test_moments_monotone_in_each_axis(a, b, grow):
    s = EllipseSection(a, b)
    for axis in Axis:
        base = moment_for_displacement_along(s, axis)
        assert moment_for_displacement_along(EllipseSection(s.r1 * grow, s.r2), axis) > base
        assert moment_for_displacement_along(EllipseSection(s.r1, s.r2 * grow), axis) > base
