import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsepair.exceptions import DomainError, OutOfBeamError, RangeError
from pulsepair.geometry import (SIDEREAL_DAY, ObservatoryConfig, SkyDirection, angular_offset,
                                beam_gain, expected_ew_phase, fringe_period, geometric_delay,
                                mjd_to_lst, ra_bin, ra_bin_width, sidereal_traversal_seconds,
                                wrap_phase)

# Mean sidereal time from astropy (IAU 1982 model, UT1 = UTC), frozen before
# the implementation existed.  Longitude -79.84 deg.
LST_ORACLE = [
    (60498.622, 4.6764938931028475),
    (51544.5, 13.37470789166667),
    (60636.257, 4.960465625046549),
]
TENTH_SECOND_HR = 0.1 / 3600.0


@pytest.mark.parametrize("mjd,expected", LST_ORACLE)
def test_lst_against_almanac(mjd, expected):
    assert abs(mjd_to_lst(mjd, -79.84) - expected) < TENTH_SECOND_HR


def test_lst_one_sidereal_day_later():
    a = mjd_to_lst(60498.3, 10.0)
    b = mjd_to_lst(60498.3 + SIDEREAL_DAY, 10.0)
    diff = (b - a + 12) % 24 - 12
    assert abs(diff) < TENTH_SECOND_HR


def test_lst_longitude_offset():
    a = mjd_to_lst(60000.1, 0.0)
    b = mjd_to_lst(60000.1, 15.0)
    assert (b - a) % 24 == pytest.approx(1.0, abs=1e-9)


def test_lst_rate():
    step = 1e-3
    mjd = np.array([60498.0, 60498.0 + step])
    d = np.diff(mjd_to_lst(mjd, 0.0))[0]
    rate = d / (step * 24.0)
    assert rate == pytest.approx(24.0 / 23.9345, rel=1e-5)
    assert rate == pytest.approx(1.0 / SIDEREAL_DAY, rel=1e-6)


def test_lst_vectorised_and_range():
    lst = mjd_to_lst(np.linspace(50000, 70000, 101), 33.0)
    assert lst.shape == (101,)
    assert np.all((lst >= 0) & (lst < 24))


@pytest.mark.parametrize("mjd", [40000.0, 90000.0, float("nan")])
def test_lst_out_of_window(mjd):
    with pytest.raises(RangeError):
        mjd_to_lst(mjd, 0.0)


def test_fringe_period_values():
    assert fringe_period(33.0, -4.3) == pytest.approx(0.1161, abs=1e-4)
    assert fringe_period(33.0, 0.0) == pytest.approx(12 / (math.pi * 33), rel=1e-12)
    assert fringe_period(66.0, 0.0) == pytest.approx(fringe_period(33.0, 0.0) / 2)
    with pytest.raises(DomainError):
        fringe_period(33.0, 90.0)


@given(st.floats(1.0, 200.0), st.floats(-85.0, 85.0))
def test_fringe_period_separable(b, dec):
    assert fringe_period(b, dec) * b * math.cos(math.radians(dec)) == pytest.approx(12 / math.pi)


def test_boresight_phase_is_zero(obs_no_delay):
    src = SkyDirection(5.0, -4.3)
    assert expected_ew_phase(src, 5.0, obs_no_delay, 1425.0) == pytest.approx(0.0, abs=1e-12)


def test_sign_convention(obs_no_delay):
    # east of the meridian (ra > lst) gives a positive phase
    src = SkyDirection(5.0, -4.3)
    assert expected_ew_phase(src, 5.0 - 0.01, obs_no_delay, 1425.0) > 0
    assert expected_ew_phase(src, 5.0 + 0.01, obs_no_delay, 1425.0) < 0


def test_phase_slope_at_boresight(obs_no_delay):
    src = SkyDirection(5.25, -4.3)
    h = 1e-5
    slope = (expected_ew_phase(src, 5.25 + h, obs_no_delay, 1425.0)
             - expected_ew_phase(src, 5.25 - h, obs_no_delay, 1425.0)) / (2 * h)
    assert slope == pytest.approx(-2 * math.pi / fringe_period(33.0, -4.3), rel=1e-6)


def test_quarter_fringe_gives_quarter_turn(obs_no_delay):
    src = SkyDirection(5.25, -4.3)
    # sin(alpha) = 1/(4*33) exactly at a quarter turn
    alpha = math.degrees(math.asin(1.0 / (4 * 33.0)))
    lst = 5.25 - alpha / (15.0 * math.cos(math.radians(-4.3)))
    assert expected_ew_phase(src, lst, obs_no_delay, 1425.0) == pytest.approx(math.pi / 2, abs=1e-9)


def test_phase_periodic_in_fringe_period(obs_no_delay):
    # periodicity is exact in sin(alpha); for the linearised fringe period
    # it holds to the small-angle error
    src = SkyDirection(5.25, -4.3)
    p = fringe_period(33.0, -4.3)
    a = expected_ew_phase(src, 5.25, obs_no_delay, 1425.0)
    b = expected_ew_phase(src, 5.25 + p, obs_no_delay, 1425.0)
    assert abs(wrap_phase(a - b)) < 2e-3


def test_instrumental_phase_enters(obs):
    src = SkyDirection(5.0, -4.3)
    got = expected_ew_phase(src, 5.0, obs, 1425.0)
    want = wrap_phase(2 * math.pi * 1425.0 * -82.0 * 1e-3)
    assert got == pytest.approx(want, abs=1e-9)


def test_out_of_beam(obs):
    with pytest.raises(OutOfBeamError):
        expected_ew_phase(SkyDirection(8.0, -4.3), 5.0, obs, 1425.0)


def test_geometric_delay_matches_phase(obs_no_delay):
    src = SkyDirection(5.3, -4.3)
    tau = geometric_delay(src, 5.25, obs_no_delay)
    phase = expected_ew_phase(src, 5.25, obs_no_delay, 1425.0)
    assert wrap_phase(2 * math.pi * 1425e6 * tau) == pytest.approx(phase, abs=1e-9)


def test_ra_bin_basics():
    assert ra_bin_width(3200) == pytest.approx(0.0075, abs=0)
    assert sidereal_traversal_seconds(ra_bin_width(3200)) == pytest.approx(27.0, abs=1e-12)
    assert ra_bin(0.0, 3200) == 0
    assert ra_bin(5.25, 3200) == 700
    assert ra_bin(5.25375, 3200) == 700
    assert ra_bin(23.9999999, 3200) == 3199
    with pytest.raises(DomainError):
        ra_bin(1.0, 0)


@given(st.floats(0.0, 24.0, exclude_max=True), st.integers(1, 5000))
def test_ra_bin_partition(lst, n):
    k = ra_bin(lst, n)
    w = 24.0 / n
    assert 0 <= k < n
    assert k * w - 1e-6 * w <= lst < (k + 1) * w + 1e-6 * w


def test_beam_gain():
    assert beam_gain(0.0, 5.3) == 1.0
    assert beam_gain(2.65, 5.3) == pytest.approx(0.5)
    assert beam_gain(5.3, 5.3) == pytest.approx(0.0625)


def test_angular_offset_includes_dec(obs):
    src = SkyDirection(5.0, -1.3)
    assert angular_offset(src, 5.0, obs) == pytest.approx(3.0)


@given(st.floats(-1e4, 1e4), st.integers(-3, 3))
def test_wrap_periodic(x, k):
    a = wrap_phase(x)
    b = wrap_phase(x + 2 * math.pi * k)
    assert -math.pi < a <= math.pi
    assert abs(wrap_phase(a - b)) < 1e-9


def test_wrap_examples():
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_phase(-math.pi) == math.pi
    assert wrap_phase(math.pi) == math.pi
    with pytest.raises(DomainError):
        wrap_phase(float("inf"))


def test_observatory_validation():
    with pytest.raises(DomainError):
        ObservatoryConfig(0.0, 0.0, baseline_wavelengths=0)
    with pytest.raises(DomainError):
        ObservatoryConfig(0.0, 0.0, element_fwhm=95)
    with pytest.warns(UserWarning):
        ObservatoryConfig(0.0, 0.0, pointing_az=170.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ObservatoryConfig(0.0, 0.0)


def test_sky_direction_wraps():
    assert SkyDirection(25.0, 0.0).ra == pytest.approx(1.0)
    with pytest.raises(DomainError):
        SkyDirection(1.0, 91.0)
