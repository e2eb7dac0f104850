"""Sidereal time and two-element fringe geometry.

Sign convention: a source east of the meridian (``ra > lst``) has a positive
hour-angle offset ``alpha`` and therefore a positive geometric phase.  As the
Earth turns, ``lst`` grows and the East-minus-West phase of a fixed source
decreases at ``2*pi`` per fringe period.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, OutOfBeamError, RangeError
from .validation import check_finite, check_positive

TWO_PI = 2.0 * math.pi

#: Mean solar days per sidereal day.
SIDEREAL_DAY = 0.9972695663

# 1990-01-01 and 2101-01-01 (exclusive); the mean sidereal polynomial is
# almanac-grade over this span.
MJD_MIN = 47892.0
MJD_MAX = 88069.0

_MJD_J2000 = 51544.5


@dataclass(frozen=True)
class ObservatoryConfig:
    """Site and interferometer description.

    Angles are in degrees, ``reference_freq`` in MHz and
    ``instrumental_delay`` (signed) in nanoseconds.  ``baseline_wavelengths``
    is the East-West element spacing in wavelengths at ``reference_freq``.
    """

    longitude_east: float
    latitude: float
    baseline_wavelengths: float = 33.0
    reference_freq: float = 1425.0
    pointing_dec: float = -4.3
    pointing_az: float = 180.0
    element_fwhm: float = 5.3
    instrumental_delay: float = -82.0

    def __post_init__(self):
        check_finite([self.longitude_east, self.latitude, self.pointing_dec,
                      self.pointing_az, self.instrumental_delay], "observatory angles")
        check_positive(self.baseline_wavelengths, "baseline_wavelengths")
        check_positive(self.reference_freq, "reference_freq")
        if not 0.0 < self.element_fwhm < 90.0:
            raise DomainError(f"element_fwhm must lie in (0, 90) deg, got {self.element_fwhm}")
        if not -90.0 <= self.latitude <= 90.0:
            raise DomainError(f"latitude out of range: {self.latitude}")
        if abs(self.pointing_dec) >= 90.0:
            raise DomainError("pointing_dec must satisfy |dec| < 90")
        if self.pointing_az != 180.0:
            warnings.warn(
                f"pointing_az={self.pointing_az} differs from the south-facing 180.0 "
                "deg the fringe model assumes", stacklevel=3)

    @property
    def instrumental_delay_s(self) -> float:
        return self.instrumental_delay * 1e-9


@dataclass(frozen=True)
class SkyDirection:
    ra: float
    dec: float

    def __post_init__(self):
        check_finite([self.ra, self.dec], "sky direction")
        if not -90.0 <= self.dec <= 90.0:
            raise DomainError(f"dec must lie in [-90, 90], got {self.dec}")
        object.__setattr__(self, "ra", float(self.ra) % 24.0)


def wrap_phase(x):
    """Wrap radians into the half-open interval (-pi, pi]."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("phase must be finite")
    out = arr - TWO_PI * np.round(arr / TWO_PI)
    out = np.where(out <= -math.pi, out + TWO_PI, out)
    out = np.where(out > math.pi, out - TWO_PI, out)
    return float(out) if out.ndim == 0 else out


def mjd_to_lst(mjd, longitude_east: float):
    """Local mean sidereal time in hours for an MJD on the UT1 scale.

    Uses the IAU 1982 mean sidereal time polynomial.  The integer and
    fractional day parts are kept apart so the result stays accurate to
    well under a millisecond across the whole validity window.
    """
    arr = np.asarray(mjd, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < MJD_MIN) or np.any(arr >= MJD_MAX):
        raise RangeError(f"mjd outside the supported 1990-2100 window [{MJD_MIN}, {MJD_MAX})")
    d = arr - _MJD_J2000
    t = d / 36525.0
    whole = np.floor(d)
    frac = d - whole
    deg = (280.46061837
           + 360.0 * frac
           + 0.98564736629 * d
           + t * t * (0.000387933 - t / 38710000.0)
           + float(longitude_east))
    lst = np.mod(deg, 360.0) / 15.0
    lst = np.where(lst >= 24.0, 0.0, lst)
    return float(lst) if lst.ndim == 0 else lst


def fringe_period(baseline_wavelengths: float, dec: float) -> float:
    """Hours of LST for the fringe phase of a transiting source to advance 2*pi."""
    check_positive(baseline_wavelengths, "baseline_wavelengths")
    if not math.isfinite(dec) or abs(dec) >= 90.0:
        raise DomainError("fringe period is singular at |dec| >= 90 deg")
    return 12.0 / (math.pi * baseline_wavelengths * math.cos(math.radians(dec)))


def hour_offset(ra, lst):
    """``ra - lst`` wrapped into [-12, 12) hours."""
    return np.mod(np.asarray(ra, dtype=float) - np.asarray(lst, dtype=float) + 12.0, 24.0) - 12.0


def beam_offset(source: SkyDirection, lst, obs: ObservatoryConfig):
    """Signed East-West offset angle (deg) of ``source`` from the beam centre.

    Positive when the source is east of the meridian.
    """
    return hour_offset(source.ra, lst) * 15.0 * math.cos(math.radians(source.dec))


def angular_offset(source: SkyDirection, lst, obs: ObservatoryConfig):
    """Total angular distance (deg) between ``source`` and the pointing centre."""
    ew = beam_offset(source, lst, obs)
    return np.hypot(ew, source.dec - obs.pointing_dec)


def instrumental_phase(rf_freq, obs: ObservatoryConfig):
    """Wrapped phase of the instrumental delay at ``rf_freq`` MHz."""
    cycles = np.asarray(rf_freq, dtype=float) * obs.instrumental_delay * 1e-3
    return wrap_phase(TWO_PI * np.mod(cycles, 1.0))


def expected_ew_phase(source: SkyDirection, lst, obs: ObservatoryConfig, rf_freq):
    """Predicted East-minus-West phase (rad) of ``source`` at ``rf_freq`` MHz.

    ``lst`` and ``rf_freq`` broadcast.  Raises :class:`OutOfBeamError` when
    the source is more than three element FWHM from boresight at any of the
    requested times.
    """
    alpha_deg = beam_offset(source, lst, obs)
    if np.any(np.abs(alpha_deg) > 3.0 * obs.element_fwhm):
        raise OutOfBeamError(
            f"source RA {source.ra:.5f} h is beyond 3 x FWHM of boresight")
    rf = np.asarray(rf_freq, dtype=float)
    b_lambda = obs.baseline_wavelengths * rf / obs.reference_freq
    geometric = TWO_PI * b_lambda * np.sin(np.radians(alpha_deg))
    return wrap_phase(geometric + instrumental_phase(rf, obs))


def geometric_delay(source: SkyDirection, lst, obs: ObservatoryConfig):
    """East-minus-West geometric delay in seconds (excluding the instrument)."""
    alpha = np.radians(beam_offset(source, lst, obs))
    return obs.baseline_wavelengths * np.sin(alpha) / (obs.reference_freq * 1e6)


def ra_bin(lst, n_bins: int):
    """Index of the RA bin holding ``lst``; bins are left-closed.

    A relative guard of 1e-9 bin keeps nominal decimal boundaries (e.g.
    0.0075 h for 3200 bins) in the bin they open.
    """
    if int(n_bins) < 1:
        raise DomainError("n_bins must be >= 1")
    n_bins = int(n_bins)
    x = np.mod(np.asarray(lst, dtype=float), 24.0) * n_bins / 24.0
    idx = np.floor(x + 1e-9).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    return int(idx) if idx.ndim == 0 else idx


def ra_bin_width(n_bins: int) -> float:
    return 24.0 / int(n_bins)


def sidereal_traversal_seconds(width_hours: float, *, solar: bool = False) -> float:
    """Seconds for a fixed sky point to drift across ``width_hours`` of RA.

    Sidereal seconds by default; ``solar=True`` converts to clock seconds.
    """
    seconds = width_hours * 3600.0
    return seconds * SIDEREAL_DAY if solar else seconds


def beam_gain(offset, fwhm: float):
    """Gaussian power pattern, 1 at boresight and 0.5 at half the FWHM."""
    check_positive(fwhm, "fwhm")
    g = np.exp(-4.0 * math.log(2.0) * (np.asarray(offset, dtype=float) / fwhm) ** 2)
    return float(g) if g.ndim == 0 else g
