"""Ionospheric propagation diagnostics at L-band.

Each quantity is reported as a bound to be checked against the pipeline's
phase windows, not applied to the data.  Units follow the classic
engineering forms: ``f0`` in GHz, pulse spacing in MHz, delays in
microseconds, magnetic field in tesla and electron content in electrons
per square metre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import DomainError, MarginError
from .validation import check_positive

FARADAY_COEFF = 2.36e-14
FARADAY_SLOPE_COEFF = -4.72e-17
DELAY_COEFF = 1.345e-19


@dataclass(frozen=True)
class IonoParams:
    """Ionosphere state; defaults are a deliberately pessimistic mid-latitude case."""

    b_field: float = 50e-6
    tec: float = 1e18
    tec_rate: float = 0.7e16
    refraction_100mhz: float = 0.05

    def __post_init__(self):
        for name in ("b_field", "tec", "refraction_100mhz"):
            check_positive(getattr(self, name), name, strict=False)
        if not math.isfinite(self.tec_rate):
            raise DomainError("tec_rate must be finite")


def _check_f0(f0: float) -> float:
    if not math.isfinite(f0) or f0 <= 0:
        raise DomainError(f"f0 must be a positive frequency in GHz, got {f0!r}")
    return float(f0)


def faraday_phase(p: IonoParams, f0: float) -> float:
    """Faraday-rotation phase (rad) of a circularly polarised wave at ``f0`` GHz."""
    f0 = _check_f0(f0)
    return FARADAY_COEFF * p.b_field * p.tec / f0**2


def faraday_pair_phase_diff(p: IonoParams, df: float, f0: float) -> float:
    """Faraday phase difference (rad) between pulses ``df`` MHz apart near ``f0`` GHz."""
    f0 = _check_f0(f0)
    return FARADAY_SLOPE_COEFF * p.b_field * p.tec * df / f0**3


def iono_delay(p: IonoParams, f0: float) -> float:
    """Group delay in microseconds."""
    f0 = _check_f0(f0)
    return DELAY_COEFF * p.tec / f0**2


def tec_rate_phase_drift(p: IonoParams, t_int: float, f0: float) -> float:
    """Faraday phase accumulated by the TEC change over one integration of ``t_int`` s."""
    check_positive(t_int, "t_int")
    f0 = _check_f0(f0)
    return FARADAY_COEFF * p.b_field * (p.tec_rate * t_int) / f0**2


def refraction_phase_bound(p: IonoParams, f0: float, baseline_wavelengths: float) -> float:
    """Inter-element phase (rad) from differential refraction across the baseline.

    Refraction scales as 1/f^2 from its value at 100 MHz.
    """
    f0 = _check_f0(f0)
    theta = math.radians(p.refraction_100mhz * (0.1 / f0) ** 2)
    return 2.0 * math.pi * baseline_wavelengths * theta


def summary(p: IonoParams, f0: float = 1.425, df: float = 1.0, t_int: float = 0.27,
            baseline_wavelengths: float = 33.0) -> list[tuple[str, float, str]]:
    """The five diagnostics as ``(label, value, unit)`` rows."""
    return [
        ("faraday_phase", faraday_phase(p, f0), "rad"),
        ("faraday_pair_phase_diff", faraday_pair_phase_diff(p, df, f0), f"rad per {df:g} MHz"),
        ("iono_delay", iono_delay(p, f0), "us"),
        ("tec_rate_phase_drift", tec_rate_phase_drift(p, t_int, f0), "rad"),
        ("refraction_phase_bound", refraction_phase_bound(p, f0, baseline_wavelengths), "rad"),
    ]


def assert_faraday_margin(p: IonoParams, df_max_hz: float, window_rad: float,
                          f0_min_ghz: float = 1.398) -> float:
    """Check the worst-case pair Faraday difference sits well inside ``window_rad``.

    Returns the worst-case magnitude.  Raises :class:`MarginError` when it is
    not at least ten times smaller than the window.
    """
    worst = abs(faraday_pair_phase_diff(p, df_max_hz / 1e6, f0_min_ghz))
    if window_rad > 0 and worst * 10.0 > window_rad:
        raise MarginError(
            f"Faraday pair phase {worst:.3g} rad is not negligible against the "
            f"+/-{window_rad:g} rad pair phase window")
    return worst
