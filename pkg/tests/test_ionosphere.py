import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsepair.exceptions import DomainError, MarginError
from pulsepair.ionosphere import (IonoParams, assert_faraday_margin, faraday_pair_phase_diff,
                                  faraday_phase, iono_delay, refraction_phase_bound, summary,
                                  tec_rate_phase_drift)

P = IonoParams()


def test_worked_examples():
    assert faraday_phase(P, 1.425) == pytest.approx(0.5811, rel=1e-3)
    assert faraday_pair_phase_diff(P, 1.0, 1.425) == pytest.approx(-8.156e-4, rel=1e-3)
    assert iono_delay(P, 1.425) == pytest.approx(0.0662, rel=1e-3)
    assert tec_rate_phase_drift(P, 0.27, 1.425) == pytest.approx(1.098e-3, rel=1e-3)
    assert refraction_phase_bound(P, 1.425, 33.0) == pytest.approx(8.91e-4, rel=1e-3)


def test_zero_content():
    p = IonoParams(tec=0.0, tec_rate=0.0, refraction_100mhz=0.0)
    assert faraday_phase(p, 1.4) == 0
    assert faraday_pair_phase_diff(p, 1.0, 1.4) == 0
    assert iono_delay(p, 1.4) == 0
    assert tec_rate_phase_drift(p, 0.27, 1.4) == 0
    assert refraction_phase_bound(p, 1.4, 33) == 0
    assert all(v == 0 for _, v, _ in summary(p))


def test_scaling_laws():
    assert faraday_phase(P, 2.85) == pytest.approx(faraday_phase(P, 1.425) / 4)
    assert refraction_phase_bound(P, 0.7125, 33) == pytest.approx(4 * refraction_phase_bound(P, 1.425, 33))
    assert iono_delay(IonoParams(tec=2e18), 1.425) == pytest.approx(0.1325, rel=1e-3)
    assert tec_rate_phase_drift(P, 0.54, 1.4) == pytest.approx(2 * tec_rate_phase_drift(P, 0.27, 1.4))
    assert faraday_pair_phase_diff(P, 0.0, 1.4) == 0


@given(st.floats(1e-6, 1e-3), st.floats(1e15, 1e19), st.floats(0.5, 3.0))
def test_pair_diff_is_derivative(b, tec, f0):
    p = IonoParams(b_field=b, tec=tec)
    eps = 1e-6
    fd = (faraday_phase(p, f0 + eps) - faraday_phase(p, f0 - eps)) / (2 * eps) * 1e-3
    assert faraday_pair_phase_diff(p, 1.0, f0) == pytest.approx(fd, rel=1e-3)


@given(st.floats(0.1, 10.0))
def test_homogeneous_in_b_times_n(k):
    q = IonoParams(b_field=P.b_field * k, tec=P.tec)
    assert faraday_phase(q, 1.4) == pytest.approx(k * faraday_phase(P, 1.4), rel=1e-12)
    assert faraday_pair_phase_diff(q, 1.0, 1.4) == pytest.approx(
        k * faraday_pair_phase_diff(P, 1.0, 1.4), rel=1e-12)


@pytest.mark.parametrize("f0", [0.0, -1.0, float("nan")])
def test_bad_frequency(f0):
    for fn in (lambda: faraday_phase(P, f0), lambda: iono_delay(P, f0),
               lambda: faraday_pair_phase_diff(P, 1.0, f0)):
        with pytest.raises(DomainError):
            fn()


def test_negative_parameters_rejected():
    with pytest.raises(DomainError):
        IonoParams(tec=-1.0)


def test_margin_check():
    worst = assert_faraday_margin(P, 540e3, 0.18)
    assert worst < 0.18 / 10
    with pytest.raises(MarginError):
        assert_faraday_margin(IonoParams(tec=1e22), 540e3, 0.18)


def test_summary_labels():
    labels = [row[0] for row in summary(P)]
    assert labels == ["faraday_phase", "faraday_pair_phase_diff", "iono_delay",
                      "tec_rate_phase_drift", "refraction_phase_bound"]
    assert summary(P)[2][1] == iono_delay(P, 1.425)
