import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from pulsepair.exceptions import DegenerateNoiseError, SchemaError, ShapeError
from pulsepair.firstlevel import (BIN_BANDWIDTH, EVENT_COLUMNS, INTEGRATION_TIME, N_BINS,
                                  IqBlock, PulseDetector, bin_frequency_hz, channelize,
                                  detect_pulses, estimate_segment_noise, locate_frequency,
                                  pooled_noise, read_events, segment_center_hz, write_events)
from pulsepair.simulator import tone


def unit_tone(k, phase=0.0, amp=1.0):
    n = np.arange(N_BINS)
    return amp * np.exp(1j * (2 * np.pi * (k - 128) * n / N_BINS + phase))


def test_constants():
    assert BIN_BANDWIDTH == pytest.approx(3.7265625, abs=0)
    assert INTEGRATION_TIME == pytest.approx(0.26834, abs=1e-5)


def test_tone_lands_in_its_bin():
    spectrum = channelize(unit_tone(40, 0.3))
    p = np.abs(spectrum) ** 2
    assert p[40] / p.sum() > 0.999
    assert np.angle(spectrum[40]) == pytest.approx(0.3, abs=1e-6)


def test_zero_input():
    assert np.all(channelize(np.zeros(N_BINS, complex)) == 0)


def test_shape_error():
    with pytest.raises(ShapeError):
        channelize(np.zeros(100, complex))


@given(st.floats(1e-3, 1e3))
def test_phase_independent_of_amplitude(amp):
    spectrum = channelize(unit_tone(77, -1.1, amp))
    assert np.angle(spectrum[77]) == pytest.approx(-1.1, abs=1e-6)


def test_parseval():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N_BINS) + 1j * rng.standard_normal(N_BINS)
    assert np.sum(np.abs(channelize(x)) ** 2) == pytest.approx(np.sum(np.abs(x) ** 2), rel=1e-9)


def test_tone_helper_coefficient():
    spectrum = channelize(tone(200, 3.0 * np.exp(0.5j)))
    assert spectrum[200] == pytest.approx(3.0 * np.exp(0.5j), abs=1e-9)


def test_noise_estimate_examples():
    rng = np.random.default_rng(1)
    est = estimate_segment_noise(rng.exponential(1.0, (2000, N_BINS)))
    # one 256-bin median scatters by ~9%; the ensemble mean is what is pinned
    assert np.mean(np.abs(est - 1.0) < 0.25) > 0.99
    assert np.mean(est) == pytest.approx(1.0, abs=0.05)
    # a single huge bin moves the median by at most one order-statistic gap
    p = rng.exponential(1.0, (500, N_BINS))
    q = p.copy()
    q[:, 10] = 1e6 * p.max()
    shift = np.abs(estimate_segment_noise(q) / estimate_segment_noise(p) - 1)
    assert shift.mean() < 0.01 and shift.max() < 0.1
    assert q.mean(axis=1).min() > 1e3
    assert estimate_segment_noise(np.full(N_BINS, 2.0)) == pytest.approx(2.0 / math.log(2))
    with pytest.raises(DegenerateNoiseError):
        estimate_segment_noise(np.zeros(N_BINS))


def test_pooled_noise():
    x = np.arange(10.0)
    assert np.allclose(pooled_noise(x, 1), x)
    out = pooled_noise(x, 4)
    assert np.allclose(out, [1.5] * 4 + [5.5] * 4 + [8.5] * 2)


def test_detect_strict_threshold_and_fields():
    spectrum = np.zeros(N_BINS, complex)
    spectrum[5] = math.sqrt(10 ** 0.85)             # exactly at threshold: not detected
    spectrum[6] = 10.0 * np.exp(0.7j)               # 20 dB
    ev = detect_pulses(spectrum, 1.0, 8.5, mjd=60000.5, element="West", segment_index=3,
                       band_power=-1.0)
    assert [e.bin_index for e in ev] == [6]
    e = ev[0]
    assert e.snr_db == pytest.approx(20.0)
    assert e.phase == pytest.approx(0.7)
    assert e.seg_noise == 0.0
    assert e.rf_freq == pytest.approx(bin_frequency_hz(3, 6))
    assert detect_pulses(spectrum, 1.0, math.inf) == []


def test_frequency_round_trip():
    seg = np.arange(0, 55000, 997)
    k = np.arange(seg.size) % N_BINS
    s2, k2 = locate_frequency(bin_frequency_hz(seg, k))
    assert np.array_equal(s2, seg) and np.array_equal(k2, k)
    assert segment_center_hz(0) == 1398e6


def test_false_alarm_rate_single_bin_law():
    rng = np.random.default_rng(2)
    n = 4096
    x = (rng.standard_normal((n, N_BINS)) + 1j * rng.standard_normal((n, N_BINS))) / math.sqrt(2)
    ev = PulseDetector().fit().detect_stream(x, mjd=np.full(n, 60000.0), element="East",
                                             segment_index=0, band_power=np.zeros(n))
    p = math.exp(-10 ** 0.85)
    trials = n * N_BINS
    assert abs(len(ev) - trials * p) < 4 * math.sqrt(trials * p)


@pytest.mark.parametrize("snr", [0.0, 10 ** 0.85, 100.0])
def test_detection_probability_rician(snr):
    rng = np.random.default_rng(3)
    n = 20000
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    power = np.abs(math.sqrt(snr) + noise) ** 2
    hit = np.mean(10 * np.log10(power) > 8.5)
    # P(|A + n|^2 > T) for unit complex noise is Marcum Q_1(sqrt(2A^2), sqrt(2T))
    t = 10 ** 0.85
    want = stats.ncx2.sf(2 * t, 2, 2 * snr) if snr > 0 else math.exp(-t)
    assert abs(hit - want) < 3 * math.sqrt(want * (1 - want) / n) + 1e-4


def test_detector_transform_matches_stream():
    rng = np.random.default_rng(4)
    n = 130
    x = (rng.standard_normal((n, N_BINS)) + 1j * rng.standard_normal((n, N_BINS))).astype(np.complex64)
    mjd = 60000.0 + np.arange(n) * 1e-5
    det = PulseDetector().fit()
    a = det.detect_stream(x, mjd=mjd, element="East", segment_index=2, band_power=np.zeros(n))
    blocks = [IqBlock("East", m, 2, s, 0.0) for m, s in zip(mjd, x)]
    b = det.transform(blocks)
    pd.testing.assert_frame_equal(a.reset_index(drop=True), b)


def test_estimator_params():
    det = PulseDetector(threshold_db=9.0)
    assert det.get_params() == {"threshold_db": 9.0, "noise_window": 64}
    assert det.set_params(noise_window=8).noise_window == 8


def test_event_file_round_trip(tmp_path):
    spectrum = np.zeros(N_BINS, complex)
    spectrum[[3, 200]] = 10.0
    ev = detect_pulses(spectrum, 1.0, mjd=60498.123456789, element="East", segment_index=9,
                       band_power=0.25)
    from pulsepair.firstlevel import events_frame
    frame = events_frame(ev)
    path = tmp_path / "ev.csv"
    write_events(frame, path, ["provenance"])
    text = path.read_text().splitlines()
    assert text[0] == "# provenance"
    assert text[1] == ",".join(EVENT_COLUMNS)
    assert text[2].startswith("60498.123456789,East,")
    back = read_events(path)
    assert back["bin_index"].tolist() == [3, 200]
    assert back["rf_freq_hz"].tolist() == frame["rf_freq_hz"].tolist()


def test_event_file_schema_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("mjd,element,snr_db\n")
    with pytest.raises(SchemaError, match="rf_freq_hz"):
        read_events(path)


def test_iqblock_validation():
    with pytest.raises(ShapeError):
        IqBlock("East", 60000.0, 0, np.zeros(10, complex))
    b = IqBlock("West", 60000.0, 1000, np.zeros(N_BINS))
    assert b.segment_center == pytest.approx(1398.954)
