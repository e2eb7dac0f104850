"""First-level processing: channelize, estimate segment noise, detect pulses.

A segment is a 954 Hz span of 256 critically sampled FFT bins.  Segments
sit on a fixed grid starting at 1398 MHz, so an event's ``segment_index``
and ``bin_index`` reconstruct its RF frequency exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegenerateNoiseError, DomainError
from .tableio import read_table, write_table
from .validation import check_columns, check_samples

N_BINS = 256
SEGMENT_BANDWIDTH = 954.0
BIN_BANDWIDTH = SEGMENT_BANDWIDTH / N_BINS
INTEGRATION_TIME = N_BINS / SEGMENT_BANDWIDTH
SAMPLE_RATE = SEGMENT_BANDWIDTH
SEGMENT_GRID_ORIGIN_HZ = 1398.0e6
BAND_TOP_HZ = 1451.0e6
N_SEGMENTS = int((BAND_TOP_HZ - SEGMENT_GRID_ORIGIN_HZ) // SEGMENT_BANDWIDTH) + 1

DEFAULT_THRESHOLD_DB = 8.5

ELEMENTS = ("East", "West")

EVENT_COLUMNS = ["mjd", "element", "rf_freq_hz", "snr_db", "phase_rad",
                 "seg_noise_db", "band50_db", "segment_index", "bin_index"]
EVENT_FORMATS = {
    "mjd": "%.9f", "element": None, "rf_freq_hz": "%.7f", "snr_db": "%.6f",
    "phase_rad": "%.9f", "seg_noise_db": "%.6f", "band50_db": "%.6f",
    "segment_index": "%d", "bin_index": "%d",
}
EVENT_DTYPES = {"element": str, "segment_index": np.int64, "bin_index": np.int64}


def segment_center_hz(segment_index):
    return SEGMENT_GRID_ORIGIN_HZ + np.asarray(segment_index, dtype=np.int64) * SEGMENT_BANDWIDTH


def bin_frequency_hz(segment_index, bin_index):
    """Absolute centre frequency of ``bin_index`` within ``segment_index``."""
    seg = np.asarray(segment_index, dtype=np.int64)
    k = np.asarray(bin_index, dtype=np.int64)
    return SEGMENT_GRID_ORIGIN_HZ + seg * SEGMENT_BANDWIDTH + (k - N_BINS // 2) * BIN_BANDWIDTH


def locate_frequency(rf_freq_hz):
    """Inverse of :func:`bin_frequency_hz` for bin-centred frequencies."""
    offset = (np.asarray(rf_freq_hz, dtype=float) - SEGMENT_GRID_ORIGIN_HZ) / BIN_BANDWIDTH
    n = np.rint(offset).astype(np.int64) + N_BINS // 2
    return n // N_BINS, n % N_BINS


def segment_for_mhz(freq_mhz: float) -> int:
    """Grid index of the segment whose centre is nearest ``freq_mhz``."""
    return int(round((freq_mhz * 1e6 - SEGMENT_GRID_ORIGIN_HZ) / SEGMENT_BANDWIDTH))


@dataclass
class IqBlock:
    """One integration (256 complex samples at 954 Hz) from one element."""

    element: str
    mjd: float
    segment_index: int
    samples: np.ndarray
    band_power: float = float("nan")

    def __post_init__(self):
        if self.element not in ELEMENTS:
            raise DomainError(f"element must be one of {ELEMENTS}, got {self.element!r}")
        self.samples = check_samples(self.samples, N_BINS)
        if self.samples.ndim != 1:
            raise DomainError("an IqBlock holds a single integration")

    @property
    def segment_center(self) -> float:
        """Segment centre in MHz."""
        return float(segment_center_hz(self.segment_index)) / 1e6


@dataclass(frozen=True)
class PulseEvent:
    mjd: float
    element: str
    rf_freq: float
    snr_db: float
    phase: float
    seg_noise: float
    band_power: float
    segment_index: int
    bin_index: int

    def as_row(self) -> dict:
        return {
            "mjd": self.mjd, "element": self.element, "rf_freq_hz": self.rf_freq,
            "snr_db": self.snr_db, "phase_rad": self.phase, "seg_noise_db": self.seg_noise,
            "band50_db": self.band_power, "segment_index": self.segment_index,
            "bin_index": self.bin_index,
        }


def events_frame(events: Iterable[PulseEvent] = ()) -> pd.DataFrame:
    rows = [e.as_row() for e in events]
    frame = pd.DataFrame(rows, columns=EVENT_COLUMNS)
    return frame.astype({"segment_index": np.int64, "bin_index": np.int64})


def channelize(block) -> np.ndarray:
    """Unwindowed orthonormal DFT, re-ordered so bin 128 is the segment centre.

    Accepts an :class:`IqBlock` or any array whose last axis has 256
    samples.  A tone ``exp(i*(2*pi*(k-128)*n/256 + theta))`` lands entirely
    in bin ``k`` with phase ``theta``.
    """
    samples = block.samples if isinstance(block, IqBlock) else check_samples(block, N_BINS)
    return np.fft.fftshift(np.fft.fft(samples, axis=-1, norm="ortho"), axes=-1)


def estimate_segment_noise(bin_powers) -> np.ndarray | float:
    """Robust per-bin noise power: median of the bin powers over ln 2."""
    p = np.asarray(bin_powers, dtype=float)
    if p.shape[-1] != N_BINS:
        raise DomainError(f"expected {N_BINS} bin powers, got {p.shape[-1]}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("bin powers must be finite and non-negative")
    noise = np.median(p, axis=-1) / math.log(2.0)
    if np.any(noise <= 0):
        raise DegenerateNoiseError("segment noise estimate is zero")
    return float(noise) if np.ndim(noise) == 0 else noise


def pooled_noise(per_block, window: int) -> np.ndarray:
    """Average per-block noise estimates over aligned groups of ``window`` blocks.

    The last group may be shorter.  ``window=1`` returns the input.
    """
    est = np.asarray(per_block, dtype=float)
    if window <= 1 or est.size == 0:
        return est.copy()
    n = est.size
    groups = np.arange(n) // window
    sums = np.bincount(groups, weights=est)
    counts = np.bincount(groups)
    return (sums / counts)[groups]


def detect_pulses(spectrum, noise: float, threshold_db: float = DEFAULT_THRESHOLD_DB, *,
                  mjd: float = float("nan"), element: str = "East", segment_index: int = 0,
                  band_power: float = float("nan")) -> list[PulseEvent]:
    """One event per bin whose power exceeds ``noise`` by strictly more than ``threshold_db``."""
    if not noise > 0:
        raise DegenerateNoiseError("noise must be positive")
    spectrum = check_samples(spectrum, N_BINS)
    power = np.abs(spectrum) ** 2
    with np.errstate(divide="ignore"):
        snr = 10.0 * np.log10(power / noise)
    seg_noise = 10.0 * math.log10(noise)
    hits = np.flatnonzero(snr > threshold_db)
    return [
        PulseEvent(mjd=mjd, element=element,
                   rf_freq=float(bin_frequency_hz(segment_index, k)),
                   snr_db=float(snr[k]), phase=float(np.angle(spectrum[k])),
                   seg_noise=seg_noise, band_power=band_power,
                   segment_index=int(segment_index), bin_index=int(k))
        for k in hits
    ]


def detect_batch(spectra, noise, *, mjd, element: str, segment_index: int, band_power,
                 threshold_db: float = DEFAULT_THRESHOLD_DB) -> pd.DataFrame:
    """Vectorised :func:`detect_pulses` over a stack of spectra from one stream."""
    spectra = np.asarray(spectra)
    noise = np.asarray(noise, dtype=float)
    power = spectra.real.astype(float) ** 2 + spectra.imag.astype(float) ** 2
    # compare in the linear domain first; log only the hits
    limit = noise[:, None] * 10.0 ** (threshold_db / 10.0)
    rows, bins = np.nonzero(power > limit)
    if rows.size:
        snr = 10.0 * np.log10(power[rows, bins] / noise[rows])
        keep = snr > threshold_db
        rows, bins, snr = rows[keep], bins[keep], snr[keep]
    else:
        snr = np.empty(0)
    phase = np.angle(spectra[rows, bins]).astype(float)
    mjd = np.broadcast_to(np.asarray(mjd, dtype=float), noise.shape)
    band_power = np.broadcast_to(np.asarray(band_power, dtype=float), noise.shape)
    return pd.DataFrame({
        "mjd": mjd[rows],
        "element": np.full(rows.size, element, dtype=object),
        "rf_freq_hz": bin_frequency_hz(segment_index, bins).astype(float),
        "snr_db": snr,
        "phase_rad": phase,
        "seg_noise_db": 10.0 * np.log10(noise[rows]),
        "band50_db": band_power[rows],
        "segment_index": np.full(rows.size, segment_index, dtype=np.int64),
        "bin_index": bins.astype(np.int64),
    }, columns=EVENT_COLUMNS)


def sort_events(events: pd.DataFrame) -> pd.DataFrame:
    """Canonical order: mjd, segment, element (East first), bin."""
    if events.empty:
        return events.reset_index(drop=True)
    key = events.assign(_el=(events["element"] == "West").astype(int))
    key = key.sort_values(["mjd", "segment_index", "_el", "bin_index"], kind="mergesort")
    return key.drop(columns="_el").reset_index(drop=True)


class PulseDetector(TransformerMixin, BaseEstimator):
    """Turn IQ blocks into pulse events.

    Parameters
    ----------
    threshold_db : float
        Detection threshold on bin power over segment noise.
    noise_window : int
        Number of consecutive integrations of one (segment, element) stream
        whose median-based noise estimates are averaged.  Pooling keeps the
        false-alarm rate at its exponential-law value; 1 uses each block's
        own estimate.
    """

    def __init__(self, threshold_db: float = DEFAULT_THRESHOLD_DB, noise_window: int = 64):
        self.threshold_db = threshold_db
        self.noise_window = noise_window

    def fit(self, X=None, y=None):
        if self.noise_window < 1:
            raise DomainError("noise_window must be >= 1")
        self.n_features_in_ = N_BINS
        return self

    def detect_stream(self, samples, *, mjd, element: str, segment_index: int,
                      band_power) -> pd.DataFrame:
        """Detect over an (n_blocks, 256) stack from one segment and element."""
        samples = check_samples(samples, N_BINS)
        if samples.shape[0] == 0:
            return events_frame()
        spectra = channelize(samples)
        power = spectra.real.astype(float) ** 2 + spectra.imag.astype(float) ** 2
        noise = pooled_noise(estimate_segment_noise(power).reshape(-1), self.noise_window)
        return detect_batch(spectra, noise, mjd=mjd, element=element,
                            segment_index=segment_index, band_power=band_power,
                            threshold_db=self.threshold_db)

    def transform(self, X) -> pd.DataFrame:
        """``X`` is an iterable of :class:`IqBlock` in stream order."""
        streams: dict[tuple[int, str], list[IqBlock]] = {}
        for block in X:
            streams.setdefault((block.segment_index, block.element), []).append(block)
        frames = []
        for (seg, element), blocks in streams.items():
            frames.append(self.detect_stream(
                np.stack([b.samples for b in blocks]),
                mjd=np.array([b.mjd for b in blocks]), element=element, segment_index=seg,
                band_power=np.array([b.band_power for b in blocks])))
        if not frames:
            return events_frame()
        return sort_events(pd.concat(frames, ignore_index=True))


def write_events(events: pd.DataFrame, path, comments=()) -> None:
    check_columns(events, EVENT_COLUMNS, "events")
    write_table(events, path, EVENT_COLUMNS, EVENT_FORMATS, comments)


def read_events(path) -> pd.DataFrame:
    return read_table(path, EVENT_COLUMNS, EVENT_DTYPES)
