"""Second-level processing: pulse-pair matching, phase differences and filtering.

A candidate pair is four simultaneous detections: both elements at ``f0``
and both elements at ``f0 + df``.  Phases are differenced East minus West
and wrapped into (-pi, pi]; the difference of the two pulses' phase
differences is compensated for the instrumental delay before the narrow
common-direction window is applied.

Likelihood filters keep pairs whose composite SNR is *at least as unlikely*
under white noise as the threshold (``llsnr <= threshold``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError
from .firstlevel import (DEFAULT_THRESHOLD_DB, EVENT_COLUMNS, SEGMENT_BANDWIDTH)
from .geometry import TWO_PI, ObservatoryConfig, mjd_to_lst, ra_bin, wrap_phase
from .ionosphere import IonoParams, assert_faraday_margin
from .tableio import read_table, write_table
from .validation import check_columns

__all__ = [
    "FilterSet", "wrap_phase", "match_pairs", "compute_pair_phases", "llsnr",
    "flag_segments", "rfi_veto", "rfi_excise", "tag_rejections", "apply_filters",
    "PairSelector", "PAIR_COLUMNS", "write_pairs", "read_pairs", "FILTER_ORDER",
]

PAIR_COLUMNS = [
    "mjd", "lst_hr", "ra_bin", "f0_hz", "df_hz",
    "snr_e0_db", "snr_w0_db", "snr_edf_db", "snr_wdf_db",
    "dphi0_rad", "dphidf_rad", "ddfdphi_rad", "llsnr_pair",
    "segnoise_e0_db", "segnoise_w0_db", "segnoise_edf_db", "segnoise_wdf_db",
    "band50_e_db", "band50_w_db",
]
PAIR_FORMATS = {c: "%.6f" for c in PAIR_COLUMNS}
PAIR_FORMATS.update({"mjd": "%.9f", "lst_hr": "%.9f", "ra_bin": "%d", "f0_hz": "%.7f",
                     "df_hz": "%.7f", "dphi0_rad": "%.9f", "dphidf_rad": "%.9f",
                     "ddfdphi_rad": "%.9f"})
PAIR_DTYPES = {"ra_bin": np.int64}

FILTER_ORDER = ("df", "pulse_phase", "ddf_phase", "llsnr_pulse", "llsnr_pair", "rfi")

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class FilterSet:
    """Second-level filter settings; frequencies in Hz, windows in radians."""

    df_min: float = 300e3
    df_max: float = 540e3
    ddf_phase_window: float = 0.18
    pulse_phase_window: float = math.pi
    llsnr_pulse_threshold: float = 0.0
    llsnr_pair_threshold: float = -2.70
    rfi_margin_segments: int = 500
    rfi_population_limit: int = 10
    rfi_window_hours: float = 4.0
    freq_ranges: tuple = ((1398.0, 1424.0), (1426.0, 1451.0))
    detection_threshold_db: float = DEFAULT_THRESHOLD_DB

    def __post_init__(self):
        if not self.df_min < self.df_max:
            raise DomainError("df_min must be below df_max")
        if self.ddf_phase_window < 0 or self.pulse_phase_window < 0:
            raise DomainError("phase windows must be >= 0")
        if self.rfi_margin_segments < 0 or self.rfi_population_limit < 0:
            raise DomainError("RFI limits must be >= 0")
        if not self.rfi_window_hours > 0:
            raise DomainError("rfi_window_hours must be > 0")
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.freq_ranges)
        if any(lo >= hi for lo, hi in ranges):
            raise DomainError("each frequency range needs min < max")
        object.__setattr__(self, "freq_ranges", ranges)

    def describe(self) -> list[str]:
        """Human-readable settings block."""
        ranges = " and ".join(f"{lo:.1f} - {hi:.1f}" for lo, hi in self.freq_ranges)
        return [
            "Sort method = 1 |Δ_Δf Δ_EWφ|",
            f"RF frequency range = {ranges} MHz",
            f"Pulse pair Δf = {self.df_min / 1e3:.1f} kHz - {self.df_max / 1e3:.1f} kHz",
            f"Pulse pair Δ_Δf Δ_EWφ filter = 0.00 ± {self.ddf_phase_window:.2f} rad",
            f"Pulse Δ_EWφ filter = 0.00 ± {self.pulse_phase_window:.2f} rad",
            f"RFI margin limit = ± {self.rfi_margin_segments} × {SEGMENT_BANDWIDTH:.0f} Hz",
            f"Log_10 likelihood of composite pulse SNR threshold = {self.llsnr_pulse_threshold:.2f}",
            f"Log_10 likelihood of composite pulse pair SNR threshold = {self.llsnr_pair_threshold:.2f}",
        ]


def _epoch_key(mjd) -> np.ndarray:
    # integration index surrogate: identical printed mjd <=> same integration
    return np.rint(np.asarray(mjd, dtype=float) * 1e9).astype(np.int64)


def _in_ranges(freq_hz, ranges) -> np.ndarray:
    f = np.asarray(freq_hz, dtype=float) / 1e6
    ok = np.zeros(f.shape, dtype=bool)
    for lo, hi in ranges:
        ok |= (f >= lo) & (f <= hi)
    return ok


def llsnr(snr_db, threshold_db: float = DEFAULT_THRESHOLD_DB):
    """Composite log10 likelihood of pulse SNRs under white noise.

    Each constituent contributes ``log10 P(S >= s | S >= T)`` for an
    exponentially distributed bin power; the last axis is summed, so pass
    two SNRs for a pulse composite and four for a pair.
    """
    s = np.asarray(snr_db, dtype=float)
    if np.any(s < threshold_db):
        raise DomainError(f"constituent SNR below the {threshold_db} dB detection threshold")
    terms = -(10.0 ** (s / 10.0) - 10.0 ** (threshold_db / 10.0)) / _LN10
    out = terms.sum(axis=-1) if s.ndim else terms
    return float(out) if np.ndim(out) == 0 else out


def match_pairs(events: pd.DataFrame, fs: FilterSet) -> pd.DataFrame:
    """Four-pulse candidates from one-integration coincidences.

    Output columns carry the per-constituent SNR, phase, segment noise and
    band power; rows are ordered by (mjd, f0, df).
    """
    check_columns(events, EVENT_COLUMNS, "events")
    ev = events.assign(epoch=_epoch_key(events["mjd"]))
    ev = ev[_in_ranges(ev["rf_freq_hz"], fs.freq_ranges)]
    keys = ["epoch", "segment_index", "bin_index"]
    east = ev[ev["element"] == "East"]
    west = ev[ev["element"] == "West"]
    dual = east.merge(west, on=keys, suffixes=("_e", "_w"))
    dual = dual.rename(columns={"rf_freq_hz_e": "f", "mjd_e": "mjd"})
    dual = dual[["epoch", "mjd", "f", "segment_index", "snr_db_e", "snr_db_w",
                 "phase_rad_e", "phase_rad_w", "seg_noise_db_e", "seg_noise_db_w",
                 "band50_db_e", "band50_db_w"]]
    lo = dual.add_suffix("0").rename(columns={"epoch0": "epoch"})
    hi = dual.add_suffix("df").rename(columns={"epochdf": "epoch"}).drop(columns=["mjddf"])
    cand = lo.merge(hi, on="epoch")
    cand = cand.assign(df_hz=cand["fdf"] - cand["f0"])
    cand = cand[(cand["df_hz"] >= fs.df_min) & (cand["df_hz"] <= fs.df_max)]
    out = pd.DataFrame({
        "mjd": cand["mjd0"].to_numpy(float),
        "f0_hz": cand["f0"].to_numpy(float),
        "df_hz": cand["df_hz"].to_numpy(float),
        "snr_e0_db": cand["snr_db_e0"].to_numpy(float),
        "snr_w0_db": cand["snr_db_w0"].to_numpy(float),
        "snr_edf_db": cand["snr_db_edf"].to_numpy(float),
        "snr_wdf_db": cand["snr_db_wdf"].to_numpy(float),
        "phase_e0_rad": cand["phase_rad_e0"].to_numpy(float),
        "phase_w0_rad": cand["phase_rad_w0"].to_numpy(float),
        "phase_edf_rad": cand["phase_rad_edf"].to_numpy(float),
        "phase_wdf_rad": cand["phase_rad_wdf"].to_numpy(float),
        "segnoise_e0_db": cand["seg_noise_db_e0"].to_numpy(float),
        "segnoise_w0_db": cand["seg_noise_db_w0"].to_numpy(float),
        "segnoise_edf_db": cand["seg_noise_db_edf"].to_numpy(float),
        "segnoise_wdf_db": cand["seg_noise_db_wdf"].to_numpy(float),
        "band50_e_db": cand["band50_db_e0"].to_numpy(float),
        "band50_w_db": cand["band50_db_w0"].to_numpy(float),
        "segment0": cand["segment_index0"].to_numpy(np.int64),
        "segmentdf": cand["segment_indexdf"].to_numpy(np.int64),
    })
    return out.sort_values(["mjd", "f0_hz", "df_hz"], kind="mergesort").reset_index(drop=True)


def compute_pair_phases(pairs: pd.DataFrame, obs: ObservatoryConfig) -> pd.DataFrame:
    """Add the wrapped East-West phases and the delay-compensated pulse difference."""
    check_columns(pairs, ["df_hz", "phase_e0_rad", "phase_w0_rad", "phase_edf_rad",
                          "phase_wdf_rad"], "pairs")
    out = pairs.copy()
    if out.empty:
        for c in ("dphi0_rad", "dphidf_rad", "ddfdphi_rad"):
            out[c] = pd.Series(dtype=float)
        return out
    dphi0 = wrap_phase(out["phase_e0_rad"].to_numpy() - out["phase_w0_rad"].to_numpy())
    dphidf = wrap_phase(out["phase_edf_rad"].to_numpy() - out["phase_wdf_rad"].to_numpy())
    inst = TWO_PI * out["df_hz"].to_numpy() * obs.instrumental_delay_s
    out["dphi0_rad"] = dphi0
    out["dphidf_rad"] = dphidf
    out["ddfdphi_rad"] = wrap_phase(dphidf - dphi0 - inst)
    return out


def add_likelihoods(pairs: pd.DataFrame, threshold_db: float = DEFAULT_THRESHOLD_DB) -> pd.DataFrame:
    out = pairs.copy()
    snr = out[["snr_e0_db", "snr_w0_db", "snr_edf_db", "snr_wdf_db"]].to_numpy(float)
    if len(out):
        out["llsnr_pulse0"] = llsnr(snr[:, :2], threshold_db)
        out["llsnr_pulsedf"] = llsnr(snr[:, 2:], threshold_db)
        out["llsnr_pair"] = llsnr(snr, threshold_db)
    else:
        for c in ("llsnr_pulse0", "llsnr_pulsedf", "llsnr_pair"):
            out[c] = pd.Series(dtype=float)
    return out


def add_sky_position(pairs: pd.DataFrame, obs: ObservatoryConfig, n_ra_bins: int = 3200) -> pd.DataFrame:
    out = pairs.copy()
    if len(out):
        lst = mjd_to_lst(out["mjd"].to_numpy(float), obs.longitude_east)
        out["lst_hr"] = lst
        out["ra_bin"] = ra_bin(lst, n_ra_bins)
    else:
        out["lst_hr"] = pd.Series(dtype=float)
        out["ra_bin"] = pd.Series(dtype=np.int64)
    return out


def _window_index(mjd, hours: float) -> np.ndarray:
    return np.floor(np.asarray(mjd, dtype=float) * 24.0 / hours).astype(np.int64)


def flag_segments(events: pd.DataFrame, fs: FilterSet) -> pd.DataFrame:
    """Segments whose single-integration pulse population exceeds the limit.

    Population is counted per (integration, segment, element); a segment
    crossing the limit anywhere in an RFI window is flagged for that whole
    window.  Returns unique ``(window, segment_index)`` rows.
    """
    check_columns(events, EVENT_COLUMNS, "events")
    if events.empty:
        return pd.DataFrame({"window": pd.Series(dtype=np.int64),
                             "segment_index": pd.Series(dtype=np.int64)})
    key = pd.DataFrame({
        "epoch": _epoch_key(events["mjd"]),
        "window": _window_index(events["mjd"], fs.rfi_window_hours),
        "segment_index": events["segment_index"].to_numpy(np.int64),
        "element": events["element"].to_numpy(),
    })
    counts = key.groupby(["epoch", "window", "segment_index", "element"]).size()
    hot = counts[counts > fs.rfi_population_limit].reset_index()
    flagged = hot[["window", "segment_index"]].drop_duplicates()
    return flagged.sort_values(["window", "segment_index"]).reset_index(drop=True)


def rfi_veto(pairs: pd.DataFrame, flagged: pd.DataFrame, fs: FilterSet) -> np.ndarray:
    """True where either pulse lies within the margin of a flagged segment in its window."""
    n = len(pairs)
    if n == 0 or flagged.empty:
        return np.zeros(n, dtype=bool)
    if {"segment0", "segmentdf"} <= set(pairs.columns):
        seg0 = pairs["segment0"].to_numpy(np.int64)
        segdf = pairs["segmentdf"].to_numpy(np.int64)
    else:
        from .firstlevel import locate_frequency
        seg0 = locate_frequency(pairs["f0_hz"].to_numpy())[0]
        segdf = locate_frequency(pairs["f0_hz"].to_numpy() + pairs["df_hz"].to_numpy())[0]
    probe = pd.DataFrame({"row": np.arange(n), "window": _window_index(pairs["mjd"], fs.rfi_window_hours),
                          "seg0": seg0, "segdf": segdf})
    hits = probe.merge(flagged, on="window")
    near = ((hits["seg0"] - hits["segment_index"]).abs() <= fs.rfi_margin_segments) | \
           ((hits["segdf"] - hits["segment_index"]).abs() <= fs.rfi_margin_segments)
    veto = np.zeros(n, dtype=bool)
    veto[hits.loc[near, "row"].to_numpy()] = True
    return veto


def rfi_excise(events: pd.DataFrame, fs: FilterSet) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Flag populous segments and drop events within the margin of one.

    Returns ``(flagged, kept_events)``.
    """
    flagged = flag_segments(events, fs)
    if flagged.empty or events.empty:
        return flagged, events.copy()
    probe = pd.DataFrame({"row": np.arange(len(events)),
                          "window": _window_index(events["mjd"], fs.rfi_window_hours),
                          "seg": events["segment_index"].to_numpy(np.int64)})
    hits = probe.merge(flagged, on="window")
    near = (hits["seg"] - hits["segment_index"]).abs() <= fs.rfi_margin_segments
    drop = np.zeros(len(events), dtype=bool)
    drop[hits.loc[near, "row"].to_numpy()] = True
    return flagged, events[~drop].reset_index(drop=True)


def _filter_masks(pairs: pd.DataFrame, fs: FilterSet) -> dict[str, np.ndarray]:
    n = len(pairs)
    df = pairs["df_hz"].to_numpy(float)
    masks = {
        "df": (df >= fs.df_min) & (df <= fs.df_max),
        "pulse_phase": (np.abs(pairs["dphi0_rad"].to_numpy(float)) <= fs.pulse_phase_window)
        & (np.abs(pairs["dphidf_rad"].to_numpy(float)) <= fs.pulse_phase_window),
        "ddf_phase": np.abs(pairs["ddfdphi_rad"].to_numpy(float)) <= fs.ddf_phase_window,
        "llsnr_pair": pairs["llsnr_pair"].to_numpy(float) <= fs.llsnr_pair_threshold,
    }
    if {"llsnr_pulse0", "llsnr_pulsedf"} <= set(pairs.columns):
        masks["llsnr_pulse"] = (pairs["llsnr_pulse0"].to_numpy(float) <= fs.llsnr_pulse_threshold) \
            & (pairs["llsnr_pulsedf"].to_numpy(float) <= fs.llsnr_pulse_threshold)
    else:
        masks["llsnr_pulse"] = np.ones(n, dtype=bool)
    if "rfi_veto" in pairs.columns:
        masks["rfi"] = ~pairs["rfi_veto"].to_numpy(bool)
    else:
        masks["rfi"] = np.ones(n, dtype=bool)
    return masks


def tag_rejections(pairs: pd.DataFrame, fs: FilterSet, order=FILTER_ORDER) -> pd.Series:
    """First failing filter per pair in ``order``; empty string when accepted."""
    masks = _filter_masks(pairs, fs)
    if set(order) != set(FILTER_ORDER):
        raise DomainError(f"filter order must be a permutation of {FILTER_ORDER}")
    reason = np.full(len(pairs), "", dtype=object)
    for name in reversed(tuple(order)):
        reason[~masks[name]] = name
    return pd.Series(reason, index=pairs.index, name="reject_reason")


def apply_filters(pairs: pd.DataFrame, fs: FilterSet, order=FILTER_ORDER) -> pd.DataFrame:
    """Accepted pairs.  Acceptance is the conjunction of every filter, so ``order``
    only changes which rejection reason gets reported."""
    reasons = tag_rejections(pairs, fs, order)
    return pairs[reasons == ""].reset_index(drop=True)


class PairSelector(TransformerMixin, BaseEstimator):
    """Events in, accepted pulse pairs out.

    ``fit`` is the window-level aggregation pass (populous-segment flags and
    the Faraday margin check); ``transform`` matches, phases, scores and
    filters candidates against those flags.
    """

    def __init__(self, obs: ObservatoryConfig | None = None, filters: FilterSet | None = None,
                 n_ra_bins: int = 3200, iono: IonoParams | None = None):
        self.obs = obs
        self.filters = filters
        self.n_ra_bins = n_ra_bins
        self.iono = iono

    def _fs(self) -> FilterSet:
        return self.filters if self.filters is not None else FilterSet()

    def fit(self, X: pd.DataFrame, y=None):
        if self.obs is None:
            raise DomainError("PairSelector needs an ObservatoryConfig")
        fs = self._fs()
        check_columns(X, EVENT_COLUMNS, "events")
        self.faraday_worst_rad_ = assert_faraday_margin(
            self.iono or IonoParams(), fs.df_max, fs.ddf_phase_window,
            f0_min_ghz=min(lo for lo, _ in fs.freq_ranges) / 1e3)
        self.flagged_segments_ = flag_segments(X, fs)
        return self

    def candidates(self, X: pd.DataFrame) -> pd.DataFrame:
        """All candidates with phases, likelihoods, sky position and rejection tags."""
        check_is_fitted(self, "flagged_segments_")
        fs = self._fs()
        cand = match_pairs(X, fs)
        cand = compute_pair_phases(cand, self.obs)
        cand = add_likelihoods(cand, fs.detection_threshold_db)
        cand = add_sky_position(cand, self.obs, self.n_ra_bins)
        cand["rfi_veto"] = rfi_veto(cand, self.flagged_segments_, fs)
        cand["reject_reason"] = tag_rejections(cand, fs)
        return cand

    def transform(self, X: pd.DataFrame) -> pd.DataFrame:
        cand = self.candidates(X)
        counts = cand["reject_reason"].replace("", "accepted").value_counts()
        self.rejection_counts_ = {k: int(counts.get(k, 0)) for k in ("accepted",) + FILTER_ORDER}
        return cand[cand["reject_reason"] == ""].reset_index(drop=True)


def write_pairs(pairs: pd.DataFrame, path, comments=()) -> None:
    check_columns(pairs, PAIR_COLUMNS, "pairs")
    write_table(pairs, path, PAIR_COLUMNS, PAIR_FORMATS, comments)


def read_pairs(path) -> pd.DataFrame:
    return read_table(path, PAIR_COLUMNS, PAIR_DTYPES)


def with_threshold(fs: FilterSet, **changes) -> FilterSet:
    return replace(fs, **changes)
