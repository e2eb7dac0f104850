"""RA-binned pair statistics, direction-of-interest search and report tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator

from .exceptions import DegenerateStatisticsError, DomainError
from .geometry import (ObservatoryConfig, SkyDirection, beam_offset, expected_ew_phase,
                       hour_offset, ra_bin, ra_bin_width, wrap_phase)
from .secondlevel import FILTER_ORDER, FilterSet, _filter_masks
from .tableio import ensure_dir, write_table
from .validation import check_columns

DEFAULT_DOI_RA = 5.25375
DEFAULT_WINDOW = (5.0, 5.6)


@dataclass(frozen=True)
class RaBinHistogram:
    """Pair counts per RA bin with Poisson (or sample) z-scores.

    ``window_bins`` are the reference bins whose mean count is ``mu``;
    ``z`` holds one score per bin over the whole circle.
    """

    n_bins: int
    counts: np.ndarray
    window: tuple
    window_bins: np.ndarray
    mu: float
    sigma: float
    z: np.ndarray
    sigma_mode: str = "poisson"

    @property
    def bin_width(self) -> float:
        return ra_bin_width(self.n_bins)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def window_total(self) -> int:
        return int(self.counts[self.window_bins].sum())

    def z_at(self, ra_hr: float) -> float:
        return float(self.z[ra_bin(ra_hr, self.n_bins)])

    def count_at(self, ra_hr: float) -> int:
        return int(self.counts[ra_bin(ra_hr, self.n_bins)])


def window_bins(n_bins: int, window) -> np.ndarray:
    """Bins whose centres lie in ``[lo, hi)`` hours; the window may wrap through 0 h."""
    lo, hi = (float(w) % 24.0 for w in window)
    centres = (np.arange(n_bins) + 0.5) * ra_bin_width(n_bins)
    inside = (centres >= lo) & (centres < hi) if lo <= hi else (centres >= lo) | (centres < hi)
    return np.flatnonzero(inside)


def histogram(pairs: pd.DataFrame, n_bins: int = 3200, window=DEFAULT_WINDOW,
              sigma: str = "poisson", exclude_bins=()) -> RaBinHistogram:
    """Count pairs per RA bin and score every bin against the window mean.

    ``sigma="poisson"`` uses sqrt(mu); ``"sample"`` the standard deviation
    of the window counts.  ``exclude_bins`` are dropped from the reference
    set (e.g. to keep a suspected source bin out of its own baseline).
    """
    check_columns(pairs, ["ra_bin"], "pairs")
    if sigma not in ("poisson", "sample"):
        raise DomainError(f"sigma must be 'poisson' or 'sample', got {sigma!r}")
    idx = pairs["ra_bin"].to_numpy(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n_bins):
        raise DomainError(f"ra_bin outside [0, {n_bins})")
    counts = np.bincount(idx, minlength=n_bins)
    ref = np.setdiff1d(window_bins(n_bins, window), np.asarray(exclude_bins, dtype=np.int64))
    if ref.size == 0:
        raise DegenerateStatisticsError(f"RA window {tuple(window)} contains no bins")
    mu = float(counts[ref].mean())
    sd = math.sqrt(mu) if sigma == "poisson" else (
        float(counts[ref].std(ddof=1)) if ref.size > 1 else 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (counts - mu) / sd if sd > 0 else np.full(n_bins, np.nan)
    return RaBinHistogram(n_bins=n_bins, counts=counts, window=tuple(window), window_bins=ref,
                          mu=mu, sigma=sd, z=np.asarray(z, dtype=float), sigma_mode=sigma)


def _llsnr_mask(pairs: pd.DataFrame, fs: FilterSet) -> np.ndarray:
    # candidate frames carry everything the full filter chain needs; plain
    # pair files have already passed it and only the threshold moves
    needed = {"df_hz", "dphi0_rad", "dphidf_rad", "ddfdphi_rad", "llsnr_pair"}
    if "reject_reason" in pairs.columns and needed <= set(pairs.columns):
        masks = _filter_masks(pairs, fs)
        keep = np.ones(len(pairs), dtype=bool)
        for name in FILTER_ORDER:
            keep &= masks[name]
        return keep
    return pairs["llsnr_pair"].to_numpy(float) <= fs.llsnr_pair_threshold


def llsnr_sweep(pairs: pd.DataFrame, fs: FilterSet, thresholds, n_bins: int = 3200,
                window=DEFAULT_WINDOW, sigma: str = "poisson",
                exclude_bins=()) -> dict[float, RaBinHistogram]:
    """Histograms after re-filtering at each pair LLSNR threshold (ascending order)."""
    thresholds = [float(t) for t in thresholds]
    if thresholds != sorted(thresholds):
        raise DomainError("thresholds must be sorted ascending")
    out = {}
    for t in thresholds:
        keep = _llsnr_mask(pairs, replace(fs, llsnr_pair_threshold=t))
        out[t] = histogram(pairs[keep], n_bins, window, sigma, exclude_bins)
    return out


def _track_terms(pairs: pd.DataFrame, src_ra: float, obs: ObservatoryConfig, dec=None,
                 beam_halfwidth=None):
    """In-beam mask and on-circle residual to the predicted diagonal."""
    src = SkyDirection(src_ra, obs.pointing_dec if dec is None else dec)
    lst = pairs["lst_hr"].to_numpy(float)
    half = obs.element_fwhm / 2.0 if beam_halfwidth is None else beam_halfwidth
    in_beam = np.abs(beam_offset(src, lst, obs)) <= half
    resid = np.full(lst.size, np.nan)
    if np.any(in_beam):
        pred = expected_ew_phase(src, lst[in_beam], obs,
                                 pairs["f0_hz"].to_numpy(float)[in_beam] / 1e6)
        resid[in_beam] = wrap_phase(pairs["dphi0_rad"].to_numpy(float)[in_beam] - pred)
    return in_beam, resid


def track_mask(pairs: pd.DataFrame, src_ra: float, phase_tol: float = 0.18,
               obs: ObservatoryConfig | None = None, dec=None, beam_halfwidth=None) -> np.ndarray:
    """Pairs on the celestial diagonal of ``src_ra`` while it is inside the beam.

    The beam is the half-power width of an element unless ``beam_halfwidth``
    (deg) says otherwise; a wider acceptance lets fringe aliases one period
    away score almost as well as the true direction.
    """
    if not phase_tol > 0:
        raise DomainError("phase_tol must be > 0")
    if obs is None:
        raise DomainError("track counting needs an ObservatoryConfig")
    check_columns(pairs, ["lst_hr", "f0_hz", "dphi0_rad"], "pairs")
    if pairs.empty:
        return np.zeros(0, dtype=bool)
    in_beam, resid = _track_terms(pairs, src_ra, obs, dec, beam_halfwidth)
    with np.errstate(invalid="ignore"):
        return in_beam & (np.abs(resid) <= phase_tol)


def celestial_track_count(pairs: pd.DataFrame, src_ra: float, phase_tol: float = 0.18,
                          obs: ObservatoryConfig | None = None, dec=None,
                          beam_halfwidth=None) -> int:
    return int(track_mask(pairs, src_ra, phase_tol, obs, dec, beam_halfwidth).sum())


def in_beam_count(pairs: pd.DataFrame, src_ra: float, obs: ObservatoryConfig, dec=None,
                  beam_halfwidth=None) -> int:
    if pairs.empty:
        return 0
    src = SkyDirection(src_ra, obs.pointing_dec if dec is None else dec)
    half = obs.element_fwhm / 2.0 if beam_halfwidth is None else beam_halfwidth
    return int((np.abs(beam_offset(src, pairs["lst_hr"].to_numpy(float), obs)) <= half).sum())


def null_threshold(n_in_beam, phase_tol: float, n_trials: int, alpha: float = 0.01):
    """Track count a uniform-phase background exceeds with probability ``alpha``
    across ``n_trials`` independent directions (Bonferroni)."""
    p = min(1.0, phase_tol / math.pi)
    q = 1.0 - alpha / max(int(n_trials), 1)
    return stats.binom.ppf(q, np.asarray(n_in_beam), p)


def candidate_grid(ra_range, step: float) -> np.ndarray:
    lo, hi = (float(v) for v in ra_range)
    if not hi > lo:
        raise DomainError(f"empty RA range {tuple(ra_range)}")
    if not step > 0:
        raise DomainError("step must be > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def doi_search(pairs: pd.DataFrame, ra_range=(5.1, 5.4), step: float | None = None,
               phase_tol: float = 0.18, obs: ObservatoryConfig | None = None,
               scoring: str = "track", n_bins: int = 3200, dec=None, alpha: float = 0.01,
               beam_halfwidth=None) -> tuple[float, pd.DataFrame]:
    """Scan candidate RAs and return ``(best_ra, profile)``.

    ``scoring="track"`` counts pairs on each candidate's diagonal;
    ``"bins"`` uses the raw count of the candidate's RA bin.  The first
    (lowest-RA) maximum wins ties.  ``profile`` lists every candidate with
    its score, in-beam population and background null threshold.
    """
    width = ra_bin_width(n_bins)
    if step is None:
        step = width / 5.0
    if step > width * (1 + 1e-9):
        raise DomainError(f"step {step} h exceeds the RA bin width {width} h")
    if scoring not in ("track", "bins"):
        raise DomainError(f"scoring must be 'track' or 'bins', got {scoring!r}")
    grid = candidate_grid(ra_range, step)
    n_trials = max(1, int(round((grid[-1] - grid[0]) / width)) + 1)
    if scoring == "track":
        if obs is None:
            raise DomainError("track scoring needs an ObservatoryConfig")
        scores = np.array([celestial_track_count(pairs, ra, phase_tol, obs, dec, beam_halfwidth)
                           for ra in grid], dtype=np.int64)
        n_in = np.array([in_beam_count(pairs, ra, obs, dec, beam_halfwidth) for ra in grid],
                        dtype=np.int64)
        thresh = null_threshold(n_in, phase_tol, n_trials, alpha)
    else:
        check_columns(pairs, ["ra_bin"], "pairs")
        counts = np.bincount(pairs["ra_bin"].to_numpy(np.int64), minlength=n_bins)
        scores = counts[ra_bin(grid, n_bins)].astype(np.int64)
        n_in = np.full(grid.size, len(pairs), dtype=np.int64)
        wb = window_bins(n_bins, ra_range)
        mu = counts[wb].mean() if wb.size else 0.0
        thresh = np.full(grid.size, stats.poisson.ppf(1.0 - alpha / n_trials, mu) if mu > 0 else 0.0)
    profile = pd.DataFrame({"ra_hr": grid, "score": scores, "n_in_beam": n_in,
                            "null_threshold": np.asarray(thresh, dtype=float)})
    best = int(np.argmax(scores))
    return float(grid[best]), profile


class DoiSearch(BaseEstimator):
    """Estimator wrapper around :func:`doi_search`.

    After ``fit`` the attributes ``best_ra_``, ``best_score_``,
    ``profile_``, ``null_threshold_`` and ``significant_`` describe the scan.
    """

    def __init__(self, obs: ObservatoryConfig | None = None, ra_range=(5.1, 5.4), step=None,
                 phase_tol: float = 0.18, scoring: str = "track", n_bins: int = 3200,
                 dec=None, alpha: float = 0.01, beam_halfwidth=None):
        self.obs = obs
        self.ra_range = ra_range
        self.step = step
        self.phase_tol = phase_tol
        self.scoring = scoring
        self.n_bins = n_bins
        self.dec = dec
        self.alpha = alpha
        self.beam_halfwidth = beam_halfwidth

    def fit(self, X: pd.DataFrame, y=None):
        best, profile = doi_search(X, self.ra_range, self.step, self.phase_tol, self.obs,
                                   self.scoring, self.n_bins, self.dec, self.alpha,
                                   self.beam_halfwidth)
        row = profile.loc[profile["ra_hr"] == best].iloc[0]
        self.best_ra_ = best
        self.best_score_ = int(row["score"])
        self.null_threshold_ = float(row["null_threshold"])
        self.profile_ = profile
        self.significant_ = bool((profile["score"] > profile["null_threshold"]).any())
        return self

    def score(self, X: pd.DataFrame, y=None) -> float:
        return float(self.fit(X).best_score_)


# --------------------------------------------------------------------------
# report tables

REPORT_TABLES = ("phase_vs_ra", "sigma_vs_ra", "noise954_vs_ra", "band50_vs_ra",
                 "mjd_freq_vs_ra", "df_vs_ra")

_REPORT_COLUMNS = {
    "phase_vs_ra": ["mjd", "lst_hr", "ra_offset_hr", "f0_hz", "dphi0_rad", "predicted_rad",
                    "residual_rad", "ddfdphi_rad", "on_track"],
    "sigma_vs_ra": ["llsnr_threshold", "ra_bin", "ra_hr", "count", "mu", "z"],
    "noise954_vs_ra": ["lst_hr", "ra_offset_hr", "element", "pulse", "seg_noise_db", "snr_db"],
    "band50_vs_ra": ["lst_hr", "ra_offset_hr", "element", "band50_db"],
    "mjd_freq_vs_ra": ["lst_hr", "ra_offset_hr", "ra_bin", "mjd", "f0_mhz", "fdf_mhz"],
    "df_vs_ra": ["lst_hr", "ra_offset_hr", "ra_bin", "df_khz"],
    "doi_profile": ["ra_hr", "score", "n_in_beam", "null_threshold"],
}
_REPORT_FORMATS = {
    "mjd": "%.9f", "lst_hr": "%.9f", "ra_offset_hr": "%.9f", "ra_hr": "%.6f", "f0_hz": "%.7f",
    "dphi0_rad": "%.9f", "predicted_rad": "%.9f", "residual_rad": "%.9f", "ddfdphi_rad": "%.9f",
    "on_track": "%d", "llsnr_threshold": "%.4f", "ra_bin": "%d", "count": "%d", "mu": "%.6f",
    "z": "%.6f", "element": None, "pulse": None, "seg_noise_db": "%.6f", "snr_db": "%.6f",
    "band50_db": "%.6f", "f0_mhz": "%.7f", "fdf_mhz": "%.7f", "df_khz": "%.7f", "score": "%d",
    "n_in_beam": "%d", "null_threshold": "%.1f",
}


def _phase_table(pairs, obs, doi_ra, phase_tol, dec):
    if pairs.empty:
        return pd.DataFrame(columns=_REPORT_COLUMNS["phase_vs_ra"])
    src = SkyDirection(doi_ra, obs.pointing_dec if dec is None else dec)
    lst = pairs["lst_hr"].to_numpy(float)
    f0 = pairs["f0_hz"].to_numpy(float)
    alpha = beam_offset(src, lst, obs)
    visible = np.abs(alpha) <= 3.0 * obs.element_fwhm
    pred = np.full(lst.size, np.nan)
    if visible.any():
        pred[visible] = expected_ew_phase(src, lst[visible], obs, f0[visible] / 1e6)
    resid = np.full(lst.size, np.nan)
    resid[visible] = wrap_phase(pairs["dphi0_rad"].to_numpy(float)[visible] - pred[visible])
    on = track_mask(pairs, doi_ra, phase_tol, obs, dec)
    table = pd.DataFrame({
        "mjd": pairs["mjd"].to_numpy(float), "lst_hr": lst,
        "ra_offset_hr": hour_offset(doi_ra, lst), "f0_hz": f0,
        "dphi0_rad": pairs["dphi0_rad"].to_numpy(float), "predicted_rad": pred,
        "residual_rad": resid, "ddfdphi_rad": pairs["ddfdphi_rad"].to_numpy(float),
        "on_track": on.astype(int),
    })
    order = np.lexsort((table["mjd"].to_numpy(), np.abs(table["ddfdphi_rad"].to_numpy())))
    return table.iloc[order].reset_index(drop=True)


def _sigma_table(histograms):
    rows = []
    for t, h in histograms.items():
        bins = np.union1d(h.window_bins, np.flatnonzero(h.counts))
        rows.append(pd.DataFrame({
            "llsnr_threshold": np.full(bins.size, t, dtype=float), "ra_bin": bins,
            "ra_hr": bins * h.bin_width, "count": h.counts[bins],
            "mu": np.full(bins.size, h.mu), "z": h.z[bins]}))
    if not rows:
        return pd.DataFrame(columns=_REPORT_COLUMNS["sigma_vs_ra"])
    return pd.concat(rows, ignore_index=True)


def _long_table(pairs, doi_ra, layout, value_name, extra=None):
    frames = []
    lst = pairs["lst_hr"].to_numpy(float)
    for element, pulse, col, snr_col in layout:
        frame = {"lst_hr": lst, "ra_offset_hr": hour_offset(doi_ra, lst),
                 "element": np.full(lst.size, element, dtype=object)}
        if pulse is not None:
            frame["pulse"] = np.full(lst.size, pulse, dtype=object)
        frame[value_name] = pairs[col].to_numpy(float)
        if snr_col is not None:
            frame["snr_db"] = pairs[snr_col].to_numpy(float)
        frames.append(pd.DataFrame(frame))
    out = pd.concat(frames, ignore_index=True)
    return out.sort_values(["lst_hr", "element"], kind="mergesort").reset_index(drop=True)


def report_tables(pairs: pd.DataFrame, histograms: dict, obs: ObservatoryConfig,
                  doi_ra: float = DEFAULT_DOI_RA, phase_tol: float = 0.18, dec=None,
                  doi_profile: pd.DataFrame | None = None) -> dict[str, pd.DataFrame]:
    lst = pairs["lst_hr"].to_numpy(float) if len(pairs) else np.empty(0)
    off = hour_offset(doi_ra, lst)
    tables = {"phase_vs_ra": _phase_table(pairs, obs, doi_ra, phase_tol, dec),
              "sigma_vs_ra": _sigma_table(histograms)}
    if len(pairs):
        tables["noise954_vs_ra"] = _long_table(pairs, doi_ra, [
            ("East", "f0", "segnoise_e0_db", "snr_e0_db"), ("West", "f0", "segnoise_w0_db", "snr_w0_db"),
            ("East", "fdf", "segnoise_edf_db", "snr_edf_db"),
            ("West", "fdf", "segnoise_wdf_db", "snr_wdf_db")], "seg_noise_db")
        tables["band50_vs_ra"] = _long_table(pairs, doi_ra, [
            ("East", None, "band50_e_db", None), ("West", None, "band50_w_db", None)], "band50_db")
        f0 = pairs["f0_hz"].to_numpy(float)
        df = pairs["df_hz"].to_numpy(float)
        tables["mjd_freq_vs_ra"] = pd.DataFrame({
            "lst_hr": lst, "ra_offset_hr": off, "ra_bin": pairs["ra_bin"].to_numpy(np.int64),
            "mjd": pairs["mjd"].to_numpy(float), "f0_mhz": f0 / 1e6, "fdf_mhz": (f0 + df) / 1e6})
        tables["df_vs_ra"] = pd.DataFrame({
            "lst_hr": lst, "ra_offset_hr": off, "ra_bin": pairs["ra_bin"].to_numpy(np.int64),
            "df_khz": df / 1e3})
    else:
        for name in REPORT_TABLES[2:]:
            tables[name] = pd.DataFrame(columns=_REPORT_COLUMNS[name])
    if doi_profile is not None:
        tables["doi_profile"] = doi_profile
    return tables


def export_report(pairs: pd.DataFrame, histograms: dict, out_dir, obs: ObservatoryConfig,
                  doi_ra: float = DEFAULT_DOI_RA, provenance=(), phase_tol: float = 0.18,
                  dec=None, doi_profile: pd.DataFrame | None = None) -> dict[str, Path]:
    """Write the figure-analog tables as ``<name>.csv`` under ``out_dir``.

    Every file starts with the ``provenance`` comment lines.  An empty pair
    set yields header-only files.
    """
    out_dir = ensure_dir(out_dir)
    tables = report_tables(pairs, histograms, obs, doi_ra, phase_tol, dec, doi_profile)
    written = {}
    for name, table in tables.items():
        path = out_dir / f"{name}.csv"
        write_table(table, path, _REPORT_COLUMNS[name], _REPORT_FORMATS, provenance)
        written[name] = path
    return written
