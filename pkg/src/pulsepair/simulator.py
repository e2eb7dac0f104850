"""Seeded synthesis of two-element observations at segment baseband.

Each observed integration produces, for every configured segment, one
256-sample complex block per element plus one 50 MHz band-power scalar per
element.  Noise is circular complex Gaussian; celestial pulse pairs carry
the geometric inter-element phase of their source, terrestrial emitters an
LST-independent one.

Randomness comes from a single master seed.  The splitting rule is fixed:

* noise for grid segment ``s`` in chunk ``c``: ``SeedSequence(seed, spawn_key=(0, s, c))``
* band-power fluctuation in chunk ``c``:      ``SeedSequence(seed, spawn_key=(1, c))``
* event schedule of source number ``i``:      ``SeedSequence(seed, spawn_key=(2, i))``

where a chunk is ``chunk_epochs`` consecutive *observed* integrations.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
import pandas as pd

from .exceptions import ConfigError, InjectionError, SchemaError
from .firstlevel import (BAND_TOP_HZ, BIN_BANDWIDTH, ELEMENTS, INTEGRATION_TIME, N_BINS,
                         SEGMENT_BANDWIDTH, SEGMENT_GRID_ORIGIN_HZ, IqBlock, PulseDetector,
                         bin_frequency_hz, events_frame, segment_for_mhz, sort_events)
from .geometry import (ObservatoryConfig, SkyDirection, angular_offset, beam_gain,
                       expected_ew_phase, instrumental_phase, mjd_to_lst, wrap_phase)

KINDS = ("celestial_pulse_pair", "terrestrial_rfi", "natural_broadband")

BAND50_BANDWIDTH = 50e6
#: fractional radiometer fluctuation of one 50 MHz, one-integration measurement
RADIOMETER_SIGMA = 1.0 / math.sqrt(BAND50_BANDWIDTH * INTEGRATION_TIME)

_TWO_PI = 2.0 * math.pi
_BAND_LO_MHZ = SEGMENT_GRID_ORIGIN_HZ / 1e6
_BAND_HI_MHZ = BAND_TOP_HZ / 1e6


@dataclass(frozen=True)
class SourceSpec:
    """One emitter in a scenario.

    ``ra`` (hours) and ``dec`` (deg) locate celestial kinds.  ``phase`` is
    the fixed geometric inter-element phase of a terrestrial emitter; None
    draws a fresh one per event.  Pulse pairs use a spacing drawn from
    ``[df_min, df_max]`` Hz; a terrestrial source without a spacing emits
    single tones.  ``populous_bins > 0`` turns a terrestrial event into a
    burst lighting that many bins of one segment.  ``freq_mhz`` pins the
    (lower) tone to the nearest bin; otherwise it is drawn at random.
    """

    kind: str
    ra: float | None = None
    dec: float | None = None
    phase: float | None = None
    snr_db: float = 20.0
    df_min: float | None = None
    df_max: float | None = None
    cadence: float = 0.0
    flux_band_db: float = 0.0
    populous_bins: int = 0
    freq_mhz: float | None = None
    name: str = ""

    def __post_init__(self):
        label = self.name or self.kind
        if self.kind not in KINDS:
            raise ConfigError(f"source {label!r}: unknown kind {self.kind!r}")
        if self.kind != "terrestrial_rfi" and (self.ra is None or self.dec is None):
            raise ConfigError(f"source {label!r}: {self.kind} needs ra and dec")
        if not math.isfinite(self.snr_db):
            raise ConfigError(f"source {label!r}: snr_db must be finite")
        if not (self.cadence >= 0 and math.isfinite(self.cadence)):
            raise ConfigError(f"source {label!r}: cadence must be >= 0")
        if (self.df_min is None) != (self.df_max is None):
            raise ConfigError(f"source {label!r}: give both df_min and df_max")
        if self.df_min is not None and not 0 < self.df_min <= self.df_max:
            raise ConfigError(f"source {label!r}: need 0 < df_min <= df_max")
        if self.kind == "celestial_pulse_pair" and self.df_min is None:
            raise ConfigError(f"source {label!r}: pulse pairs need a df range")
        if not 0 <= self.populous_bins <= N_BINS:
            raise ConfigError(f"source {label!r}: populous_bins must be in [0, {N_BINS}]")

    @property
    def direction(self) -> SkyDirection | None:
        return None if self.ra is None else SkyDirection(self.ra, self.dec)

    @property
    def is_pair(self) -> bool:
        return self.df_min is not None and self.populous_bins == 0


@dataclass(frozen=True)
class ScenarioConfig:
    obs: ObservatoryConfig
    duration: float
    mjd_start: float
    seed: int
    segments: tuple
    sources: tuple = ()
    band_noise_floor: float = 0.0
    lst_window: tuple | None = None
    noise_power: float = 1.0
    threshold_db: float = 8.5
    noise_window: int = 64
    chunk_epochs: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(float(s) for s in self.segments))
        object.__setattr__(self, "sources", tuple(self.sources))
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ConfigError("duration must be >= 0 days")
        if not self.segments:
            raise ConfigError("at least one segment is required")
        for s in self.segments:
            if not _BAND_LO_MHZ <= s <= _BAND_HI_MHZ:
                raise ConfigError(f"segment {s} MHz outside [{_BAND_LO_MHZ:g}, {_BAND_HI_MHZ:g}] MHz")
        idx = self.segment_indices
        if len(set(idx)) != len(idx):
            raise ConfigError("two segments map to the same 954 Hz grid slot")
        if self.noise_window < 1 or self.chunk_epochs % self.noise_window:
            raise ConfigError("chunk_epochs must be a positive multiple of noise_window")
        if not self.noise_power > 0:
            raise ConfigError("noise_power must be > 0")
        if self.lst_window is not None:
            lo, hi = self.lst_window
            object.__setattr__(self, "lst_window", (float(lo) % 24.0, float(hi) % 24.0))
        for i, src in enumerate(self.sources):
            if src.is_pair and not _pair_slots(idx, src.df_min, src.df_max):
                raise ConfigError(
                    f"source {src.name or i!r}: no segment pair can host df in "
                    f"[{src.df_min:g}, {src.df_max:g}] Hz")
            if src.freq_mhz is not None:
                seg = segment_for_mhz(src.freq_mhz)
                if seg not in idx:
                    raise ConfigError(
                        f"source {src.name or i!r}: freq {src.freq_mhz} MHz is not inside a "
                        "synthesized segment")

    @property
    def segment_indices(self) -> tuple[int, ...]:
        return tuple(segment_for_mhz(s) for s in self.segments)


class BandPower(NamedTuple):
    mjd: float
    lst: float
    east_db: float
    west_db: float


class Epoch(NamedTuple):
    mjd: float
    lst: float
    band_power: BandPower
    blocks: list


@dataclass
class Chunk:
    index: int
    start: int
    mjd: np.ndarray
    lst: np.ndarray
    band_power: np.ndarray            # (n, 2) dB, East then West
    samples: dict                      # segment slot -> (n, 2, 256) complex64


@dataclass
class SimulationResult:
    events: pd.DataFrame
    band_power: pd.DataFrame
    truth: pd.DataFrame
    n_epochs: int


# --------------------------------------------------------------------------
# building blocks

def tone(bin_index, coefficient) -> np.ndarray:
    """256 samples whose channelized spectrum is ``coefficient`` in ``bin_index``."""
    n = np.arange(N_BINS)
    k = np.asarray(bin_index)[..., None]
    c = np.asarray(coefficient, dtype=complex)[..., None]
    return c * np.exp(1j * _TWO_PI * (k - N_BINS // 2) * n / N_BINS) / math.sqrt(N_BINS)


def tone_coefficient(snr_lin, phase, noise_power: float = 1.0):
    """Bin-domain amplitude for a tone of linear SNR ``snr_lin`` against ``noise_power``."""
    return np.sqrt(np.asarray(snr_lin) * noise_power) * np.exp(1j * np.asarray(phase))


def pulse_pair_tones(src: SourceSpec, lst: float, obs: ObservatoryConfig, f0_hz: float,
                     df_hz: float, carrier_phases=(0.0, 0.0), noise_power: float = 1.0):
    """Per-element bin coefficients for one celestial pulse pair.

    Returns ``[(element, rf_hz, coefficient), ...]`` or an empty list when
    the source is beyond three FWHM (the pulse is not received).  The West
    tone trails the East one by the predicted East-West phase.
    """
    direction = src.direction
    offset = float(angular_offset(direction, lst, obs))
    if offset > 3.0 * obs.element_fwhm:
        return []
    snr_lin = 10.0 ** (src.snr_db / 10.0) * beam_gain(offset, obs.element_fwhm)
    out = []
    for rf, theta in ((f0_hz, carrier_phases[0]), (f0_hz + df_hz, carrier_phases[1])):
        dphi = float(expected_ew_phase(direction, lst, obs, rf / 1e6))
        out.append(("East", rf, complex(tone_coefficient(snr_lin, theta, noise_power))))
        out.append(("West", rf, complex(tone_coefficient(snr_lin, theta - dphi, noise_power))))
    return out


def terrestrial_tones(src: SourceSpec, obs: ObservatoryConfig, freqs_hz, carrier_phases,
                      geometric_phase: float, noise_power: float = 1.0):
    """Coefficients for terrestrial tones sharing one fixed arrival direction."""
    snr_lin = 10.0 ** (src.snr_db / 10.0)
    out = []
    for rf, theta in zip(freqs_hz, carrier_phases):
        dphi = float(wrap_phase(geometric_phase + instrumental_phase(rf / 1e6, obs)))
        out.append(("East", rf, complex(tone_coefficient(snr_lin, theta, noise_power))))
        out.append(("West", rf, complex(tone_coefficient(snr_lin, theta - dphi, noise_power))))
    return out


def _add_tones(blocks: dict, tones) -> dict:
    from .firstlevel import locate_frequency

    out = {key: np.array(val, dtype=complex, copy=True) for key, val in blocks.items()}
    for element, rf, coef in tones:
        seg, k = locate_frequency(rf)
        key = (element, int(seg))
        if key not in out:
            raise InjectionError(f"{rf:.3f} Hz ({element}) falls outside the supplied segments")
        out[key] = out[key] + tone(int(k), coef)
    return out


def inject_pulse_pair(blocks: dict, src: SourceSpec, lst: float, obs: ObservatoryConfig,
                      f0_hz: float, df_hz: float, carrier_phases=(0.0, 0.0),
                      noise_power: float = 1.0) -> dict:
    """Add one celestial pulse pair to the blocks of a single integration.

    ``blocks`` maps ``(element, segment_index)`` to 256 complex samples.
    """
    return _add_tones(blocks, pulse_pair_tones(src, lst, obs, f0_hz, df_hz,
                                               carrier_phases, noise_power))


def inject_rfi(blocks: dict, src: SourceSpec, obs: ObservatoryConfig, freqs_hz,
               carrier_phases=None, geometric_phase: float | None = None,
               noise_power: float = 1.0) -> dict:
    """Add terrestrial tones at ``freqs_hz`` with a fixed inter-element phase.

    A source with zero cadence never emits, so the blocks come back unchanged.
    """
    if src.cadence == 0:
        return {key: np.array(val, copy=True) for key, val in blocks.items()}
    freqs = list(np.atleast_1d(freqs_hz))
    phases = [0.0] * len(freqs) if carrier_phases is None else list(carrier_phases)
    psi = src.phase if geometric_phase is None else geometric_phase
    if psi is None:
        raise InjectionError("terrestrial source without a fixed phase needs geometric_phase")
    return _add_tones(blocks, terrestrial_tones(src, obs, freqs, phases, psi, noise_power))


def broadband_excess(sources, lst, obs: ObservatoryConfig):
    """Fractional system-noise increase from natural broadband sources."""
    lst = np.asarray(lst, dtype=float)
    excess = np.zeros(lst.shape)
    for src in sources:
        if src.kind != "natural_broadband" or src.flux_band_db == 0:
            continue
        g = beam_gain(angular_offset(src.direction, lst, obs), obs.element_fwhm)
        excess = excess + g * (10.0 ** (src.flux_band_db / 10.0) - 1.0)
    return excess


def band_power(floor_db, broadband=(), narrowband_snr=(), fluctuation=0.0):
    """50 MHz band power (dB) for one element and integration.

    ``broadband`` holds ``(gain, flux_db)`` pairs, ``narrowband_snr`` the
    linear bin SNRs of tones present in the integration, ``fluctuation`` a
    standard-normal draw scaling the radiometer noise.
    """
    excess = sum(g * (10.0 ** (f / 10.0) - 1.0) for g, f in broadband)
    excess += sum(narrowband_snr) * BIN_BANDWIDTH / BAND50_BANDWIDTH
    return _band_db(floor_db, excess, fluctuation)


def _band_db(floor_db, excess, fluctuation):
    lin = 10.0 ** (np.asarray(floor_db) / 10.0) * (1.0 + np.asarray(excess)) \
        * (1.0 + RADIOMETER_SIGMA * np.asarray(fluctuation))
    out = 10.0 * np.log10(lin)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# scheduling

def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def observed_epochs(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """MJDs (rounded to 1e-9 day) and LSTs of the integrations that are observed."""
    n_total = int(math.floor(cfg.duration * 86400.0 / INTEGRATION_TIME + 1e-9))
    step = INTEGRATION_TIME / 86400.0
    mjds, lsts = [], []
    for lo in range(0, n_total, 1 << 20):
        k = np.arange(lo, min(n_total, lo + (1 << 20)), dtype=np.float64)
        mjd = np.round(cfg.mjd_start + k * step, 9)
        lst = mjd_to_lst(mjd, cfg.obs.longitude_east)
        if cfg.lst_window is not None:
            a, b = cfg.lst_window
            keep = (lst >= a) & (lst < b) if a <= b else (lst >= a) | (lst < b)
            mjd, lst = mjd[keep], lst[keep]
        mjds.append(mjd)
        lsts.append(lst)
    if not mjds:
        return np.empty(0), np.empty(0)
    return np.concatenate(mjds), np.concatenate(lsts)


def _pair_slots(seg_indices, df_min, df_max):
    half_span = (N_BINS - 1) * BIN_BANDWIDTH
    out = []
    for a, sa in enumerate(seg_indices):
        for b, sb in enumerate(seg_indices):
            centre = (sb - sa) * SEGMENT_BANDWIDTH
            if centre < 0:
                continue
            if centre - half_span <= df_max and centre + half_span >= df_min:
                out.append((a, b))
    return out


def _draw_pair_bins(rng, seg_indices, slots, df_min, df_max, fixed_f0=None):
    from .firstlevel import locate_frequency

    for _ in range(1000):
        if fixed_f0 is not None:
            seg0, k0 = (int(v) for v in locate_frequency(fixed_f0))
            choices = [(a, b) for a, b in slots if seg_indices[a] == seg0]
            if not choices:
                break
            a, b = choices[rng.integers(len(choices))]
        else:
            a, b = slots[rng.integers(len(slots))]
            k0 = int(rng.integers(N_BINS))
        centre = (seg_indices[b] - seg_indices[a]) * SEGMENT_BANDWIDTH
        lo = max(0, math.ceil((df_min - centre) / BIN_BANDWIDTH + k0 - 1e-9))
        hi = min(N_BINS - 1, math.floor((df_max - centre) / BIN_BANDWIDTH + k0 + 1e-9))
        if a == b:
            lo = max(lo, k0 + 1)
        if lo > hi:
            continue
        k1 = int(rng.integers(lo, hi + 1))
        f0 = float(bin_frequency_hz(seg_indices[a], k0))
        f1 = float(bin_frequency_hz(seg_indices[b], k1))
        return f0, f1 - f0
    raise InjectionError(f"cannot place a pulse pair with df in [{df_min:g}, {df_max:g}] Hz")


def plan_injections(cfg: ScenarioConfig, mjd: np.ndarray, lst: np.ndarray):
    """Draw every source's events.

    Returns ``(tones, truth)``: ``tones`` is a dict of aligned arrays
    (position, slot, element, bin, coefficient, snr_lin) and ``truth`` one
    row per scheduled event.
    """
    seg_indices = cfg.segment_indices
    slot_of = {s: i for i, s in enumerate(seg_indices)}
    n_obs = mjd.size
    hours = n_obs * INTEGRATION_TIME / 3600.0
    tone_rows = []
    truth = []
    for i, src in enumerate(cfg.sources):
        if src.kind == "natural_broadband" or src.cadence == 0 or n_obs == 0:
            continue
        rng = _rng(cfg.seed, 2, i)
        n_events = int(rng.poisson(src.cadence * hours))
        positions = np.sort(rng.integers(0, n_obs, n_events))
        slots = _pair_slots(seg_indices, src.df_min, src.df_max) if src.is_pair else None
        fixed_f0 = None
        if src.freq_mhz is not None:
            seg = segment_for_mhz(src.freq_mhz)
            k = int(round((src.freq_mhz * 1e6 - SEGMENT_GRID_ORIGIN_HZ
                           - seg * SEGMENT_BANDWIDTH) / BIN_BANDWIDTH)) + N_BINS // 2
            fixed_f0 = float(bin_frequency_hz(seg, min(max(k, 0), N_BINS - 1)))
        for pos in positions.tolist():
            t_lst = float(lst[pos])
            if src.is_pair:
                f0, df = _draw_pair_bins(rng, seg_indices, slots, src.df_min, src.df_max, fixed_f0)
                freqs = [f0, f0 + df]
            elif src.populous_bins:
                seg = segment_for_mhz(src.freq_mhz) if src.freq_mhz is not None \
                    else seg_indices[int(rng.integers(len(seg_indices)))]
                bins = np.sort(rng.choice(N_BINS, src.populous_bins, replace=False))
                freqs = [float(f) for f in bin_frequency_hz(seg, bins)]
                f0, df = freqs[0], float("nan")
            else:
                if fixed_f0 is not None:
                    f0 = fixed_f0
                else:
                    seg = seg_indices[int(rng.integers(len(seg_indices)))]
                    f0 = float(bin_frequency_hz(seg, int(rng.integers(N_BINS))))
                freqs, df = [f0], float("nan")
            carriers = rng.uniform(0.0, _TWO_PI, len(freqs))
            if src.kind == "celestial_pulse_pair":
                tones = pulse_pair_tones(src, t_lst, cfg.obs, f0, df, carriers, cfg.noise_power)
                expected = float(expected_ew_phase(src.direction, t_lst, cfg.obs, f0 / 1e6)) \
                    if tones else float("nan")
                gain = beam_gain(float(angular_offset(src.direction, t_lst, cfg.obs)),
                                 cfg.obs.element_fwhm)
            else:
                psi = src.phase if src.phase is not None else float(rng.uniform(-math.pi, math.pi))
                tones = terrestrial_tones(src, cfg.obs, freqs, carriers, psi, cfg.noise_power)
                expected = float(wrap_phase(psi + instrumental_phase(f0 / 1e6, cfg.obs)))
                gain = 1.0
            snr_lin = 10.0 ** (src.snr_db / 10.0) * gain
            truth.append({
                "source": i, "name": src.name, "kind": src.kind, "position": pos,
                "mjd": float(mjd[pos]), "lst_hr": t_lst, "f0_hz": f0, "df_hz": df,
                "n_tones": len(freqs), "snr_db": 10.0 * math.log10(snr_lin) if snr_lin > 0 else -np.inf,
                "expected_dphi0_rad": expected, "injected": bool(tones),
            })
            from .firstlevel import locate_frequency
            for element, rf, coef in tones:
                seg, k = locate_frequency(rf)
                tone_rows.append((pos, slot_of[int(seg)], ELEMENTS.index(element), int(k),
                                  coef, snr_lin))
    if tone_rows:
        pos, slot, el, k, coef, snr = zip(*tone_rows)
    else:
        pos = slot = el = k = coef = snr = ()
    tones = {
        "position": np.asarray(pos, dtype=np.int64),
        "slot": np.asarray(slot, dtype=np.int64),
        "element": np.asarray(el, dtype=np.int64),
        "bin": np.asarray(k, dtype=np.int64),
        "coefficient": np.asarray(coef, dtype=complex),
        "snr_lin": np.asarray(snr, dtype=float),
    }
    truth_cols = ["source", "name", "kind", "position", "mjd", "lst_hr", "f0_hz", "df_hz",
                  "n_tones", "snr_db", "expected_dphi0_rad", "injected"]
    return tones, pd.DataFrame(truth, columns=truth_cols)


# --------------------------------------------------------------------------
# synthesis

def iter_chunks(cfg: ScenarioConfig, *, _schedule=None) -> Iterator[Chunk]:
    """Generate the run chunk by chunk, in epoch order."""
    mjd, lst = _schedule if _schedule is not None else observed_epochs(cfg)
    tones, _ = plan_injections(cfg, mjd, lst)
    seg_indices = cfg.segment_indices
    n_obs = mjd.size
    order = np.argsort(tones["position"], kind="stable")
    tones = {k: v[order] for k, v in tones.items()}
    t_pos = tones["position"]
    C = cfg.chunk_epochs
    for c, start in enumerate(range(0, n_obs, C)):
        stop = min(n_obs, start + C)
        n = stop - start
        c_lst = lst[start:stop]
        excess = broadband_excess(cfg.sources, c_lst, cfg.obs)
        sigma = np.sqrt(cfg.noise_power * (1.0 + excess) / 2.0).astype(np.float32)
        lo, hi = np.searchsorted(t_pos, [start, stop])
        sel = slice(lo, hi)
        nb = np.zeros((n, 2))
        np.add.at(nb, (t_pos[sel] - start, tones["element"][sel]),
                  tones["snr_lin"][sel] * BIN_BANDWIDTH / BAND50_BANDWIDTH)
        z = _rng(cfg.seed, 1, c).standard_normal((n, 2))
        bp = _band_db(cfg.band_noise_floor, excess[:, None] + nb, z)
        samples = {}
        for slot, seg in enumerate(seg_indices):
            noise = _rng(cfg.seed, 0, seg, c).standard_normal((n, 2, N_BINS, 2), dtype=np.float32)
            x = noise.view(np.complex64)[..., 0] * sigma[:, None, None]
            m = tones["slot"][sel] == slot
            if np.any(m):
                waves = tone(tones["bin"][sel][m], tones["coefficient"][sel][m]).astype(np.complex64)
                np.add.at(x, (t_pos[sel][m] - start, tones["element"][sel][m]), waves)
            samples[slot] = x
        yield Chunk(index=c, start=start, mjd=mjd[start:stop], lst=c_lst,
                    band_power=bp, samples=samples)


def synthesize_run(cfg: ScenarioConfig) -> Iterator[Epoch]:
    """Canonical per-integration stream: segments in config order, East before West."""
    seg_indices = cfg.segment_indices
    for chunk in iter_chunks(cfg):
        for j in range(chunk.mjd.size):
            mjd = float(chunk.mjd[j])
            bp = BandPower(mjd, float(chunk.lst[j]), float(chunk.band_power[j, 0]),
                           float(chunk.band_power[j, 1]))
            blocks = []
            for slot, seg in enumerate(seg_indices):
                for e, element in enumerate(ELEMENTS):
                    blocks.append(IqBlock(element, mjd, seg, chunk.samples[slot][j, e],
                                          band_power=float(chunk.band_power[j, e])))
            yield Epoch(mjd, bp.lst, bp, blocks)


def simulate(cfg: ScenarioConfig) -> SimulationResult:
    """Synthesize and run first-level detection chunk by chunk."""
    mjd, lst = observed_epochs(cfg)
    _, truth = plan_injections(cfg, mjd, lst)
    detector = PulseDetector(threshold_db=cfg.threshold_db, noise_window=cfg.noise_window).fit()
    frames, bands = [], []
    for chunk in iter_chunks(cfg, _schedule=(mjd, lst)):
        for slot, seg in enumerate(cfg.segment_indices):
            for e, element in enumerate(ELEMENTS):
                frames.append(detector.detect_stream(
                    chunk.samples[slot][:, e, :], mjd=chunk.mjd, element=element,
                    segment_index=seg, band_power=chunk.band_power[:, e]))
        bands.append(pd.DataFrame({"mjd": chunk.mjd, "lst_hr": chunk.lst,
                                   "band50_e_db": chunk.band_power[:, 0],
                                   "band50_w_db": chunk.band_power[:, 1]}))
    events = sort_events(pd.concat(frames, ignore_index=True)) if frames else events_frame()
    band = pd.concat(bands, ignore_index=True) if bands else pd.DataFrame(
        columns=["mjd", "lst_hr", "band50_e_db", "band50_w_db"])
    return SimulationResult(events=events, band_power=band, truth=truth, n_epochs=int(mjd.size))


# --------------------------------------------------------------------------
# raw block files

IQ_MAGIC = b"PPIQSTRM"
IQ_RECORD = np.dtype([("mjd", "<f8"), ("element", "u1"), ("segment_index", "<i4"),
                      ("band50_db", "<f8"), ("iq", "<f4", (2 * N_BINS,))])


def write_iq_stream(cfg: ScenarioConfig, path, header: dict | None = None) -> int:
    """Write the raw stream: magic, u32 header length, JSON header, fixed records.

    Each record holds mjd (f8), element (u1, 0=East), grid segment index
    (i4), 50 MHz band power in dB (f8) and 256 interleaved float32 I/Q
    pairs.  Returns the number of records.
    """
    meta = {"format": "pulsepair-iq", "version": 1, "samples_per_block": N_BINS,
            "sample_rate_hz": SEGMENT_BANDWIDTH, "segments": list(cfg.segment_indices),
            "segment_origin_hz": SEGMENT_GRID_ORIGIN_HZ, "segment_bandwidth_hz": SEGMENT_BANDWIDTH}
    meta.update(header or {})
    blob = json.dumps(meta, sort_keys=True).encode()
    n = 0
    with open(path, "wb") as fh:
        fh.write(IQ_MAGIC + struct.pack("<I", len(blob)) + blob)
        for chunk in iter_chunks(cfg):
            m = chunk.mjd.size
            nseg = len(cfg.segment_indices)
            rec = np.zeros((m, nseg, 2), dtype=IQ_RECORD)
            rec["mjd"] = chunk.mjd[:, None, None]
            rec["element"] = np.array([0, 1], dtype=np.uint8)[None, None, :]
            rec["segment_index"] = np.array(cfg.segment_indices, dtype=np.int32)[None, :, None]
            rec["band50_db"] = chunk.band_power[:, None, :]
            stack = np.stack([chunk.samples[s] for s in range(nseg)], axis=1)  # (m, nseg, 2, 256)
            rec["iq"] = stack.view(np.float32).reshape(m, nseg, 2, 2 * N_BINS)
            fh.write(rec.tobytes())
            n += rec.size
    return n


def read_iq_stream(path) -> tuple[dict, Iterator[IqBlock]]:
    with open(path, "rb") as fh:
        head = fh.read(len(IQ_MAGIC) + 4)
        if len(head) < len(IQ_MAGIC) + 4 or head[:len(IQ_MAGIC)] != IQ_MAGIC:
            raise SchemaError(f"{path}: not a pulsepair IQ stream")
        (length,) = struct.unpack("<I", head[len(IQ_MAGIC):])
        meta = json.loads(fh.read(length))
        offset = fh.tell()
    records = np.memmap(path, dtype=IQ_RECORD, mode="r", offset=offset)

    def blocks():
        for r in records:
            iq = np.asarray(r["iq"], dtype=np.float32).view(np.complex64)
            yield IqBlock(ELEMENTS[int(r["element"])], float(r["mjd"]), int(r["segment_index"]),
                          iq.copy(), band_power=float(r["band50_db"]))

    return meta, blocks()
