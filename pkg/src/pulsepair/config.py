"""Flat ``key = value`` configuration files.

Keys carry their unit in the name.  Blank lines and ``#`` comments are
ignored.  Sources are declared as ``source.<name>.<key>``.  Unknown keys,
duplicate keys and malformed values raise :class:`ConfigError` naming the
key and line.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .exceptions import ConfigError, DomainError, OutputError
from .geometry import ObservatoryConfig
from .ionosphere import IonoParams
from .secondlevel import FilterSet
from .simulator import ScenarioConfig, SourceSpec


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(text: str) -> int:
    return int(text, 10)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in text.replace(",", " ").split())


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError("expected two numbers")
    return vals


def _ranges(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise ValueError("expected lo-hi ranges")
        out.append((_float(lo), _float(hi)))
    return tuple(out)


def _optional_phase(text: str) -> float | None:
    return None if text.strip().lower() == "random" else _float(text)


OBSERVATORY_KEYS: dict[str, tuple[str, Callable]] = {
    "longitude_east_deg": ("longitude_east", _float),
    "latitude_deg": ("latitude", _float),
    "baseline_wavelengths": ("baseline_wavelengths", _float),
    "reference_freq_mhz": ("reference_freq", _float),
    "pointing_dec_deg": ("pointing_dec", _float),
    "pointing_az_deg": ("pointing_az", _float),
    "element_fwhm_deg": ("element_fwhm", _float),
    "instrumental_delay_ns": ("instrumental_delay", _float),
}

SCENARIO_KEYS: dict[str, tuple[str, Callable]] = {
    "seed": ("seed", _int),
    "mjd_start": ("mjd_start", _float),
    "duration_days": ("duration", _float),
    "segments_mhz": ("segments", _floats),
    "band_noise_floor_db": ("band_noise_floor", _float),
    "lst_window_hr": ("lst_window", _pair),
    "noise_power": ("noise_power", _float),
    "threshold_db": ("threshold_db", _float),
    "noise_window": ("noise_window", _int),
    "chunk_epochs": ("chunk_epochs", _int),
}

SOURCE_KEYS: dict[str, tuple[str, Callable]] = {
    "kind": ("kind", str),
    "ra_hr": ("ra", _float),
    "dec_deg": ("dec", _float),
    "phase_rad": ("phase", _optional_phase),
    "snr_db": ("snr_db", _float),
    "df_min_hz": ("df_min", _float),
    "df_max_hz": ("df_max", _float),
    "cadence_per_hr": ("cadence", _float),
    "flux_band_db": ("flux_band_db", _float),
    "populous_bins": ("populous_bins", _int),
    "freq_mhz": ("freq_mhz", _float),
}

FILTER_KEYS: dict[str, tuple[str, Callable]] = {
    "df_min_hz": ("df_min", _float),
    "df_max_hz": ("df_max", _float),
    "ddf_phase_window_rad": ("ddf_phase_window", _float),
    "pulse_phase_window_rad": ("pulse_phase_window", _float),
    "llsnr_pulse_threshold": ("llsnr_pulse_threshold", _float),
    "llsnr_pair_threshold": ("llsnr_pair_threshold", _float),
    "rfi_margin_segments": ("rfi_margin_segments", _int),
    "rfi_population_limit": ("rfi_population_limit", _int),
    "rfi_window_hr": ("rfi_window_hours", _float),
    "freq_ranges_mhz": ("freq_ranges", _ranges),
    "detection_threshold_db": ("detection_threshold_db", _float),
}

IONO_KEYS: dict[str, tuple[str, Callable]] = {
    "b_field_t": ("b_field", _float),
    "tec_per_m2": ("tec", _float),
    "tec_rate_per_m2_s": ("tec_rate", _float),
    "refraction_100mhz_deg": ("refraction_100mhz", _float),
}

# observatory fields that have no default
_REQUIRED_OBS = ("longitude_east_deg", "latitude_deg")


@dataclass(frozen=True)
class RawConfig:
    """Parsed ``key -> (value text, line number)`` plus the file it came from."""

    entries: dict
    path: str = "<string>"

    def digest(self) -> str:
        """SHA-256 over the sorted, whitespace-normalised key/value lines."""
        text = "\n".join(f"{k}={' '.join(v.split())}" for k, (v, _) in sorted(self.entries.items()))
        return hashlib.sha256(text.encode()).hexdigest()


def parse_text(text: str, path: str = "<string>") -> RawConfig:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = (value.strip(), lineno)
    return RawConfig(entries, path)


def read_config(path) -> RawConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_text(text, str(path))


def _convert(raw: RawConfig, key: str, conv: Callable):
    value, lineno = raw.entries[key]
    try:
        return conv(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{raw.path}:{lineno}: bad value for {key!r}: {value!r} ({exc})") from None


def _reject_unknown(raw: RawConfig, allowed) -> None:
    for key, (_, lineno) in raw.entries.items():
        if key.startswith("source."):
            parts = key.split(".")
            if "source" in allowed and len(parts) == 3 and parts[2] in SOURCE_KEYS and parts[1]:
                continue
        elif key in allowed:
            continue
        raise ConfigError(f"{raw.path}:{lineno}: unknown key {key!r}")


def _build(raw: RawConfig, table: dict, factory, what: str, **extra):
    kwargs = dict(extra)
    for key, (field_name, conv) in table.items():
        if key in raw.entries:
            kwargs[field_name] = _convert(raw, key, conv)
    try:
        return factory(**kwargs)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{raw.path}: invalid {what}: {exc}") from None


def observatory_from(raw: RawConfig) -> ObservatoryConfig:
    for key in _REQUIRED_OBS:
        if key not in raw.entries:
            raise ConfigError(f"{raw.path}: missing required key {key!r}")
    return _build(raw, OBSERVATORY_KEYS, ObservatoryConfig, "observatory")


def sources_from(raw: RawConfig) -> tuple[SourceSpec, ...]:
    names: list[str] = []
    for key in raw.entries:
        if key.startswith("source."):
            name = key.split(".")[1]
            if name not in names:
                names.append(name)
    out = []
    for name in names:
        sub = RawConfig({k.split(".", 2)[2]: v for k, v in raw.entries.items()
                         if k.startswith(f"source.{name}.")}, raw.path)
        if "kind" not in sub.entries:
            raise ConfigError(f"{raw.path}: source {name!r} has no kind")
        out.append(_build(sub, SOURCE_KEYS, SourceSpec, f"source {name!r}", name=name))
    return tuple(out)


def scenario_from(raw: RawConfig, seed: int | None = None) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig`; ``seed`` overrides the file's value."""
    _reject_unknown(raw, set(OBSERVATORY_KEYS) | set(SCENARIO_KEYS) | {"source"})
    for key in ("mjd_start", "duration_days", "segments_mhz"):
        if key not in raw.entries:
            raise ConfigError(f"{raw.path}: missing required key {key!r}")
    obs = observatory_from(raw)
    extra = {"obs": obs, "sources": sources_from(raw)}
    if seed is not None:
        extra["seed"] = int(seed)
    elif "seed" not in raw.entries:
        raise ConfigError(f"{raw.path}: no seed in config and none given")
    table = dict(SCENARIO_KEYS)
    if seed is not None:
        table.pop("seed")
    return _build(raw, table, ScenarioConfig, "scenario", **extra)


def observatory_only(raw: RawConfig) -> ObservatoryConfig:
    """Observatory section of a file that may also describe a scenario."""
    _reject_unknown(raw, set(OBSERVATORY_KEYS) | set(SCENARIO_KEYS) | {"source"})
    return observatory_from(raw)


def filters_from(raw: RawConfig) -> FilterSet:
    _reject_unknown(raw, set(FILTER_KEYS))
    return _build(raw, FILTER_KEYS, FilterSet, "filter set")


def iono_from(raw: RawConfig) -> IonoParams:
    _reject_unknown(raw, set(IONO_KEYS))
    return _build(raw, IONO_KEYS, IonoParams, "ionosphere parameters")


def format_filters(fs: FilterSet) -> str:
    """Inverse of :func:`filters_from`."""
    ranges = ", ".join(f"{lo:g}-{hi:g}" for lo, hi in fs.freq_ranges)
    lines = [
        f"df_min_hz = {fs.df_min:g}", f"df_max_hz = {fs.df_max:g}",
        f"ddf_phase_window_rad = {fs.ddf_phase_window:.17g}",
        f"pulse_phase_window_rad = {fs.pulse_phase_window:.17g}",
        f"llsnr_pulse_threshold = {fs.llsnr_pulse_threshold:g}",
        f"llsnr_pair_threshold = {fs.llsnr_pair_threshold:g}",
        f"rfi_margin_segments = {fs.rfi_margin_segments}",
        f"rfi_population_limit = {fs.rfi_population_limit}",
        f"rfi_window_hr = {fs.rfi_window_hours:g}",
        f"freq_ranges_mhz = {ranges}",
        f"detection_threshold_db = {fs.detection_threshold_db:g}",
    ]
    return "\n".join(lines) + "\n"
