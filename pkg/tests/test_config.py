import pytest

from pulsepair.config import (filters_from, format_filters, iono_from, observatory_only,
                              parse_text, scenario_from)
from pulsepair.exceptions import ConfigError
from pulsepair.secondlevel import FilterSet

BASE = """\
longitude_east_deg = -79.84
latitude_deg = 38.43
seed = 3
mjd_start = 60498.64
duration_days = 0.01
segments_mhz = 1420.0, 1420.45
"""


def test_scenario_roundtrip():
    cfg = scenario_from(parse_text(BASE + "source.a.kind = celestial_pulse_pair\n"
                                          "source.a.ra_hr = 5.25\nsource.a.dec_deg = -4.3\n"
                                          "source.a.df_min_hz = 3e5\nsource.a.df_max_hz = 5e5\n"))
    assert cfg.seed == 3 and cfg.segments == (1420.0, 1420.45)
    assert cfg.obs.longitude_east == -79.84
    assert cfg.sources[0].name == "a" and cfg.sources[0].ra == 5.25
    assert scenario_from(parse_text(BASE), seed=9).seed == 9


def test_unknown_key_names_line():
    with pytest.raises(ConfigError, match=r"<string>:7: unknown key 'baseline_wavlengths'"):
        scenario_from(parse_text(BASE + "baseline_wavlengths = 33\n"))


def test_duplicate_and_malformed():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match=":1: expected"):
        parse_text("just words\n")
    with pytest.raises(ConfigError, match="bad value for 'duration_days'"):
        scenario_from(parse_text(BASE.replace("0.01", "a while")))


def test_missing_required():
    with pytest.raises(ConfigError, match="latitude_deg"):
        observatory_only(parse_text("longitude_east_deg = 1\n"))
    with pytest.raises(ConfigError, match="seed"):
        scenario_from(parse_text(BASE.replace("seed = 3\n", "")))


def test_unreachable_df_names_source():
    text = BASE + ("source.wide.kind = celestial_pulse_pair\nsource.wide.ra_hr = 5.25\n"
                   "source.wide.dec_deg = -4.3\nsource.wide.df_min_hz = 2e6\n"
                   "source.wide.df_max_hz = 3e6\n")
    with pytest.raises(ConfigError, match="wide"):
        scenario_from(parse_text(text))


def test_digest_ignores_layout():
    a = parse_text("a = 1\nb = 2, 3\n")
    b = parse_text("# note\nb =   2,  3\n\na=1   # trailing\n")
    assert a.digest() == b.digest()
    assert a.digest() != parse_text("a = 1\nb = 2, 4\n").digest()


def test_filters_roundtrip():
    fs = FilterSet(df_min=2e5, freq_ranges=((1400.0, 1410.0),), llsnr_pair_threshold=-4.0)
    assert filters_from(parse_text(format_filters(fs))) == fs
    assert filters_from(parse_text(format_filters(FilterSet()))) == FilterSet()
    with pytest.raises(ConfigError, match="unknown key 'seed'"):
        filters_from(parse_text("seed = 1\n"))


def test_iono_keys():
    p = iono_from(parse_text("b_field_t = 4e-5\ntec_per_m2 = 2e17\n"))
    assert p.b_field == 4e-5 and p.tec == 2e17
    with pytest.raises(ConfigError):
        iono_from(parse_text("tec_per_m2 = -1\n"))
