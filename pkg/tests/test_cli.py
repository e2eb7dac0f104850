import json
import re

import pytest

from pulsepair import ionosphere
from pulsepair.cli import EXIT_CODES, main
from pulsepair.exceptions import PulsePairError
from pulsepair.geometry import fringe_period, mjd_to_lst

SCENARIO = """\
# small scenario
longitude_east_deg = -79.84
latitude_deg = 38.43
seed = 11
mjd_start = 60498.64
duration_days = 0.01
segments_mhz = 1420.0, 1420.45
source.doi.kind = celestial_pulse_pair
source.doi.ra_hr = 5.25375
source.doi.dec_deg = -4.3
source.doi.snr_db = 16
source.doi.cadence_per_hr = 200
source.doi.df_min_hz = 300000
source.doi.df_max_hz = 540000
source.rfi.kind = terrestrial_rfi
source.rfi.phase_rad = random
source.rfi.cadence_per_hr = 100
source.rfi.df_min_hz = 300000
source.rfi.df_max_hz = 540000
"""

ERROR_LINE = re.compile(r"^error: [a-z-]+: \S.*$")


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(SCENARIO)
    return path


def fail(argv, capsys):
    rc = main([str(a) for a in argv])
    err = capsys.readouterr().err.strip().splitlines()
    assert rc != 0 and len(err) == 1 and ERROR_LINE.match(err[0]), err
    fail.last = err[0]
    return rc, err[0].split(":")[1].strip()


def run(argv):
    assert main([str(a) for a in argv]) == 0


def test_staged_matches_composed(cfg, tmp_path, capsys):
    s = tmp_path / "staged"
    run(["simulate", "--config", cfg, "--out", s / "events.csv"])
    run(["pair", "--events", s / "events.csv", "--config", cfg, "--out", s / "pairs.csv"])
    run(["analyze", "--pairs", s / "pairs.csv", "--config", cfg, "--out", s / "report"])
    c = tmp_path / "composed"
    run(["run", "--config", cfg, "--out", c])
    for name in ("events.csv", "pairs.csv", "report/phase_vs_ra.csv", "report/sigma_vs_ra.csv",
                 "report/doi_profile.csv", "report/summary.txt"):
        assert (s / name).read_bytes() == (c / name).read_bytes(), name


def test_rerun_is_byte_identical(cfg, tmp_path):
    run(["run", "--config", cfg, "--out", tmp_path / "a"])
    run(["run", "--config", cfg, "--out", tmp_path / "b"])
    for name in ("events.csv", "pairs.csv", "report/manifest.json"):
        a = (tmp_path / "a" / name).read_text().replace(str(tmp_path / "a"), "")
        b = (tmp_path / "b" / name).read_text().replace(str(tmp_path / "b"), "")
        assert a == b, name


def test_seed_override_changes_output(cfg, tmp_path):
    run(["simulate", "--config", cfg, "--out", tmp_path / "a.csv"])
    run(["simulate", "--config", cfg, "--seed", 12, "--out", tmp_path / "b.csv"])
    a, b = (tmp_path / "a.csv").read_text(), (tmp_path / "b.csv").read_text()
    assert "seed=11" in a and "seed=12" in b and a != b


def test_manifest_contents(cfg, tmp_path):
    run(["simulate", "--config", cfg, "--out", tmp_path / "e.csv"])
    m = json.loads((tmp_path / "e.csv.manifest.json").read_text())
    assert m["stage"] == "simulate" and m["seed"] == 11
    assert len(m["config_sha256"]) == 64
    assert set(m["versions"]) >= {"pulsepair", "numpy", "scipy", "pandas"}
    assert list(m["outputs"].values())[0] == __import__("hashlib").sha256(
        (tmp_path / "e.csv").read_bytes()).hexdigest()


def test_pair_echoes_settings(cfg, tmp_path, capsys):
    run(["simulate", "--config", cfg, "--out", tmp_path / "e.csv"])
    capsys.readouterr()
    run(["pair", "--events", tmp_path / "e.csv", "--config", cfg, "--out", tmp_path / "p.csv"])
    out = capsys.readouterr().out
    assert "ddf_phase" in out and "accepted=" in out


def test_raw_then_detect(cfg, tmp_path):
    run(["simulate", "--config", cfg, "--raw", "--out", tmp_path / "raw.bin"])
    run(["detect", "--in", tmp_path / "raw.bin", "--out", tmp_path / "ev.csv"])
    run(["simulate", "--config", cfg, "--out", tmp_path / "direct.csv"])
    body = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert body(tmp_path / "ev.csv") == body(tmp_path / "direct.csv")


def test_iono_matches_library(capsys):
    run(["iono"])
    lines = capsys.readouterr().out.strip().splitlines()
    want = ionosphere.summary(ionosphere.IonoParams())
    assert [l.split("\t")[0] for l in lines] == [w[0] for w in want]
    for line, (_, value, _) in zip(lines, want):
        assert float(line.split("\t")[1]) == pytest.approx(value, rel=1e-5)
    run(["iono", "--tec", "2e18"])
    assert capsys.readouterr().out.split("\t")[1] == f"{2 * want[0][1]:.6g}"


def test_geom(capsys):
    run(["geom", "--mjd", 51544.5, "--longitude", 0, "--baseline", 33, "--dec", -4.3])
    out = dict(l.split("\t") for l in capsys.readouterr().out.strip().splitlines())
    assert float(out["lst_hr"]) == pytest.approx(mjd_to_lst(51544.5, 0.0), abs=1e-8)
    assert float(out["fringe_period_hr"]) == pytest.approx(fringe_period(33, -4.3), abs=1e-6)


@pytest.mark.parametrize("argv,category", [
    (["bogus"], "usage"),
    (["geom"], "usage"),
    (["iono", "--f0", "-1"], "domain"),
    (["analyze", "--pairs", "/nonexistent/p.csv", "--config", "{cfg}", "--out", "{tmp}/r"], "io"),
    (["simulate", "--config", "/nonexistent.cfg", "--out", "{tmp}/e.csv"], "io"),
])
def test_error_categories(argv, category, cfg, tmp_path, capsys):
    argv = [a.format(cfg=cfg, tmp=tmp_path) for a in argv]
    rc, got = fail(argv, capsys)
    assert got == category and rc == EXIT_CODES[category]


def test_config_errors(cfg, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SCENARIO + "bogus_key = 1\n")
    rc, cat = fail(["simulate", "--config", bad, "--out", tmp_path / "e.csv"], capsys)
    assert cat == "config" and rc == 3
    wide = tmp_path / "wide.cfg"
    wide.write_text(SCENARIO.replace("source.rfi.df_min_hz = 300000",
                                     "source.rfi.df_min_hz = 2000000").replace(
        "source.rfi.df_max_hz = 540000", "source.rfi.df_max_hz = 3000000"))
    rc, cat = fail(["run", "--config", wide, "--out", tmp_path / "o"], capsys)
    assert cat == "config" and "source 'rfi'" in fail.last


def test_schema_error(cfg, tmp_path, capsys):
    junk = tmp_path / "pairs.csv"
    junk.write_text("a,b\n1,2\n")
    rc, cat = fail(["analyze", "--pairs", junk, "--config", cfg, "--out", tmp_path / "r"], capsys)
    assert cat == "schema" and rc == 5


def test_every_category_has_a_code():
    import pulsepair.exceptions as ex
    cats = {c.category for c in vars(ex).values()
            if isinstance(c, type) and issubclass(c, PulsePairError)}
    assert cats <= set(EXIT_CODES)
