"""Command line: ``pulsepair {simulate,detect,pair,analyze,run,iono,geom}``.

Failures print one line ``error: <category>: <message>`` on stderr and exit
with the category's code.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (filters_from, iono_from, observatory_only, read_config, scenario_from)
from .exceptions import PulsePairError
from .firstlevel import PulseDetector, read_events, write_events
from .geometry import (SkyDirection, expected_ew_phase, fringe_period, mjd_to_lst, ra_bin_width,
                       sidereal_traversal_seconds)
from .ionosphere import IonoParams, summary
from .secondlevel import FILTER_ORDER, FilterSet, PairSelector, read_pairs, write_pairs
from .simulator import read_iq_stream, simulate, write_iq_stream
from .statistics import DoiSearch, export_report, histogram, llsnr_sweep
from .tableio import ensure_dir, file_digest, write_table

EXIT_CODES = {
    "usage": 2, "config": 3, "domain": 4, "range": 4, "out-of-beam": 4, "shape": 4,
    "schema": 5, "io": 6, "degenerate-noise": 7, "degenerate-statistics": 7,
    "injection": 8, "margin": 9, "error": 1,
}

DEFAULT_SWEEP = (-12.0, -8.0, -6.0, -4.0, -2.7)


def _versions() -> dict:
    import pandas
    import scipy
    import sklearn

    return {"pulsepair": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pandas.__version__, "scikit-learn": sklearn.__version__,
            "python": platform.python_version()}


def _timestamp() -> str | None:
    # reproducible-builds convention; without it the manifest stays time-free
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(path: Path, stage: str, config_hash: str, seed, inputs, outputs) -> Path:
    manifest = {
        "stage": stage, "config_sha256": config_hash, "seed": seed, "versions": _versions(),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
        "created_utc": _timestamp(),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _provenance(config_hash: str, seed, **extra) -> list[str]:
    line = f"pulsepair {__version__} config_sha256={config_hash} seed={seed}"
    for k, v in extra.items():
        line += f" {k}={v}"
    return [line]


def _load_filters(path) -> tuple[FilterSet, str]:
    if path is None:
        return FilterSet(), "default"
    raw = read_config(path)
    return filters_from(raw), raw.digest()


# --------------------------------------------------------------------------
# stages shared by the staged and the composed commands

def stage_simulate(config, seed, out, raw: bool = False, truth=None, band=None) -> dict:
    raw_cfg = read_config(config)
    cfg = scenario_from(raw_cfg, seed)
    chash = raw_cfg.digest()
    out = Path(out)
    if out.parent != Path(""):
        ensure_dir(out.parent)
    prov = _provenance(chash, cfg.seed)
    outputs = [out]
    if raw:
        n = write_iq_stream(cfg, out, {"config_sha256": chash, "seed": cfg.seed})
        info = {"records": n}
    else:
        result = simulate(cfg)
        write_events(result.events, out, prov)
        info = {"events": len(result.events), "epochs": result.n_epochs}
        if truth is not None:
            cols = list(result.truth.columns)
            write_table(result.truth, truth, cols, {c: None for c in cols} | {
                "mjd": "%.9f", "lst_hr": "%.9f", "f0_hz": "%.7f", "df_hz": "%.7f",
                "snr_db": "%.6f", "expected_dphi0_rad": "%.9f"}, prov)
            outputs.append(Path(truth))
        if band is not None:
            cols = ["mjd", "lst_hr", "band50_e_db", "band50_w_db"]
            write_table(result.band_power, band, cols,
                        {"mjd": "%.9f", "lst_hr": "%.9f", "band50_e_db": "%.6f",
                         "band50_w_db": "%.6f"}, prov)
            outputs.append(Path(band))
    write_manifest(out.with_name(out.name + ".manifest.json"), "simulate", chash, cfg.seed,
                   [config], outputs)
    return info | {"config_sha256": chash, "seed": cfg.seed}


def stage_pair(events_path, config, filters, out, candidates=None) -> PairSelector:
    raw_cfg = read_config(config)
    obs = observatory_only(raw_cfg)
    fs, fhash = _load_filters(filters)
    events = read_events(events_path)
    seed = _seed_from(events)
    sel = PairSelector(obs=obs, filters=fs).fit(events)
    cand = sel.candidates(events)
    accepted = cand[cand["reject_reason"] == ""].reset_index(drop=True)
    counts = cand["reject_reason"].replace("", "accepted").value_counts()
    sel.rejection_counts_ = {k: int(counts.get(k, 0)) for k in ("accepted",) + FILTER_ORDER}
    out = Path(out)
    if out.parent != Path(""):
        ensure_dir(out.parent)
    prov = _provenance(raw_cfg.digest(), seed, filters_sha256=fhash,
                       events_sha256=file_digest(events_path))
    write_pairs(accepted, out, prov)
    outputs = [out]
    if candidates is not None:
        cols = list(cand.columns)
        fmt = {c: "%.9f" for c in cols} | {"segment0": "%d", "segmentdf": "%d", "ra_bin": "%d",
                                            "rfi_veto": "%d", "reject_reason": None}
        write_table(cand.assign(rfi_veto=cand["rfi_veto"].astype(int)), candidates, cols, fmt, prov)
        outputs.append(Path(candidates))
    write_manifest(out.with_name(out.name + ".manifest.json"), "pair", raw_cfg.digest(), seed,
                   [config, events_path] + ([filters] if filters else []), outputs)
    return sel


def stage_analyze(pairs_path, config, filters, out_dir, doi_range=(5.1, 5.4), doi_ra=None,
                  sweep=DEFAULT_SWEEP, n_bins=3200, window=(5.0, 5.6), phase_tol=0.18,
                  sigma="poisson") -> DoiSearch:
    raw_cfg = read_config(config)
    obs = observatory_only(raw_cfg)
    fs, fhash = _load_filters(filters)
    pairs = read_pairs(pairs_path)
    seed = _seed_from(pairs)
    search = DoiSearch(obs=obs, ra_range=tuple(doi_range), n_bins=n_bins,
                       phase_tol=phase_tol).fit(pairs)
    ra = search.best_ra_ if doi_ra is None else doi_ra
    hists = llsnr_sweep(pairs, fs, sorted(set(sweep) | {fs.llsnr_pair_threshold}), n_bins,
                        window, sigma)
    out_dir = ensure_dir(out_dir)
    prov = _provenance(raw_cfg.digest(), seed, filters_sha256=fhash,
                       pairs_sha256=file_digest(pairs_path))
    written = export_report(pairs, hists, out_dir, obs, ra, prov, phase_tol,
                            doi_profile=search.profile_)
    base = histogram(pairs, n_bins, window, sigma) if len(pairs) else None
    lines = [
        f"pairs = {len(pairs)}",
        f"doi_best_ra_hr = {search.best_ra_:.6f}",
        f"doi_track_count = {search.best_score_}",
        f"doi_null_threshold = {search.null_threshold_:.1f}",
        f"doi_significant = {str(search.significant_).lower()}",
    ]
    if base is not None:
        lines += [f"window_mean_per_bin = {base.mu:.6f}",
                  f"doi_bin_z = {base.z_at(ra):.6f}"]
    if not search.significant_:
        lines.append("result = no direction above the null threshold")
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("".join(f"# {p}\n" for p in prov) + "\n".join(lines) + "\n")
    print("\n".join(lines))
    write_manifest(out_dir / "manifest.json", "analyze", raw_cfg.digest(), seed,
                   [config, pairs_path] + ([filters] if filters else []),
                   sorted(written.values()) + [summary_path])
    return search


def _seed_from(frame):
    for line in frame.attrs.get("comments", []):
        for token in line.split():
            if token.startswith("seed="):
                value = token[5:]
                return int(value) if value.lstrip("-").isdigit() else value
    return None


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(a) -> int:
    info = stage_simulate(a.config, a.seed, a.out, a.raw, a.truth, a.band)
    print(" ".join(f"{k}={v}" for k, v in info.items()))
    return 0


def cmd_detect(a) -> int:
    meta, blocks = read_iq_stream(a.input)
    det = PulseDetector(threshold_db=a.threshold_db, noise_window=a.noise_window).fit()
    events = det.transform(blocks)
    prov = _provenance(meta.get("config_sha256", "unknown"), meta.get("seed"))
    write_events(events, a.out, prov)
    write_manifest(Path(a.out).with_name(Path(a.out).name + ".manifest.json"), "detect",
                   meta.get("config_sha256", "unknown"), meta.get("seed"), [a.input], [a.out])
    print(f"events={len(events)}")
    return 0


def cmd_pair(a) -> int:
    sel = stage_pair(a.events, a.config, a.filters, a.out, a.candidates)
    for line in sel._fs().describe():
        print(line)
    print(" ".join(f"{k}={v}" for k, v in sel.rejection_counts_.items()))
    return 0


def cmd_analyze(a) -> int:
    stage_analyze(a.pairs, a.config, a.filters, a.out, a.doi_range, a.doi_ra, a.sweep,
                  a.n_bins, a.window, a.phase_tol, a.sigma)
    return 0


def cmd_run(a) -> int:
    out = ensure_dir(a.out)
    stage_simulate(a.config, a.seed, out / "events.csv")
    sel = stage_pair(out / "events.csv", a.config, a.filters, out / "pairs.csv")
    print(" ".join(f"{k}={v}" for k, v in sel.rejection_counts_.items()))
    stage_analyze(out / "pairs.csv", a.config, a.filters, out / "report", a.doi_range, a.doi_ra,
                  a.sweep, a.n_bins, a.window, a.phase_tol, a.sigma)
    return 0


def cmd_iono(a) -> int:
    p = iono_from(read_config(a.config)) if a.config else IonoParams()
    changes = {k: v for k, v in (("b_field", a.b_field), ("tec", a.tec),
                                 ("tec_rate", a.tec_rate),
                                 ("refraction_100mhz", a.refraction)) if v is not None}
    if changes:
        p = IonoParams(**({f: getattr(p, f) for f in ("b_field", "tec", "tec_rate",
                                                      "refraction_100mhz")} | changes))
    for label, value, unit in summary(p, a.f0, a.df, a.t_int, a.baseline):
        print(f"{label}\t{value:.6g}\t{unit}")
    return 0


def cmd_geom(a) -> int:
    rows = []
    if a.mjd is not None:
        if a.longitude is None:
            raise _usage("--mjd needs --longitude")
        rows.append(("lst_hr", f"{mjd_to_lst(a.mjd, a.longitude):.9f}"))
    if a.baseline is not None and a.dec is not None:
        rows.append(("fringe_period_hr", f"{fringe_period(a.baseline, a.dec):.6f}"))
    if a.n_bins is not None:
        w = ra_bin_width(a.n_bins)
        rows.append(("ra_bin_width_hr", f"{w:.6g}"))
        rows.append(("traversal_s", f"{sidereal_traversal_seconds(w):.6g}"))
    if a.ra is not None:
        if a.config is None or a.lst is None or a.freq is None:
            raise _usage("--ra needs --config, --lst and --freq")
        obs = observatory_only(read_config(a.config))
        src = SkyDirection(a.ra, obs.pointing_dec if a.dec is None else a.dec)
        rows.append(("expected_ew_phase_rad", f"{expected_ew_phase(src, a.lst, obs, a.freq):.9f}"))
    if not rows:
        raise _usage("nothing to compute; give --mjd/--longitude, --baseline/--dec, --n-bins or --ra")
    for k, v in rows:
        print(f"{k}\t{v}")
    return 0


class _UsageError(PulsePairError):
    category = "usage"


def _usage(msg: str) -> _UsageError:
    return _UsageError(msg)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pulsepair", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pulsepair {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="synthesize a scenario and write first-level events")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="overrides the config seed")
    s.add_argument("--out", required=True)
    s.add_argument("--raw", action="store_true", help="write raw IQ blocks instead of events")
    s.add_argument("--truth", help="also write the injected-event table")
    s.add_argument("--band", help="also write per-integration 50 MHz band power")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("detect", help="first-level detection on a raw IQ file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threshold-db", type=float, default=8.5)
    s.add_argument("--noise-window", type=int, default=64)
    s.set_defaults(func=cmd_detect)

    def analysis_opts(s):
        s.add_argument("--doi-range", type=float, nargs=2, default=(5.1, 5.4), metavar=("LO", "HI"))
        s.add_argument("--doi-ra", type=float, help="RA used for the phase table (default: best)")
        s.add_argument("--sweep", type=_floats, default=DEFAULT_SWEEP,
                       help="comma-separated pair LLSNR thresholds")
        s.add_argument("--n-bins", type=int, default=3200)
        s.add_argument("--window", type=float, nargs=2, default=(5.0, 5.6), metavar=("LO", "HI"))
        s.add_argument("--phase-tol", type=float, default=0.18)
        s.add_argument("--sigma", choices=("poisson", "sample"), default="poisson")

    s = sub.add_parser("pair", help="match and filter pulse pairs")
    s.add_argument("--events", required=True)
    s.add_argument("--config", required=True, help="file holding the observatory keys")
    s.add_argument("--filters")
    s.add_argument("--out", required=True)
    s.add_argument("--candidates", help="also write every candidate with its rejection reason")
    s.set_defaults(func=cmd_pair)

    s = sub.add_parser("analyze", help="RA statistics, DOI search and report tables")
    s.add_argument("--pairs", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--filters")
    s.add_argument("--out", required=True)
    analysis_opts(s)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("run", help="simulate, pair and analyze into one directory")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--filters")
    s.add_argument("--out", required=True)
    analysis_opts(s)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("iono", help="ionospheric bounds")
    s.add_argument("--config")
    s.add_argument("--b-field", type=float, help="tesla")
    s.add_argument("--tec", type=float, help="electrons per m^2")
    s.add_argument("--tec-rate", type=float, help="electrons per m^2 per s")
    s.add_argument("--refraction", type=float, help="deg at 100 MHz")
    s.add_argument("--f0", type=float, default=1.425, help="GHz")
    s.add_argument("--df", type=float, default=1.0, help="MHz")
    s.add_argument("--t-int", type=float, default=0.27, help="s")
    s.add_argument("--baseline", type=float, default=33.0, help="wavelengths")
    s.set_defaults(func=cmd_iono)

    s = sub.add_parser("geom", help="sidereal time, fringe period and phase calculator")
    s.add_argument("--mjd", type=float)
    s.add_argument("--longitude", type=float, help="deg east")
    s.add_argument("--baseline", type=float, help="wavelengths")
    s.add_argument("--dec", type=float, help="deg")
    s.add_argument("--n-bins", type=int)
    s.add_argument("--ra", type=float, help="hours")
    s.add_argument("--lst", type=float, help="hours")
    s.add_argument("--freq", type=float, help="MHz")
    s.add_argument("--config")
    s.set_defaults(func=cmd_geom)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except PulsePairError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {exc.category}: {msg}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error: io: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
