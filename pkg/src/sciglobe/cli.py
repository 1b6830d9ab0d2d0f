"""Command-line entry point: ``sciglobe <command> [options]``.

Options may come from a JSON config file (``--config``); flags given on the
command line override it. Exit status is 0 on success, 2 for configuration
errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import gazetteer as gz
from .aggregate import (
    ALL,
    DIMENSIONS,
    AddressOccurrences,
    CellAggregator,
    FieldScheme,
    annual_growth,
    annual_growth_rate,
    classify_country_map,
    dispersion,
)
from .io import CorpusReader
from .model import DEFAULT_REGION_COUNTRIES, CorpusFilter
from .synthetic import gen_synthetic

log = logging.getLogger("sciglobe")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

SUMMARY_COLUMNS = ["frac_pubs", "mgcd_km", "pct_mldc", "pct_ldc", "pct_vldc",
                   "pct_copub", "pct_intl_copub", "mean_authors"]


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    corpus: Optional[str] = None
    gazetteer: list = field(default_factory=list)
    cache: Optional[str] = None
    fields: Optional[str] = None
    out_dir: str = "out"
    year_min: int = 1980
    year_max: int = 2009
    doc_types: list = field(default_factory=lambda: ["article", "review"])
    reprint_cutoff_year: int = 1997
    fixed_journals: Optional[str] = None
    region_countries: list = field(default_factory=lambda: sorted(DEFAULT_REGION_COUNTRIES))
    strict_distance_km: float = 50.0
    strict_min_occurrences: int = 200
    cursory_distance_km: float = 100.0
    preferred_source: Optional[str] = None
    top_k: int = 11000
    partitions: list = field(default_factory=lambda: ["all", "country", "field", "broad_field"])
    map_window: str = "2007:2009"
    fractional: str = "proportional"
    dispersion_self_pairs: str = "include"
    seed: int = 0
    threads: int = 1

    def corpus_filter(self) -> CorpusFilter:
        return CorpusFilter(
            year_min=self.year_min,
            year_max=self.year_max,
            doc_types=frozenset(self.doc_types),
            reprint_cutoff_year=self.reprint_cutoff_year,
            fixed_journal_window=parse_span(self.fixed_journals) if self.fixed_journals else None,
        )

    def reader(self) -> CorpusReader:
        path = self.require("corpus")
        return CorpusReader(path, self.corpus_filter(), frozenset(self.region_countries))

    def require(self, name: str, must_exist: bool = True) -> str:
        value = getattr(self, name)
        if not value:
            raise ConfigError(f"missing required setting: {name}")
        if must_exist and not Path(value).exists():
            raise ConfigError(f"{name} file not found: {value}")
        return value

    def out(self, name: str) -> Path:
        d = Path(self.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        return d / name


def parse_span(text: str) -> tuple[int, int]:
    try:
        a, b = str(text).split(":")
        y0, y1 = int(a), int(b)
    except ValueError:
        raise ConfigError(f"expected a year span like 2000:2009, got {text!r}") from None
    if y0 > y1:
        raise ConfigError(f"empty year span {text!r}")
    return y0, y1


def parse_years(text: str) -> list[int]:
    years: set[int] = set()
    for part in str(text).split(","):
        part = part.strip()
        if ":" in part:
            y0, y1 = parse_span(part)
            years.update(range(y0, y1 + 1))
        elif part:
            try:
                years.add(int(part))
            except ValueError:
                raise ConfigError(f"bad year {part!r}") from None
    return sorted(years)


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if isinstance(cfg.gazetteer, str):
        cfg.gazetteer = [cfg.gazetteer]
    if cfg.fractional not in ("proportional", "equal-country"):
        raise ConfigError(f"bad --fractional {cfg.fractional!r}")
    if cfg.dispersion_self_pairs not in ("include", "exclude"):
        raise ConfigError(f"bad --dispersion-self-pairs {cfg.dispersion_self_pairs!r}")
    for d in cfg.partitions:
        if d not in DIMENSIONS:
            raise ConfigError(f"unknown partition {d!r}")
    try:
        cfg.corpus_filter()
        policy(cfg, None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def policy(cfg: RunConfig, sources) -> gz.ReconcilePolicy:
    pref = cfg.preferred_source
    if pref is None and sources:
        pref = next(iter(sources))
    return gz.ReconcilePolicy(
        strict_distance_km=cfg.strict_distance_km,
        strict_min_occurrences=cfg.strict_min_occurrences,
        cursory_distance_km=cfg.cursory_distance_km,
        preferred_source=pref,
        top_k_addresses=cfg.top_k,
    )


def _fmt(value, digits: int) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def _write_tsv_or_csv(path: Path, header, rows, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def summary_row(s) -> list[str]:
    return [
        _fmt(s.frac_pubs, 6),
        _fmt(s.mgcd_km, 1),
        _fmt(s.pct_mldc, 2),
        _fmt(s.pct_ldc, 2),
        _fmt(s.pct_vldc, 2),
        _fmt(s.pct_copub, 2),
        _fmt(s.pct_intl_copub, 2),
        _fmt(s.mean_authors, 2),
    ]


def _load_cache(cfg: RunConfig) -> dict:
    path = cfg.require("cache", must_exist=False)
    if not Path(path).exists():
        raise ConfigError(f"geocode cache not found: {path} (run 'geocode' first)")
    try:
        return gz.read_cache(path)
    except ValueError as exc:
        raise DataError(str(exc)) from None


# -- commands ------------------------------------------------------------------


def cmd_geocode(cfg: RunConfig) -> int:
    if not cfg.gazetteer:
        raise ConfigError("no gazetteer file given (--gazetteer)")
    for g in cfg.gazetteer:
        if not Path(g).exists():
            raise ConfigError(f"gazetteer file not found: {g}")
    try:
        clients = gz.load_gazetteer(cfg.gazetteer)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    pol = policy(cfg, clients)
    if pol.preferred_source is not None and pol.preferred_source not in clients:
        raise ConfigError(f"preferred source {pol.preferred_source!r} not in gazetteer")
    reader = cfg.reader()
    counts = gz.count_addresses(reader)
    entries = gz.geocode_ranked(gz.rank_addresses_by_occurrence(counts), clients, pol)
    cache_path = cfg.require("cache", must_exist=False)
    if Path(cache_path).exists():
        entries = gz.merge_with_cache(entries, gz.read_cache(cache_path))
    Path(cache_path).parent.mkdir(parents=True, exist_ok=True)
    gz.write_cache(cache_path, entries)
    queue = cfg.out("review_queue.tsv")
    n_queue = gz.write_review_queue(queue, entries, list(clients))
    status = {s.value: 0 for s in gz.Status}
    for e in entries:
        status[e.status.value] += 1
    print(f"publications admitted: {reader.report.admitted}")
    print(f"unique addresses: {len(entries)}")
    print(f"geocoded (top k): {min(len(entries), pol.top_k_addresses)}")
    for k, v in status.items():
        print(f"{k}: {v}")
    print(f"review queue: {n_queue} rows -> {queue}")
    print(f"address coverage: {gz.coverage(entries):.2f}%")
    return EXIT_OK


def cmd_apply_review(cfg: RunConfig, verdicts_path: str) -> int:
    entries = _load_cache(cfg)
    sources = sorted({s for e in entries.values() for s in e.candidates})
    try:
        verdicts = gz.read_review_verdicts(verdicts_path, sources)
        entries = gz.apply_verdicts(entries, verdicts)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    gz.write_cache(cfg.cache, entries.values())
    print(f"applied {len(verdicts)} verdicts; coverage {gz.coverage(entries.values()):.2f}%")
    return EXIT_OK


def _aggregate(cfg: RunConfig, partitions) -> tuple[CellAggregator, CorpusReader]:
    coords = gz.resolved_coordinates(_load_cache(cfg).values())
    scheme = None
    if {"field", "broad_field"} & set(partitions):
        try:
            scheme = FieldScheme.load(cfg.require("fields"))
        except ValueError as exc:
            raise DataError(str(exc)) from None
    reader = cfg.reader()
    agg = CellAggregator(partitions, scheme, cfg.fractional, coords).update(reader)
    return agg, reader


def cmd_indicators(cfg: RunConfig) -> int:
    agg, reader = _aggregate(cfg, cfg.partitions)
    if agg.n_pubs == 0:
        log.warning("no admitted publications; writing headers only")
    for dim in cfg.partitions:
        rows = [[unit, year, *summary_row(s)] for (unit, year), s in agg.summaries(dim).items()]
        _write_tsv_or_csv(cfg.out(f"indicators_{dim}.csv"), ["cell", "year", *SUMMARY_COLUMNS], rows)
    if agg.unmapped_categories:
        log.warning("%d subject categories not in the field scheme", len(agg.unmapped_categories))
    meta = {
        "ingest": reader.report.as_dict(),
        "publications": agg.n_pubs,
        "publications_with_gcd": agg.n_gcd_defined,
        "publications_partially_geocoded": agg.n_biased,
        "distance_indicator_denominator": "publications with a defined GCD",
        "fractional": cfg.fractional,
        "unmapped_categories": dict(sorted(agg.unmapped_categories.items())),
    }
    with open(cfg.out("indicators_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"publications: {agg.n_pubs}; with GCD: {agg.n_gcd_defined}; "
          f"partially geocoded: {agg.n_biased}")
    return EXIT_OK


def _read_series(path: str) -> dict[int, float]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return {int(r["year"]): float(r["value"]) for r in csv.DictReader(fh)}
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read series {path}: {exc}") from None


def growth_stats(series: dict[int, Optional[float]], y0: int, y1: int) -> dict:
    try:
        g = annual_growth(series, None, y0, y1)
        r = annual_growth_rate(series, None, y0, y1)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc)) from None
    return {"y0": y0, "y1": y1, "value_y0": series[y0], "value_y1": series[y1],
            "annual_growth": g, "annual_growth_rate_pct": r}


def cmd_trend(cfg: RunConfig, metric: str, y0: int, y1: int, dimension: str, unit: str,
              series_path: Optional[str]) -> int:
    if series_path:
        series = _read_series(series_path)
    else:
        agg, _ = _aggregate(cfg, ["all"] if dimension == "all" else ["all", dimension])
        series = {tp.year: getattr(tp.summary, metric) for tp in agg.trend(dimension, unit)}
    rows = [[y, "" if v is None else repr(v)] for y, v in sorted(series.items())]
    _write_tsv_or_csv(cfg.out("trend.csv"), ["year", metric], rows)
    stats = growth_stats(series, y0, y1)
    stats.update(metric=metric, dimension=dimension, unit=unit)
    with open(cfg.out("growth.json"), "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{metric} {y0}->{y1}: growth {stats['annual_growth']:.1f} per year, "
          f"rate {stats['annual_growth_rate_pct']:.1f}% per year")
    return EXIT_OK


def cmd_dispersion(cfg: RunConfig, years: list[int]) -> int:
    coords = gz.resolved_coordinates(_load_cache(cfg).values())
    occ = AddressOccurrences()
    for p in cfg.reader():
        occ.add(p)
    self_pairs = cfg.dispersion_self_pairs == "include"
    values: dict[int, Optional[float]] = {}
    rows = []
    for y in years:
        locs = occ.locations([y], coords)
        if not locs:
            log.warning("year %d has no resolved addresses", y)
            values[y] = None
            rows.append([y, "", 0, 0])
            continue
        try:
            values[y] = dispersion(locs, self_pairs=self_pairs, threads=cfg.threads)
        except ValueError as exc:
            log.warning("year %d: %s", y, exc)
            values[y] = None
            rows.append([y, "", len(locs), sum(n for _, n in locs.values())])
            continue
        rows.append([y, _fmt(values[y], 1), len(locs), sum(n for _, n in locs.values())])
    _write_tsv_or_csv(cfg.out("dispersion.csv"), ["year", "dispersion_km", "locations", "occurrences"], rows)
    if len(years) >= 2:
        y0, y1 = years[0], years[-1]
        if values.get(y0) is not None and values.get(y1) is not None:
            stats = growth_stats(values, y0, y1)
            with open(cfg.out("dispersion_growth.json"), "w", encoding="utf-8") as fh:
                json.dump(stats, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(f"dispersion growth rate {y0}->{y1}: {stats['annual_growth_rate_pct']:.2f}% per year")
    return EXIT_OK


def cmd_map_classes(cfg: RunConfig, window: str) -> int:
    y0, y1 = parse_span(window)
    agg, _ = _aggregate(cfg, ["country"])
    pooled = agg.window("country", y0, y1)
    classes = classify_country_map({c: (s.frac_pubs, s.mgcd_km) for c, s in pooled.items()})
    rows = [[c, _fmt(pooled[c].frac_pubs, 6), _fmt(pooled[c].mgcd_km, 1), cls] for c, cls in classes.items()]
    _write_tsv_or_csv(cfg.out("map_classes.csv"), ["country", "frac_pubs", "mgcd_km", "class"], rows)
    print(f"{len(rows)} countries classified for {y0}-{y1}")
    return EXIT_OK


def cmd_audit_sample(cfg: RunConfig, n: int) -> int:
    entries = _load_cache(cfg)
    try:
        sample = gz.audit_sample(entries.values(), n, cfg.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    path = cfg.out("audit_sample.tsv")
    gz.write_audit_sample(path, sample)
    print(f"{len(sample)} addresses -> {path}")
    return EXIT_OK


def cmd_audit_compare(cfg: RunConfig, verified_path: str, threshold_km: float) -> int:
    coords = gz.resolved_coordinates(_load_cache(cfg).values())
    try:
        verified = gz.read_verified(verified_path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read verified file: {exc}") from None
    report = gz.audit_compare(coords, verified, threshold_km)
    rows = [[k, f"{d:.3f}"] for k, d in sorted(report.mismatches)]
    _write_tsv_or_csv(cfg.out("audit_mismatches.tsv"), ["key", "distance_km"], rows, delimiter="\t")
    print(f"compared: {report.compared}; more than {threshold_km:g} km off: {report.mismatch_count}; "
          f"not resolved: {len(report.missing)}")
    return EXIT_OK


def cmd_schema_check(path: str) -> int:
    from .io import schema_check

    if not Path(path).is_file():
        raise ConfigError(f"corpus file not found: {path}")
    n, errors = schema_check(path)
    for lineno, msg in errors:
        print(f"line {lineno}: {msg}")
    print(f"{n} records checked, {len(errors)} errors")
    return EXIT_DATA if errors else EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--corpus")
    common.add_argument("--gazetteer", action="append", help="gazetteer TSV (repeatable)")
    common.add_argument("--cache")
    common.add_argument("--fields", help="field scheme TSV")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--year-min", dest="year_min", type=int)
    common.add_argument("--year-max", dest="year_max", type=int)
    common.add_argument("--fixed-journals", dest="fixed_journals", metavar="Y0:Y1")
    common.add_argument("--fractional", choices=["proportional", "equal-country"])
    common.add_argument("--dispersion-self-pairs", dest="dispersion_self_pairs", choices=["include", "exclude"])
    common.add_argument("--partitions", type=lambda s: [x for x in s.split(",") if x])
    common.add_argument("--top-k", dest="top_k", type=int)
    common.add_argument("--preferred-source", dest="preferred_source")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sciglobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("geocode", parents=[common], help="geocode addresses and write the cache")
    p = sub.add_parser("apply-review", parents=[common], help="apply verdicts from a review queue")
    p.add_argument("verdicts")
    sub.add_parser("indicators", parents=[common], help="per-cell indicator tables")
    p = sub.add_parser("trend", parents=[common], help="yearly series and growth statistics")
    p.add_argument("--metric", default="mgcd_km")
    p.add_argument("--y0", type=int, required=True)
    p.add_argument("--y1", type=int, required=True)
    p.add_argument("--dimension", default="all")
    p.add_argument("--unit", default=ALL)
    p.add_argument("--series", help="CSV with year,value columns instead of a corpus")
    p = sub.add_parser("dispersion", parents=[common], help="geographical dispersion per year")
    p.add_argument("--years", required=True, help="e.g. 1980,2000,2009 or 2000:2009")
    p = sub.add_parser("map-classes", parents=[common], help="country colour classes")
    p.add_argument("--window", default=None, metavar="Y0:Y1")
    p = sub.add_parser("audit-sample", parents=[common], help="export a random audit sample")
    p.add_argument("--n", type=int, default=150)
    p = sub.add_parser("audit-compare", parents=[common], help="compare verified coordinates")
    p.add_argument("verified")
    p.add_argument("--threshold-km", type=float, default=50.0)
    p = sub.add_parser("schema-check", parents=[common], help="validate a corpus file")
    p.add_argument("path", nargs="?")
    p = sub.add_parser("gen-synthetic", parents=[common], help="write a seeded synthetic corpus")
    p.add_argument("--n-pubs", type=int, default=10000)
    p.add_argument("--n-sites", type=int, default=500)
    p.add_argument("--n-countries", type=int, default=40)
    return parser


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    cmd = args.command
    if cmd == "geocode":
        return cmd_geocode(cfg)
    if cmd == "apply-review":
        return cmd_apply_review(cfg, args.verdicts)
    if cmd == "indicators":
        return cmd_indicators(cfg)
    if cmd == "trend":
        if args.metric not in SUMMARY_COLUMNS:
            raise ConfigError(f"unknown metric {args.metric!r}")
        return cmd_trend(cfg, args.metric, args.y0, args.y1, args.dimension, args.unit, args.series)
    if cmd == "dispersion":
        return cmd_dispersion(cfg, parse_years(args.years))
    if cmd == "map-classes":
        return cmd_map_classes(cfg, args.window or cfg.map_window)
    if cmd == "audit-sample":
        return cmd_audit_sample(cfg, args.n)
    if cmd == "audit-compare":
        return cmd_audit_compare(cfg, args.verified, args.threshold_km)
    if cmd == "schema-check":
        return cmd_schema_check(args.path or cfg.require("corpus"))
    if cmd == "gen-synthetic":
        paths = gen_synthetic(cfg.out_dir, args.n_pubs, args.n_sites, args.n_countries, cfg.seed,
                              cfg.year_min, cfg.year_max)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return EXIT_OK
    raise ConfigError(f"unknown command {cmd!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, gz.ReviewError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
